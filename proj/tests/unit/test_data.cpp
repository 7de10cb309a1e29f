#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>

#include "fcco/data.hpp"
#include "fcco/synthetic.hpp"

using namespace fcco;

namespace {

std::string temp_file(const std::string& name, const std::string& contents) {
  const auto dir = std::filesystem::temp_directory_path() / "fcco_data_tests";
  std::filesystem::create_directories(dir);
  const auto path = dir / name;
  std::ofstream(path) << contents;
  return path.string();
}

template <class F>
std::string error_of(F&& f) {
  try {
    f();
  } catch (const std::exception& e) {
    return e.what();
  }
  return "";
}

}  // namespace

TEST(BinaryCsv, LoadsRows) {
  const std::string path = temp_file("three.csv", "f1,f2,label\n0.5,1,1\n-2,3e-1,0\r\n\n 4 ,+5,1\n");
  const TpaucDataset d = load_csv_binary(path);
  ASSERT_EQ(d.n_plus(), 2u);
  ASSERT_EQ(d.n_minus(), 1u);
  EXPECT_EQ(d.positives[1](0, 0), 4.0);
  EXPECT_EQ(d.positives[1](0, 1), 5.0);
  EXPECT_EQ(d.negatives[0](0, 1), 0.3);
}

TEST(BinaryCsv, BadLabelNamesTheLine) {
  const std::string path = temp_file("badlabel.csv", "f1,label\n1,0\n2,7\n");
  EXPECT_THROW(load_csv_binary(path), ParseError);
  EXPECT_NE(error_of([&] { load_csv_binary(path); }).find(":3"), std::string::npos);
  const std::string junk = temp_file("junk.csv", "f1,label\n1,0\n1.2.3,1\n");
  EXPECT_NE(error_of([&] { load_csv_binary(junk); }).find(":3"), std::string::npos);
}

TEST(BinaryCsv, SchemaAndMissingFile) {
  EXPECT_THROW(load_csv_binary(temp_file("short.csv", "f1,f2,label\n1,2,1\n1,0\n")), SchemaError);
  EXPECT_THROW(load_csv_binary("/nonexistent/none.csv"), DataError);
}

TEST(BinaryCsv, RoundTripKeepsFullPrecision) {
  TpaucDataset d;
  d.positives.push_back(Matrix::Constant(1, 3, 0.1 + 0.2));
  d.positives.push_back(Matrix::Constant(1, 3, -1e-300));
  d.negatives.push_back(Matrix::Constant(1, 3, 1.0 / 3.0));
  const std::string path = temp_file("rt.csv", "");
  write_csv_binary(path, d);
  const TpaucDataset back = load_csv_binary(path);
  ASSERT_EQ(back.n_plus(), 2u);
  EXPECT_EQ(back.positives[0], d.positives[0]);
  EXPECT_EQ(back.positives[1], d.positives[1]);
  EXPECT_EQ(back.negatives[0], d.negatives[0]);
}

TEST(GroupedCsv, RoundTripAndOrdering) {
  const std::string path = temp_file("g.csv", "group,x1,label\n5,1.5,1\n2,0.25,0\n5,-1,0\n");
  const GroupedDataset d = load_grouped_csv(path, LossKind::Logistic);
  ASSERT_EQ(d.num_groups(), 2u);
  EXPECT_EQ(d.features[0](0, 0), 0.25);
  EXPECT_EQ(d.features[1].rows(), 2);
  EXPECT_EQ(d.loss, LossKind::Logistic);
  SyntheticSpec spec;
  spec.n = 4;
  spec.d = 3;
  spec.samples = 5;
  spec.sigma = 0.2;
  const GroupedDataset g = gen_grouped_dro(spec);
  const std::string out = temp_file("g2.csv", "");
  write_grouped_csv(out, g);
  const GroupedDataset back = load_grouped_csv(out);
  ASSERT_EQ(back.num_groups(), 4u);
  for (std::size_t k = 0; k < 4; ++k) {
    EXPECT_EQ(back.features[k], g.features[k]);
    EXPECT_EQ(back.labels[k], g.labels[k]);
  }
}

TEST(MilBags, LoadAndRoundTrip) {
  const std::string path = temp_file("bags.csv",
                                     "bag_id,label,n_instances\nx1,x2\n7,1,2\n1,2\n3,4\n9,0,1\n0.5,0.5\n");
  const TpaucDataset d = load_mil_bags(path);
  ASSERT_EQ(d.n_plus(), 1u);
  ASSERT_EQ(d.n_minus(), 1u);
  EXPECT_EQ(d.positives[0].rows(), 2);
  EXPECT_EQ(d.positives[0](1, 1), 4.0);
  EXPECT_THROW(load_mil_bags(temp_file("trunc.csv", "bag_id,label,n_instances\nx1\n1,1,3\n1\n2\n")),
               DataError);
  SyntheticSpec spec;
  spec.kind = SyntheticKind::MilTpauc;
  spec.n_pos = 4;
  spec.n_neg = 6;
  spec.d = 3;
  const TpaucDataset g = gen_mil_tpauc(spec).data;
  const std::string out = temp_file("bags2.csv", "");
  write_mil_bags(out, g);
  const TpaucDataset back = load_mil_bags(out);
  ASSERT_EQ(back.n_plus(), 4u);
  ASSERT_EQ(back.n_minus(), 6u);
  for (std::size_t k = 0; k < 4; ++k) EXPECT_EQ(back.positives[k], g.positives[k]);
  for (std::size_t k = 0; k < 6; ++k) EXPECT_EQ(back.negatives[k], g.negatives[k]);
}

TEST(Numbers, FormatAndParse) {
  for (double x : {0.1, 1e-300, -2.5, 123456789.125, 1.0 / 3.0}) {
    EXPECT_EQ(parse_double(format_double(x), "x", 1), x);
  }
  EXPECT_EQ(parse_double("+2", "x", 1), 2.0);
  EXPECT_THROW(parse_double("1,5", "x", 4), ParseError);
  EXPECT_THROW(parse_double("", "x", 4), ParseError);
}
