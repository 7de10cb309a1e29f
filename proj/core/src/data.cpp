#include "fcco/data.hpp"

#include <charconv>
#include <fstream>
#include <map>
#include <sstream>

namespace fcco {

namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

std::vector<std::string_view> split(std::string_view line) {
  std::vector<std::string_view> fields;
  std::size_t start = 0;
  while (true) {
    const std::size_t comma = line.find(',', start);
    fields.push_back(trim(line.substr(start, comma == std::string_view::npos ? line.npos : comma - start)));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return fields;
}

class LineReader {
 public:
  explicit LineReader(const std::string& path) : path_(path), in_(path) {
    if (!in_) throw DataError("cannot open " + path);
  }

  // Next non-blank line; false at end of file.
  bool next(std::string& line) {
    while (std::getline(in_, line)) {
      ++number_;
      if (!trim(line).empty()) return true;
    }
    return false;
  }

  std::size_t number() const noexcept { return number_; }
  const std::string& path() const noexcept { return path_; }

  [[noreturn]] void fail(const std::string& what) const { throw ParseError(path_, number_, what); }

 private:
  std::string path_;
  std::ifstream in_;
  std::size_t number_ = 0;
};

double parse_label(std::string_view field, const LineReader& reader) {
  const double v = parse_double(field, reader.path(), reader.number());
  if (v != 0.0 && v != 1.0) reader.fail("label must be 0 or 1, got '" + std::string(field) + "'");
  return v;
}

long long parse_integer(std::string_view field, const LineReader& reader, const char* what) {
  long long v = 0;
  const auto res = std::from_chars(field.data(), field.data() + field.size(), v);
  if (res.ec != std::errc() || res.ptr != field.data() + field.size()) {
    reader.fail(std::string("invalid ") + what + " '" + std::string(field) + "'");
  }
  return v;
}

Matrix to_matrix(const std::vector<std::vector<double>>& rows, std::size_t d) {
  Matrix m(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(d));
  for (std::size_t r = 0; r < rows.size(); ++r) {
    for (std::size_t c = 0; c < d; ++c) m(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = rows[r][c];
  }
  return m;
}

std::ofstream open_out(const std::string& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw DataError("cannot write " + path);
  return out;
}

void write_row(std::ostream& out, const Eigen::Ref<const Vector>& x) {
  for (Eigen::Index c = 0; c < x.size(); ++c) {
    if (c > 0) out << ',';
    out << format_double(x[c]);
  }
}

std::string feature_header(std::size_t d, const char* prefix) {
  std::string h;
  for (std::size_t c = 0; c < d; ++c) {
    if (c > 0) h += ',';
    h += prefix + std::to_string(c + 1);
  }
  return h;
}

}  // namespace

std::string format_double(double x) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), x);
  return std::string(buf, res.ptr);
}

double parse_double(std::string_view field, const std::string& path, std::size_t line) {
  field = trim(field);
  double v = 0.0;
  const char* begin = field.data();
  if (!field.empty() && field.front() == '+') ++begin;
  const auto res = std::from_chars(begin, field.data() + field.size(), v);
  if (field.empty() || res.ec != std::errc() || res.ptr != field.data() + field.size()) {
    throw ParseError(path, line, "invalid number '" + std::string(field) + "'");
  }
  return v;
}

TpaucDataset load_csv_binary(const std::string& path) {
  LineReader reader(path);
  std::string line;
  if (!reader.next(line)) throw DataError(path + ": empty file");
  const std::size_t columns = split(line).size();
  if (columns < 2) reader.fail("header needs at least one feature and a label");
  const std::size_t d = columns - 1;
  TpaucDataset data;
  while (reader.next(line)) {
    const auto fields = split(line);
    if (fields.size() != columns) {
      throw SchemaError(path + ":" + std::to_string(reader.number()) + ": expected " +
                        std::to_string(columns) + " fields, got " + std::to_string(fields.size()));
    }
    Matrix x(1, static_cast<Eigen::Index>(d));
    for (std::size_t c = 0; c < d; ++c) x(0, static_cast<Eigen::Index>(c)) = parse_double(fields[c], path, reader.number());
    (parse_label(fields[d], reader) == 1.0 ? data.positives : data.negatives).push_back(std::move(x));
  }
  return data;
}

GroupedDataset load_grouped_csv(const std::string& path, LossKind loss) {
  LineReader reader(path);
  std::string line;
  if (!reader.next(line)) throw DataError(path + ": empty file");
  const std::size_t columns = split(line).size();
  if (columns < 3) reader.fail("header needs group, at least one feature and a label");
  const std::size_t d = columns - 2;
  std::map<long long, std::pair<std::vector<std::vector<double>>, std::vector<double>>> groups;
  while (reader.next(line)) {
    const auto fields = split(line);
    if (fields.size() != columns) {
      throw SchemaError(path + ":" + std::to_string(reader.number()) + ": expected " +
                        std::to_string(columns) + " fields, got " + std::to_string(fields.size()));
    }
    auto& [rows, labels] = groups[parse_integer(fields[0], reader, "group id")];
    std::vector<double> x(d);
    for (std::size_t c = 0; c < d; ++c) x[c] = parse_double(fields[c + 1], path, reader.number());
    rows.push_back(std::move(x));
    labels.push_back(parse_label(fields[d + 1], reader));
  }
  GroupedDataset data;
  data.loss = loss;
  for (const auto& [id, group] : groups) {
    data.features.push_back(to_matrix(group.first, d));
    data.labels.push_back(Eigen::Map<const Vector>(group.second.data(), static_cast<Eigen::Index>(group.second.size())));
  }
  return data;
}

TpaucDataset load_mil_bags(const std::string& path) {
  LineReader reader(path);
  std::string line;
  if (!reader.next(line)) throw DataError(path + ": empty file");
  if (split(line).size() != 3) reader.fail("first header must be bag_id,label,n_instances");
  if (!reader.next(line)) reader.fail("missing feature header");
  const std::size_t d = split(line).size();
  TpaucDataset data;
  while (reader.next(line)) {
    const auto record = split(line);
    if (record.size() != 3) {
      throw SchemaError(path + ":" + std::to_string(reader.number()) + ": bag record needs 3 fields");
    }
    parse_integer(record[0], reader, "bag id");
    const double label = parse_label(record[1], reader);
    const long long count = parse_integer(record[2], reader, "instance count");
    if (count < 1) reader.fail("bag must have at least one instance");
    std::vector<std::vector<double>> rows;
    for (long long k = 0; k < count; ++k) {
      if (!reader.next(line)) reader.fail("bag ends before its declared instance count");
      const auto fields = split(line);
      if (fields.size() != d) {
        throw SchemaError(path + ":" + std::to_string(reader.number()) + ": expected " +
                          std::to_string(d) + " features, got " + std::to_string(fields.size()));
      }
      std::vector<double> x(d);
      for (std::size_t c = 0; c < d; ++c) x[c] = parse_double(fields[c], path, reader.number());
      rows.push_back(std::move(x));
    }
    (label == 1.0 ? data.positives : data.negatives).push_back(to_matrix(rows, d));
  }
  return data;
}

void write_csv_binary(const std::string& path, const TpaucDataset& data) {
  std::ofstream out = open_out(path);
  out << feature_header(data.feature_dim(), "f") << ",label\n";
  for (const auto* side : {&data.positives, &data.negatives}) {
    const char* label = side == &data.positives ? "1" : "0";
    for (const Bag& bag : *side) {
      for (Eigen::Index r = 0; r < bag.rows(); ++r) {
        write_row(out, bag.row(r).transpose());
        out << ',' << label << '\n';
      }
    }
  }
}

void write_grouped_csv(const std::string& path, const GroupedDataset& data) {
  std::ofstream out = open_out(path);
  out << "group," << feature_header(data.dim(), "f") << ",label\n";
  for (std::size_t k = 0; k < data.num_groups(); ++k) {
    for (Eigen::Index r = 0; r < data.features[k].rows(); ++r) {
      out << k << ',';
      write_row(out, data.features[k].row(r).transpose());
      out << ',' << (data.labels[k][r] == 1.0 ? "1" : "0") << '\n';
    }
  }
}

void write_mil_bags(const std::string& path, const TpaucDataset& data) {
  std::ofstream out = open_out(path);
  out << "bag_id,label,n_instances\n" << feature_header(data.feature_dim(), "x") << '\n';
  std::size_t id = 0;
  for (const auto* side : {&data.positives, &data.negatives}) {
    const char* label = side == &data.positives ? "1" : "0";
    for (const Bag& bag : *side) {
      out << id++ << ',' << label << ',' << bag.rows() << '\n';
      for (Eigen::Index r = 0; r < bag.rows(); ++r) {
        write_row(out, bag.row(r).transpose());
        out << '\n';
      }
    }
  }
}

}  // namespace fcco
