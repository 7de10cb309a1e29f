#include "output.hpp"

#include <chrono>
#include <ctime>
#include <fcntl.h>
#include <unistd.h>

#include "fcco/data.hpp"

namespace fcco::cli {

namespace {

void fsync_path(const std::filesystem::path& path) {
  const int fd = ::open(path.c_str(), O_RDONLY);
  if (fd < 0) return;
  ::fsync(fd);
  ::close(fd);
}

}  // namespace

TraceWriter::TraceWriter(const std::filesystem::path& path, bool est_error, bool moreau)
    : est_error_(est_error), moreau_(moreau) {
  file_ = std::fopen(path.c_str(), "w");
  if (!file_) throw Error("cannot write " + path.string());
  std::string header = "iter,objective,step_norm";
  if (est_error_) header += ",est_error";
  if (moreau_) header += ",moreau_grad";
  std::fprintf(file_, "%s\n", header.c_str());
}

TraceWriter::~TraceWriter() {
  if (file_) {
    sync();
    std::fclose(file_);
  }
}

void TraceWriter::append(const TraceRow& row) {
  std::string line = std::to_string(row.iter) + ',' + format_double(row.objective) + ',' +
                     format_double(row.step_norm);
  if (est_error_) line += ',' + (row.est_error ? format_double(*row.est_error) : std::string());
  if (moreau_) line += ',' + (row.moreau_grad ? format_double(*row.moreau_grad) : std::string());
  std::fprintf(file_, "%s\n", line.c_str());
}

void TraceWriter::sync() {
  std::fflush(file_);
  ::fsync(::fileno(file_));
}

void write_file_atomic(const std::filesystem::path& path, const std::string& contents) {
  const std::filesystem::path tmp = path.string() + ".tmp";
  std::FILE* f = std::fopen(tmp.c_str(), "w");
  if (!f) throw Error("cannot write " + tmp.string());
  std::fwrite(contents.data(), 1, contents.size(), f);
  std::fflush(f);
  ::fsync(::fileno(f));
  std::fclose(f);
  std::filesystem::rename(tmp, path);
  fsync_path(path.parent_path().empty() ? std::filesystem::path(".") : path.parent_path());
}

void write_json_atomic(const std::filesystem::path& path, const Json& json) {
  write_file_atomic(path, json.dump(2) + "\n");
}

std::string utc_now() {
  const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  ::gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

Json vector_json(const Vector& v) {
  Json out = Json::array();
  for (Eigen::Index k = 0; k < v.size(); ++k) out.push_back(v[k]);
  return out;
}

}  // namespace fcco::cli
