#pragma once

#include <cstdio>
#include <filesystem>
#include <string>

#include "config_json.hpp"
#include "fcco/trace.hpp"

namespace fcco::cli {

// Append-only trace CSV: iter,objective,step_norm[,est_error][,moreau_grad].
class TraceWriter {
 public:
  TraceWriter(const std::filesystem::path& path, bool est_error, bool moreau);
  ~TraceWriter();
  TraceWriter(const TraceWriter&) = delete;
  TraceWriter& operator=(const TraceWriter&) = delete;

  void append(const TraceRow& row);
  // Flush and fsync.
  void sync();

 private:
  std::FILE* file_ = nullptr;
  bool est_error_;
  bool moreau_;
};

// Writes to a temporary sibling, fsyncs, then renames over the target.
void write_file_atomic(const std::filesystem::path& path, const std::string& contents);
void write_json_atomic(const std::filesystem::path& path, const Json& json);

std::string utc_now();
Json vector_json(const Vector& v);

}  // namespace fcco::cli
