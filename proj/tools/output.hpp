#pragma once

#include "json.hpp"

#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

namespace hocbf::cli {

/// 17 significant digits, "." decimal point regardless of locale.
std::string format_double(double v);

/// Header-first rectangular CSV; throws std::runtime_error on I/O failure or ragged rows.
class CsvWriter {
 public:
  CsvWriter(const std::filesystem::path& path, const std::vector<std::string>& header);

  void row(const std::vector<double>& values);
  void row(const std::string& label, const std::vector<double>& values);
  void close();

 private:
  std::filesystem::path path_;
  std::ofstream out_;
  std::size_t width_ = 0;
};

std::string sha256_file(const std::filesystem::path& path);

/// Collects emitted files and writes manifest.json with their hashes.
class Manifest {
 public:
  explicit Manifest(std::filesystem::path out_dir) : dir_(std::move(out_dir)) {}

  void add_file(const std::filesystem::path& p) { files_.push_back(p); }
  nlohmann::ordered_json& body() { return body_; }
  /// Writes manifest.json; returns its path.
  std::filesystem::path write();

 private:
  std::filesystem::path dir_;
  std::vector<std::filesystem::path> files_;
  nlohmann::ordered_json body_ = nlohmann::ordered_json::object();
};

}  // namespace hocbf::cli
