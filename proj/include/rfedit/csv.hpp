#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "rfedit/common.hpp"

namespace rfedit {

/// Shortest decimal representation that round-trips the exact double. Pinned
/// so reruns produce byte-identical files.
std::string format_double(double v);

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  std::vector<std::string>& add_row() { return rows.emplace_back(); }
  int column(const std::string& name) const;  // -1 when absent
};

void write_csv(const CsvTable& table, const std::filesystem::path& path);
CsvTable read_csv(const std::filesystem::path& path);

/// Cell helpers for assembling rows.
inline std::string cell(double v) { return format_double(v); }
inline std::string cell(int v) { return std::to_string(v); }
inline std::string cell(long v) { return std::to_string(v); }
inline std::string cell(std::uint64_t v) { return std::to_string(v); }
inline std::string cell(std::string v) { return v; }

}  // namespace rfedit
