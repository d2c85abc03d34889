#pragma once

#include <filesystem>
#include <optional>
#include <string>

#include "rfedit/common.hpp"

namespace rfedit {

/// Renders one polyline per group (or a single polyline without a group
/// column) from two numeric CSV columns into a self-contained SVG with axes
/// and labels. Deterministic output: reruns are byte-identical.
void emit_svg(const std::filesystem::path& csv_path, const std::string& x_col,
              const std::string& y_col, const std::optional<std::string>& group_col,
              const std::filesystem::path& out_path);

}  // namespace rfedit
