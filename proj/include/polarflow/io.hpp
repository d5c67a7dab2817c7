#pragma once

#include <filesystem>
#include <string>
#include <string_view>

#include <json.hpp>

#include "polarflow/matcore.hpp"

namespace polarflow::io {

/// Matrices on disk are JSON arrays of rows, e.g. [[0,-2],[1,0]].
MatrixXd matrix_from_json(const nlohmann::json& j);
nlohmann::json matrix_to_json(const MatrixXd& m);

MatrixXd read_matrix_file(const std::filesystem::path& path);
nlohmann::json read_json_file(const std::filesystem::path& path);
void write_text_file(const std::filesystem::path& path, std::string_view contents);

/// Shortest round-trip decimal form; non-finite values print as NaN.
std::string format_double(double value);

}  // namespace polarflow::io
