#include "polarflow/io.hpp"

#include <array>
#include <charconv>
#include <cmath>
#include <fstream>

#include "polarflow/error.hpp"

namespace polarflow::io {

MatrixXd matrix_from_json(const nlohmann::json& j) {
  if (!j.is_array() || j.empty()) {
    throw Error(ErrorCode::InvalidArgument, "matrix must be a non-empty JSON array of rows");
  }
  const auto rows = static_cast<Eigen::Index>(j.size());
  if (!j[0].is_array() || j[0].empty()) {
    throw Error(ErrorCode::InvalidArgument, "matrix rows must be non-empty arrays");
  }
  const auto cols = static_cast<Eigen::Index>(j[0].size());
  MatrixXd m(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r) {
    const auto& row = j[static_cast<std::size_t>(r)];
    if (!row.is_array() || static_cast<Eigen::Index>(row.size()) != cols) {
      throw Error(ErrorCode::InvalidArgument, "matrix row " + std::to_string(r) +
                                                  " has the wrong length");
    }
    for (Eigen::Index c = 0; c < cols; ++c) {
      const auto& v = row[static_cast<std::size_t>(c)];
      if (!v.is_number()) {
        throw Error(ErrorCode::InvalidArgument, "matrix entries must be numbers");
      }
      m(r, c) = v.get<double>();
    }
  }
  return m;
}

nlohmann::json matrix_to_json(const MatrixXd& m) {
  auto out = nlohmann::json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    auto row = nlohmann::json::array();
    for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
    out.push_back(std::move(row));
  }
  return out;
}

nlohmann::json read_json_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::IoError, "cannot open " + path.string());
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw Error(ErrorCode::InvalidArgument, path.string() + ": " + e.what());
  }
}

MatrixXd read_matrix_file(const std::filesystem::path& path) {
  try {
    return matrix_from_json(read_json_file(path));
  } catch (const Error& e) {
    if (e.code() == ErrorCode::IoError) throw;
    throw Error(ErrorCode::InvalidArgument, path.string() + ": " + e.what());
  }
}

void write_text_file(const std::filesystem::path& path, std::string_view contents) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::IoError, "cannot open " + path.string() + " for writing");
  out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
  if (!out) throw Error(ErrorCode::IoError, "failed writing " + path.string());
}

std::string format_double(double value) {
  if (!std::isfinite(value)) return "NaN";
  std::array<char, 64> buf{};
  const auto [end, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), value);
  if (ec != std::errc{}) return "NaN";
  return std::string(buf.data(), end);
}

}  // namespace polarflow::io
