#pragma once

#include <Eigen/Dense>

#include <charconv>
#include <cstddef>
#include <span>
#include <string>
#include <system_error>

namespace mmdsense {

/// Pairwise (tree) summation with a fixed reduction tree: the result only
/// depends on the input order, never on threading.
inline double pairwise_sum(std::span<const double> values) {
  constexpr std::size_t kLeaf = 256;
  if (values.size() <= kLeaf) {
    // Eight interleaved partial sums, combined in a fixed order.
    double lanes[8] = {0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0};
    const std::size_t full = values.size() - values.size() % 8;
    for (std::size_t i = 0; i < full; i += 8) {
      for (std::size_t l = 0; l < 8; ++l) lanes[l] += values[i + l];
    }
    for (std::size_t i = full; i < values.size(); ++i) lanes[i - full] += values[i];
    return ((lanes[0] + lanes[1]) + (lanes[2] + lanes[3])) + ((lanes[4] + lanes[5]) + (lanes[6] + lanes[7]));
  }
  const std::size_t half = values.size() / 2;
  return pairwise_sum(values.first(half)) + pairwise_sum(values.subspan(half));
}

inline double pairwise_sum(const Eigen::VectorXd& values) {
  return pairwise_sum(std::span<const double>(values.data(), static_cast<std::size_t>(values.size())));
}

/// Column sums of a column-major matrix, each reduced pairwise.
inline Eigen::VectorXd column_sums(const Eigen::MatrixXd& m) {
  Eigen::VectorXd out(m.cols());
  const auto rows = static_cast<std::size_t>(m.rows());
  for (Eigen::Index j = 0; j < m.cols(); ++j) {
    out(j) = pairwise_sum(std::span<const double>(m.col(j).data(), rows));
  }
  return out;
}

/// Row sums, computed on a transposed copy so each reduction is contiguous.
inline Eigen::VectorXd row_sums(const Eigen::MatrixXd& m) {
  const Eigen::MatrixXd t = m.transpose();
  return column_sums(t);
}

/// Shortest round-trip decimal representation.
inline std::string format_double(double value) {
  char buffer[64];
  const auto [end, ec] = std::to_chars(buffer, buffer + sizeof(buffer), value);
  if (ec != std::errc{}) return "nan";
  return std::string(buffer, end);
}

}  // namespace mmdsense
