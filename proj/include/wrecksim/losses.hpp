#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <vector>

#include <nlohmann/json.hpp>

#include "wrecksim/deformation.hpp"
#include "wrecksim/grid.hpp"

namespace wrecksim {

/// W x H x K per-pixel distribution (or one-hot target), channel-last.
struct ClassMap {
  std::size_t width = 0;
  std::size_t height = 0;
  std::size_t classes = 0;
  std::vector<double> data;

  std::span<const double> at(std::size_t u, std::size_t v) const {
    return {data.data() + (v * width + u) * classes, classes};
  }
  std::span<double> at(std::size_t u, std::size_t v) {
    return {data.data() + (v * width + u) * classes, classes};
  }
};

/// Splits a one-hot deformation tensor into its magnitude and angle blocks
/// (the L_mag and L_ang targets).
ClassMap magnitude_block(const OneHotField& onehot);
ClassMap angle_block(const OneHotField& onehot);

inline constexpr double kProbabilityFloor = 1e-12;

/// Pairwise (cascade) summation; fixed order independent of threading.
double pairwise_sum(std::span<const double> values);

/// Sum over levels of squared L2 prototype differences.
double prototype_mse(std::span<const std::vector<double>> student,
                     std::span<const std::vector<double>> teacher);

/// Mean over included pixels of -log(max(p_target, 1e-12)). `pixel_mask`
/// restricts the mean to nonzero pixels (ship-only supervision).
double cross_entropy_onehot(const ClassMap& prediction, const ClassMap& target,
                            const Grid<std::uint8_t>* pixel_mask = nullptr);

/// Mean per-pixel binary cross entropy with p clamped to [1e-12, 1 - 1e-12].
double binary_cross_entropy(const Grid<double>& prediction, const Grid<std::uint8_t>& target);

struct LossBreakdown {
  double magnitude = 0;  // L_mag
  double angle = 0;      // L_ang
  double prototype = 0;  // L_p
  double segmentation = 0;  // L_seg
  double total = 0;
};

/// Unit-weight sum. Throws DataError on negative or non-finite components.
LossBreakdown total_loss(double magnitude, double angle, double prototype, double segmentation);

void to_json(nlohmann::json& j, const LossBreakdown& b);

}  // namespace wrecksim
