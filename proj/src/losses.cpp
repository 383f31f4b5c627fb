#include "wrecksim/losses.hpp"

#include <algorithm>
#include <cmath>

namespace wrecksim {
namespace {

ClassMap block(const OneHotField& onehot, int first, int count) {
  ClassMap out{onehot.width, onehot.height, static_cast<std::size_t>(count), {}};
  out.data.resize(out.width * out.height * out.classes);
  for (std::size_t v = 0; v < out.height; ++v) {
    for (std::size_t u = 0; u < out.width; ++u) {
      auto dst = out.at(u, v);
      for (int c = 0; c < count; ++c) dst[static_cast<std::size_t>(c)] = onehot.at(u, v, first + c);
    }
  }
  return out;
}

void require_same_layout(const ClassMap& a, const ClassMap& b) {
  if (a.width != b.width || a.height != b.height || a.classes != b.classes) {
    throw DataError("cross entropy: prediction/target shape mismatch");
  }
  if (a.data.size() != a.width * a.height * a.classes || b.data.size() != a.data.size()) {
    throw DataError("cross entropy: tensor size does not match its shape");
  }
}

}  // namespace

ClassMap magnitude_block(const OneHotField& onehot) { return block(onehot, 0, onehot.magnitude_bins); }
ClassMap angle_block(const OneHotField& onehot) {
  return block(onehot, onehot.magnitude_bins, onehot.angle_bins);
}

double pairwise_sum(std::span<const double> values) {
  if (values.size() <= 8) {
    double s = 0;
    for (double v : values) s += v;
    return s;
  }
  const std::size_t half = values.size() / 2;
  return pairwise_sum(values.first(half)) + pairwise_sum(values.subspan(half));
}

double prototype_mse(std::span<const std::vector<double>> student,
                     std::span<const std::vector<double>> teacher) {
  if (student.size() != teacher.size()) throw DataError("prototype loss: level count mismatch");
  std::vector<double> terms;
  for (std::size_t l = 0; l < student.size(); ++l) {
    if (student[l].size() != teacher[l].size()) throw DataError("prototype loss: channel mismatch");
    for (std::size_t c = 0; c < student[l].size(); ++c) {
      const double d = student[l][c] - teacher[l][c];
      terms.push_back(d * d);
    }
  }
  return pairwise_sum(terms);
}

double cross_entropy_onehot(const ClassMap& prediction, const ClassMap& target,
                            const Grid<std::uint8_t>* pixel_mask) {
  require_same_layout(prediction, target);
  if (pixel_mask && !pixel_mask->same_shape(prediction.width, prediction.height)) {
    throw DataError("cross entropy: pixel mask shape mismatch");
  }
  std::vector<double> terms;
  terms.reserve(prediction.width * prediction.height);
  for (std::size_t v = 0; v < prediction.height; ++v) {
    for (std::size_t u = 0; u < prediction.width; ++u) {
      const auto p = prediction.at(u, v);
      const auto t = target.at(u, v);
      double sum = 0;
      for (double x : p) {
        if (!(x >= 0)) throw DataError("cross entropy: negative or NaN probability");
        sum += x;
      }
      if (std::abs(sum - 1.0) > 1e-6) throw DataError("cross entropy: prediction is not a distribution");
      std::size_t hot = t.size(), ones = 0;
      for (std::size_t c = 0; c < t.size(); ++c) {
        if (t[c] == 1.0) {
          hot = c;
          ++ones;
        } else if (t[c] != 0.0) {
          throw DataError("cross entropy: target is not one-hot");
        }
      }
      if (ones != 1) throw DataError("cross entropy: target is not one-hot");
      if (pixel_mask && !pixel_mask->at(u, v)) continue;
      terms.push_back(-std::log(std::max(p[hot], kProbabilityFloor)));
    }
  }
  if (terms.empty()) return 0.0;
  return pairwise_sum(terms) / static_cast<double>(terms.size());
}

double binary_cross_entropy(const Grid<double>& prediction, const Grid<std::uint8_t>& target) {
  require_same_shape(prediction, target, "binary cross entropy");
  if (prediction.empty()) return 0.0;
  std::vector<double> terms(prediction.size());
  for (std::size_t i = 0; i < prediction.size(); ++i) {
    const double raw = prediction[i];
    if (!(raw >= 0 && raw <= 1)) throw DataError("binary cross entropy: prediction outside [0, 1]");
    const double p = std::clamp(raw, kProbabilityFloor, 1.0 - kProbabilityFloor);
    terms[i] = target[i] ? -std::log(p) : -std::log1p(-p);
  }
  return pairwise_sum(terms) / static_cast<double>(terms.size());
}

LossBreakdown total_loss(double magnitude, double angle, double prototype, double segmentation) {
  for (double x : {magnitude, angle, prototype, segmentation}) {
    if (!std::isfinite(x) || x < 0) throw DataError("loss components must be finite and non-negative");
  }
  return {magnitude, angle, prototype, segmentation, magnitude + angle + prototype + segmentation};
}

void to_json(nlohmann::json& j, const LossBreakdown& b) {
  j = nlohmann::json{{"L_mag", b.magnitude},
                     {"L_ang", b.angle},
                     {"L_p", b.prototype},
                     {"L_seg", b.segmentation},
                     {"L_total", b.total}};
}

}  // namespace wrecksim
