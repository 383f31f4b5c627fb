#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "wrecksim/grid.hpp"

namespace wrecksim {

/// Pixel counts with shipwreck as the positive class.
struct ConfusionCounts {
  std::uint64_t tp = 0, fp = 0, fn = 0, tn = 0;

  std::uint64_t total() const { return tp + fp + fn + tn; }
  ConfusionCounts& operator+=(const ConfusionCounts& o) {
    tp += o.tp;
    fp += o.fp;
    fn += o.fn;
    tn += o.tn;
    return *this;
  }
  friend bool operator==(const ConfusionCounts&, const ConfusionCounts&) = default;
};

ConfusionCounts confusion(const LabelMask& pred, const LabelMask& gt);

/// IOU_ship = tp/(tp+fp+fn), IOU_terr = tn/(tn+fp+fn), F1 = 2tp/(2tp+fp+fn).
/// A class absent from both prediction and ground truth scores 1.0.
struct SegmentationMetrics {
  double iou_ship = 0;
  double iou_terrain = 0;
  double miou = 0;
  double f1 = 0;
};

SegmentationMetrics metrics(const ConfusionCounts& counts);

struct SiteCounts {
  std::string site;
  ConfusionCounts counts;
};

struct EvalReport {
  /// Sorted by site id.
  std::vector<std::pair<std::string, SegmentationMetrics>> sites;
  SegmentationMetrics macro;  // unweighted mean over sites
  std::size_t site_count() const { return sites.size(); }
};

/// Pools counts within each site, computes metrics per site, then averages
/// sites with equal weight. Throws DataError for an empty site id.
EvalReport aggregate_by_site(const std::vector<SiteCounts>& per_image);

enum class ReportFormat { kCsv, kMarkdown };

/// Columns site, IOU_ship, IOU_terr, mIOU, F1; one row per site then a
/// "macro" row. Markdown rounds to two decimals, CSV keeps full precision.
std::string emit_report(const EvalReport& report, ReportFormat format);

/// Parses emit_report's CSV back into a report.
EvalReport parse_csv_report(const std::string& csv);

/// Evaluates `<id>.png` masks from pred_dir against gt_dir, using a
/// JSON-lines manifest whose records carry "id" and "site".
EvalReport evaluate_directories(const std::filesystem::path& pred_dir, const std::filesystem::path& gt_dir,
                                const std::filesystem::path& manifest, unsigned workers = 0);

}  // namespace wrecksim
