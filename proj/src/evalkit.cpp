#include "wrecksim/evalkit.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "wrecksim/image_io.hpp"
#include "wrecksim/parallel.hpp"

namespace wrecksim {

ConfusionCounts confusion(const LabelMask& pred, const LabelMask& gt) {
  require_same_shape(pred, gt, "confusion");
  ConfusionCounts c;
  const auto& p = pred.data();
  const auto& g = gt.data();
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (p[i] > 1 || g[i] > 1) throw DataError("confusion: masks must be binary");
    // Index 2*pred + gt: 0 tn, 1 fn, 2 fp, 3 tp.
    switch (2 * p[i] + g[i]) {
      case 0: ++c.tn; break;
      case 1: ++c.fn; break;
      case 2: ++c.fp; break;
      default: ++c.tp; break;
    }
  }
  return c;
}

namespace {

double ratio_or_one(std::uint64_t num, std::uint64_t den) {
  return den == 0 ? 1.0 : static_cast<double>(num) / static_cast<double>(den);
}

}  // namespace

SegmentationMetrics metrics(const ConfusionCounts& c) {
  SegmentationMetrics m;
  m.iou_ship = ratio_or_one(c.tp, c.tp + c.fp + c.fn);
  m.iou_terrain = ratio_or_one(c.tn, c.tn + c.fp + c.fn);
  m.miou = 0.5 * (m.iou_ship + m.iou_terrain);
  m.f1 = ratio_or_one(2 * c.tp, 2 * c.tp + c.fp + c.fn);
  return m;
}

EvalReport aggregate_by_site(const std::vector<SiteCounts>& per_image) {
  std::map<std::string, ConfusionCounts> pooled;
  for (const auto& img : per_image) {
    if (img.site.empty()) throw DataError("image without a site id");
    pooled[img.site] += img.counts;
  }
  EvalReport r;
  for (const auto& [site, counts] : pooled) r.sites.emplace_back(site, metrics(counts));
  if (!r.sites.empty()) {
    const double n = static_cast<double>(r.sites.size());
    for (const auto& [site, m] : r.sites) {
      r.macro.iou_ship += m.iou_ship / n;
      r.macro.iou_terrain += m.iou_terrain / n;
      r.macro.f1 += m.f1 / n;
    }
    r.macro.miou = 0.5 * (r.macro.iou_ship + r.macro.iou_terrain);
  }
  return r;
}

namespace {

std::string fmt(double x, bool full) {
  char buf[40];
  std::snprintf(buf, sizeof buf, full ? "%.17g" : "%.2f", x);
  return buf;
}

}  // namespace

std::string emit_report(const EvalReport& report, ReportFormat format) {
  std::ostringstream out;
  const bool csv = format == ReportFormat::kCsv;
  auto row = [&](const std::string& name, const SegmentationMetrics& m) {
    if (csv) {
      out << name << ',' << fmt(m.iou_ship, true) << ',' << fmt(m.iou_terrain, true) << ','
          << fmt(m.miou, true) << ',' << fmt(m.f1, true) << '\n';
    } else {
      out << "| " << name << " | " << fmt(m.iou_ship, false) << " | " << fmt(m.iou_terrain, false) << " | "
          << fmt(m.miou, false) << " | " << fmt(m.f1, false) << " |\n";
    }
  };
  if (csv) {
    out << "site,IOU_ship,IOU_terr,mIOU,F1\n";
  } else {
    out << "| Site | IOU_ship | IOU_terr | mIOU | F1 |\n";
    out << "|---|---|---|---|---|\n";
  }
  for (const auto& [site, m] : report.sites) row(site, m);
  if (report.sites.empty()) {
    out << (csv ? "macro,n/a,n/a,n/a,n/a\n" : "| macro | n/a | n/a | n/a | n/a |\n");
  } else {
    row("macro", report.macro);
  }
  return out.str();
}

EvalReport parse_csv_report(const std::string& csv) {
  std::istringstream in(csv);
  std::string line;
  if (!std::getline(in, line) || line != "site,IOU_ship,IOU_terr,mIOU,F1") {
    throw DataError("report CSV: unexpected header");
  }
  EvalReport r;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<std::string> cells;
    std::stringstream ss(line);
    for (std::string cell; std::getline(ss, cell, ',');) cells.push_back(cell);
    if (cells.size() != 5) throw DataError("report CSV: expected 5 columns");
    if (cells[1] == "n/a") continue;
    SegmentationMetrics m{std::stod(cells[1]), std::stod(cells[2]), std::stod(cells[3]), std::stod(cells[4])};
    if (cells[0] == "macro") {
      r.macro = m;
    } else {
      r.sites.emplace_back(cells[0], m);
    }
  }
  return r;
}

EvalReport evaluate_directories(const std::filesystem::path& pred_dir, const std::filesystem::path& gt_dir,
                                const std::filesystem::path& manifest, unsigned workers) {
  std::ifstream in(manifest);
  if (!in) throw DataError("cannot open manifest " + manifest.string());
  std::vector<SiteCounts> records;
  std::vector<std::string> ids;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    nlohmann::json rec;
    try {
      rec = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      throw DataError("manifest line " + std::to_string(line_no) + ": " + e.what());
    }
    if (!rec.contains("id")) throw DataError("manifest line " + std::to_string(line_no) + ": missing id");
    const std::string site = rec.value("site", std::string{});
    if (site.empty()) throw DataError("manifest line " + std::to_string(line_no) + ": missing site id");
    ids.push_back(rec.at("id").get<std::string>());
    records.push_back({site, {}});
  }
  parallel_for(ids.size(), workers, [&](std::size_t i) {
    const LabelMask pred = read_mask_png(pred_dir / (ids[i] + ".png"));
    const LabelMask gt = read_mask_png(gt_dir / (ids[i] + ".png"));
    records[i].counts = confusion(pred, gt);
  });
  return aggregate_by_site(records);
}

}  // namespace wrecksim
