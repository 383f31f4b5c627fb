#include "wrecksim/cli.hpp"

#include <algorithm>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <optional>
#include <ostream>

#include <CLI11.hpp>

#include "wrecksim/anomaly.hpp"
#include "wrecksim/compositor.hpp"
#include "wrecksim/deformation.hpp"
#include "wrecksim/evalkit.hpp"
#include "wrecksim/image_io.hpp"
#include "wrecksim/pipeline.hpp"

namespace wrecksim {
namespace {

namespace fs = std::filesystem;

struct Shared {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out;
  unsigned workers = 0;
};

void add_shared(CLI::App* cmd, Shared& s, bool config_required) {
  auto* c = cmd->add_option("--config", s.config, "Pipeline config (JSON)");
  if (config_required) c->required();
  cmd->add_option("--seed", s.seed, "Master seed (overrides the config)");
  cmd->add_option("--out", s.out, "Output directory (default: $WRECKSIM_OUT_DIR)");
  cmd->add_option("--workers", s.workers, "Worker threads, 0 = all cores");
}

fs::path out_dir(const Shared& s) {
  if (!s.out.empty()) return s.out;
  if (const char* env = std::getenv("WRECKSIM_OUT_DIR"); env && *env) return env;
  throw DataError("no output directory: pass --out or set WRECKSIM_OUT_DIR");
}

PipelineConfig pipeline_config(const Shared& s) {
  PipelineConfig c = load_pipeline_config(s.config);
  if (s.seed) c.master_seed = *s.seed;
  c.workers = s.workers;
  return c;
}

std::vector<fs::path> png_inputs(const fs::path& p) {
  if (!fs::is_directory(p)) return {p};
  std::vector<fs::path> files;
  for (const auto& e : fs::directory_iterator(p)) {
    if (e.is_regular_file() && e.path().extension() == ".png") files.push_back(e.path());
  }
  std::sort(files.begin(), files.end());
  if (files.empty()) throw DataError("no PNG files in " + p.string());
  return files;
}

ShadowMask read_shadow(const std::string& path, std::size_t w, std::size_t h) {
  ShadowMask shadow(w, h);
  if (path.empty()) return shadow;
  const LabelMask m = read_mask_png(path);
  require_same_shape(m, shadow, "shadow mask");
  std::copy(m.data().begin(), m.data().end(), shadow.data().begin());
  return shadow;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Synthetic side scan sonar shipwreck datasets and zero-shot segmentation tools", "wrecksim"};
  app.require_subcommand(1);

  Shared shared;

  // render
  std::size_t render_index = 0;
  auto* render = app.add_subcommand("render", "Render one randomized scene: image, ship mask, shadow mask");
  add_shared(render, shared, true);
  render->add_option("--index", render_index, "Sample index the scene is seeded from");

  // fracture
  std::string fr_image, fr_mask, fr_shadow;
  auto* fracture = app.add_subcommand("fracture", "Fracture a rendered ship with a random quadrant field");
  add_shared(fracture, shared, false);
  fracture->add_option("--image", fr_image, "Rendered sonar image")->required();
  fracture->add_option("--mask", fr_mask, "Ship mask")->required();
  fracture->add_option("--shadow", fr_shadow, "Shadow mask");

  // composite
  std::string cp_image, cp_mask, cp_shadow, cp_terrain;
  CompositeOptions cp_opts;
  auto* comp = app.add_subcommand("composite", "Paste a fractured ship and its shadow onto terrain");
  add_shared(comp, shared, false);
  comp->add_option("--image", cp_image, "Fractured ship image")->required();
  comp->add_option("--mask", cp_mask, "Fractured ship mask")->required();
  comp->add_option("--shadow", cp_shadow, "Shadow mask");
  comp->add_option("--terrain", cp_terrain, "Terrain scan (cropped at a seeded offset if larger)")->required();
  comp->add_option("--shadow-gain", cp_opts.shadow_gain, "Terrain attenuation inside the shadow");
  comp->add_flag("--feather", cp_opts.feather, "Blend the ship boundary");
  comp->add_flag("--histogram-match", cp_opts.histogram_match, "Match ship intensities to the terrain");

  // generate
  std::optional<std::size_t> gen_samples;
  auto* generate = app.add_subcommand("generate", "Generate a dataset with a JSON-lines manifest");
  add_shared(generate, shared, true);
  generate->add_option("--samples", gen_samples, "Override the sample count");

  // anomaly / segment
  std::string an_image;
  AnomalyConfig an_cfg;
  std::optional<double> tau;
  std::size_t min_blob = 16;
  auto add_anomaly_opts = [&](CLI::App* cmd) {
    cmd->add_option("--image", an_image, "Input PNG or a directory of PNGs")->required();
    cmd->add_option("--levels", an_cfg.pyramid.levels, "Pyramid levels");
    cmd->add_option("--channels", an_cfg.pyramid.channels, "Feature channels (1-7)");
    cmd->add_option("--trim", an_cfg.trim_fraction, "Trimmed-mean fraction for the prototype");
  };
  auto* anomaly = app.add_subcommand("anomaly", "Write the anomaly volume of a scan");
  add_shared(anomaly, shared, false);
  add_anomaly_opts(anomaly);
  auto* segment = app.add_subcommand("segment", "Zero-shot ship mask from the anomaly volume");
  add_shared(segment, shared, false);
  add_anomaly_opts(segment);
  segment->add_option("--tau", tau, "Threshold on the mean anomaly score (default: Otsu)");
  segment->add_option("--min-blob", min_blob, "Drop 8-connected components smaller than this");

  // eval
  std::string ev_pred, ev_gt, ev_manifest, ev_format = "markdown";
  auto* eval = app.add_subcommand("eval", "Per-site IOU/F1 report");
  add_shared(eval, shared, false);
  eval->add_option("--pred", ev_pred, "Predicted masks directory")->required();
  eval->add_option("--gt", ev_gt, "Ground-truth masks directory")->required();
  eval->add_option("--manifest", ev_manifest, "JSON-lines manifest with id and site")->required();
  eval->add_option("--format", ev_format, "csv or markdown")
      ->check(CLI::IsMember({"csv", "markdown"}));

  // tile
  std::string tl_image;
  std::size_t tl_size = kScanTileSize, tl_stride = kScanTileStride;
  auto* tile = app.add_subcommand("tile", "Cut a raw scan into square sliding-window tiles");
  add_shared(tile, shared, false);
  tile->add_option("--image", tl_image, "Raw scan PNG")->required();
  tile->add_option("--tile", tl_size, "Tile size");
  tile->add_option("--stride", tl_stride, "Row stride");

  std::vector<std::string> rev(args.size() > 1 ? args.begin() + 1 : args.end(), args.end());
  std::reverse(rev.begin(), rev.end());
  try {
    app.parse(rev);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n\n" << app.help();
    return kExitUsage;
  }

  try {
    if (*render) {
      const PipelineConfig cfg = pipeline_config(shared);
      const fs::path dir = out_dir(shared);
      PipelineAssets assets;
      assets.meshes = load_mesh_directory(cfg.mesh_dir);
      PipelineConfig no_terrain = cfg;
      no_terrain.real_terrain = false;
      const GeneratedSample s = generate_sample(no_terrain, assets, render_index);
      write_png(dir / "image.png", s.rendered);
      write_mask_png(dir / "mask.png", s.render_mask);
      write_mask_png(dir / "shadow.png", s.render_shadow);
      std::ofstream(dir / "scene.json") << nlohmann::json{{"placement", s.placement},
                                                          {"sample_seed", s.sample.provenance.sample_seed},
                                                          {"sonar", cfg.sonar},
                                                          {"seabed", cfg.seabed}}
                                               .dump(2)
                                        << '\n';
    } else if (*fracture) {
      const fs::path dir = out_dir(shared);
      const GrayImage image = read_png(fr_image);
      const LabelMask mask = read_mask_png(fr_mask);
      require_same_shape(image, mask, "fracture");
      const ShadowMask shadow = read_shadow(fr_shadow, image.width(), image.height());
      DeformParams params;
      std::uint64_t seed = 0;
      if (!shared.config.empty()) {
        const PipelineConfig cfg = pipeline_config(shared);
        params = cfg.deform;
        seed = cfg.master_seed;
      } else {
        params.max_displacement = default_max_displacement(image.width(), image.height());
      }
      if (shared.seed) seed = *shared.seed;
      Rng rng(derive_seed(seed, "field"));
      const DeformationField field = generate_quadrant_field(mask, params, rng);
      const FracturedScan f = apply_field(image, mask, shadow, field);
      write_png(dir / "fractured.png", f.image);
      write_mask_png(dir / "mask.png", f.mask);
      write_mask_png(dir / "shadow.png", f.shadow);
      write_deff(dir / "field.deff", field);
    } else if (*comp) {
      const fs::path dir = out_dir(shared);
      const GrayImage image = read_png(cp_image);
      const LabelMask mask = read_mask_png(cp_mask);
      require_same_shape(image, mask, "composite");
      const ShadowMask shadow = read_shadow(cp_shadow, image.width(), image.height());
      const fs::path tp = cp_terrain;
      TerrainLibrary lib({{read_png(tp), tp.filename().string(), "cli"}}, image.width(), image.height());
      Rng rng(derive_seed(shared.seed.value_or(0), "terrain"));
      write_png(dir / "composite.png", composite(image, mask, shadow, lib.sample(rng), cp_opts));
    } else if (*generate) {
      PipelineConfig cfg = pipeline_config(shared);
      if (!shared.out.empty() || std::getenv("WRECKSIM_OUT_DIR") || cfg.output_dir.empty()) {
        cfg.output_dir = out_dir(shared);
      }
      if (gen_samples) cfg.num_samples = *gen_samples;
      cfg.validate();
      const auto manifest = generate_dataset(cfg);
      const auto n_train = std::count_if(manifest.begin(), manifest.end(),
                                         [](const ManifestRecord& r) { return r.split == "train"; });
      out << manifest.size() << " samples (" << n_train << " train, " << manifest.size() - n_train
          << " val) written to " << cfg.output_dir.string() << '\n';
    } else if (*anomaly || *segment) {
      const fs::path dir = out_dir(shared);
      for (const auto& path : png_inputs(an_image)) {
        const AnomalyVolume vol = anomaly_volume(read_png(path), an_cfg);
        const double t = tau.value_or(otsu_threshold(vol.mean_score()));
        if (*anomaly) {
          const fs::path sub = fs::is_directory(an_image) ? dir / path.stem() : dir;
          write_anomaly_volume(sub, vol, an_cfg, t);
        } else {
          write_mask_png(dir / (path.stem().string() + ".png"), segment_from_anomaly(vol, t, min_blob));
        }
      }
    } else if (*eval) {
      const EvalReport report = evaluate_directories(ev_pred, ev_gt, ev_manifest, shared.workers);
      const std::string text = emit_report(report, ev_format == "csv" ? ReportFormat::kCsv : ReportFormat::kMarkdown);
      out << text;
      if (!shared.out.empty()) {
        const fs::path dir = shared.out;
        fs::create_directories(dir);
        std::ofstream(dir / (ev_format == "csv" ? "report.csv" : "report.md")) << text;
      }
    } else if (*tile) {
      const fs::path dir = out_dir(shared);
      const fs::path src = tl_image;
      const auto tiles = tile_scan(read_png(src), tl_size, tl_stride);
      for (std::size_t i = 0; i < tiles.size(); ++i) {
        char name[32];
        std::snprintf(name, sizeof name, "_tile_%04zu.png", i);
        write_png(dir / (src.stem().string() + name), tiles[i]);
      }
      out << tiles.size() << " tiles\n";
    }
  } catch (const DataError& e) {
    err << "error: " << e.what() << '\n';
    return kExitData;
  } catch (const fs::filesystem_error& e) {
    err << "error: " << e.what() << '\n';
    return kExitData;
  } catch (const nlohmann::json::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitData;
  }
  return kExitOk;
}

}  // namespace wrecksim
