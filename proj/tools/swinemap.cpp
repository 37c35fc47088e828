// Command line front end. Every option can also be set in a TOML/INI config
// file passed with --config; flags on the command line win.

#include <csignal>
#include <cstdio>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "swinemap/error.hpp"
#include "swinemap/pipeline.hpp"
#include "swinemap/review.hpp"
#include "swinemap/synth.hpp"
#include "swinemap/textio.hpp"

using namespace swinemap;

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitStage = 3;

struct Options {
  std::vector<std::string> probability;
  std::string landcover, landcover_legend, roads, buildings, regions, default_state = "all";
  std::string reference_barns, reference_farms, reference_counts, truth_mask, labels, rules, model_dir, out_dir;
  double threshold = 0.7;
  std::vector<double> buffer_radii = kDefaultBufferRadii;
  double block_size = 25000;
  int folds = 5;
  double link_distance = 500;
  std::optional<double> size_min, size_max;
  double size_q_lo = 0.1, size_q_hi = 0.9;
  HyperGrid grid;
  std::vector<std::string> grid_max_features{"sqrt", "log2"};
  double tile_size = 512;
  std::optional<std::uint64_t> seed;

  std::string spec, scene_dir;
  std::string host = "127.0.0.1";
  int port = 8080;

  PipelineConfig pipeline() const {
    PipelineConfig c;
    for (const auto& p : probability) c.probability.emplace_back(p);
    c.landcover = landcover;
    c.landcover_legend = landcover_legend;
    c.roads = roads;
    c.buildings = buildings;
    c.regions = regions;
    c.default_state = default_state;
    c.reference_barns = reference_barns;
    c.reference_farms = reference_farms;
    c.reference_counts = reference_counts;
    c.truth_mask = truth_mask;
    c.labels = labels;
    c.rules = rules;
    c.model_dir = model_dir;
    c.out_dir = out_dir;
    c.threshold = threshold;
    c.buffer_radii = buffer_radii;
    c.block_size = block_size;
    c.folds = folds;
    c.link_distance = link_distance;
    c.size_min = size_min;
    c.size_max = size_max;
    c.size_q_lo = size_q_lo;
    c.size_q_hi = size_q_hi;
    c.grid = grid;
    c.grid.max_features.clear();
    for (const auto& m : grid_max_features) c.grid.max_features.push_back(parse_max_features(m));
    c.tile_size = tile_size;
    c.seed = seed;
    return c;
  }
};

void add_pipeline_options(CLI::App& app, Options& o) {
  app.add_option("--probability", o.probability, "Probability rasters (BGRD)")->group("Inputs");
  app.add_option("--landcover", o.landcover, "Land-cover category raster (BGRD)")->group("Inputs");
  app.add_option("--landcover_legend", o.landcover_legend, "Land-cover legend CSV (code,name)")->group("Inputs");
  app.add_option("--roads", o.roads, "Road LineStrings (GeoJSON, 'tag' property)")->group("Inputs");
  app.add_option("--buildings", o.buildings, "Building footprints (GeoJSON, 'tag' property)")->group("Inputs");
  app.add_option("--regions", o.regions, "State polygons (GeoJSON, 'state' property)")->group("Inputs");
  app.add_option("--default_state", o.default_state, "State for candidates outside every region")->group("Inputs");
  app.add_option("--reference_barns", o.reference_barns, "Reference barns (GeoJSON, 'id' and 'farm_id')")->group("Inputs");
  app.add_option("--reference_farms", o.reference_farms, "Reference farms CSV (farm_id,raw_label,capacity)")->group("Inputs");
  app.add_option("--reference_counts", o.reference_counts, "Reference counts CSV (state,farms,population)")->group("Inputs");
  app.add_option("--truth_mask", o.truth_mask, "Truth mask raster for pixel metrics")->group("Inputs");
  app.add_option("--labels", o.labels, "Label log (JSON lines)")->group("Inputs");
  app.add_option("--rules", o.rules, "Tag filter rules file")->group("Inputs");
  app.add_option("--model_dir", o.model_dir, "Model directory")->group("Outputs");
  app.add_option("--out_dir", o.out_dir, "Run output directory")->group("Outputs");
  app.add_option("--threshold", o.threshold, "Probability threshold")->capture_default_str();
  app.add_option("--buffer_radii", o.buffer_radii, "Land-cover buffer radii (m)")->capture_default_str();
  app.add_option("--block_size", o.block_size, "Spatial block size (m)")->capture_default_str();
  app.add_option("--folds", o.folds, "Spatial folds")->capture_default_str();
  app.add_option("--link_distance", o.link_distance, "Farm link distance (m)")->capture_default_str();
  app.add_option("--size_min", o.size_min, "Minimum barn area (m2); overrides the lower quantile");
  app.add_option("--size_max", o.size_max, "Maximum barn area (m2); overrides the upper quantile");
  app.add_option("--size_q_lo", o.size_q_lo, "Lower reference-area quantile")->capture_default_str();
  app.add_option("--size_q_hi", o.size_q_hi, "Upper reference-area quantile")->capture_default_str();
  app.add_option("--grid_n_trees", o.grid.n_trees, "Grid: number of trees")->group("Grid")->capture_default_str();
  app.add_option("--grid_max_depth", o.grid.max_depth, "Grid: max depth (0 = unlimited)")->group("Grid")->capture_default_str();
  app.add_option("--grid_min_split", o.grid.min_split, "Grid: min samples to split")->group("Grid")->capture_default_str();
  app.add_option("--grid_min_leaf", o.grid.min_leaf, "Grid: min samples per leaf")->group("Grid")->capture_default_str();
  app.add_option("--grid_max_features", o.grid_max_features, "Grid: sqrt, log2 or all")->group("Grid")->capture_default_str();
  app.add_option("--tile_size", o.tile_size, "Threshold sweep tile size (m)")->capture_default_str();
  app.add_option("--seed", o.seed, "Random seed (required)");
}

void print_train(const char* what, const TrainReport& r) {
  std::printf("%s: %zu rows", what, r.rows);
  if (!r.class_counts.empty()) {
    std::printf(", class counts");
    for (auto c : r.class_counts) std::printf(" %zu", c);
  }
  std::size_t used = 0;
  for (const auto& f : r.cv.folds) used += !f.skipped;
  std::printf("\nfolds used: %zu of %zu\n", used, r.cv.folds.size());
  for (const auto& f : r.cv.folds)
    if (f.skipped) std::printf("  fold %d skipped: %s\n", f.fold, f.skip_reason.c_str());
  std::printf("best config: %s\n", r.final_params.describe().c_str());
}

ReviewServer* g_server = nullptr;

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Swine barn and farm mapping from segmentation probability rasters"};
  app.set_config("--config", "", "TOML/INI config file; keys are option names");
  app.require_subcommand(1);
  Options o;
  add_pipeline_options(app, o);

  auto* synth = app.add_subcommand("synth", "Generate a synthetic scene");
  synth->add_option("--spec", o.spec, "Scene spec JSON (defaults when omitted)");
  synth->add_option("--scene_dir", o.scene_dir, "Directory to write the scene into")->required();
  auto* candidates = app.add_subcommand("candidates", "Extract candidates and features for review");
  auto* run = app.add_subcommand("run", "Detect barns, group farms, classify and estimate populations");
  auto* train_filter = app.add_subcommand("train-filter", "Train the spatial-fold barn filter models");
  auto* train_type = app.add_subcommand("train-type", "Train the production-type classifier");
  auto* train_pop = app.add_subcommand("train-pop", "Train the population regressor");
  auto* eval = app.add_subcommand("eval", "Score a finished run against reference layers");
  auto* report = app.add_subcommand("report", "Rebuild benchmark and type-distribution tables");
  auto* label_ref = app.add_subcommand("label-from-reference", "Label a run's candidates from reference barns");
  auto* serve = app.add_subcommand("serve", "Serve the candidate review backend");
  serve->add_option("--host", o.host, "Bind address")->capture_default_str();
  serve->add_option("--port", o.port, "Port")->capture_default_str();
  for (auto* sub : app.get_subcommands([](CLI::App*) { return true; })) sub->fallthrough();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitConfig;
  }

  try {
    const auto cfg = o.pipeline();
    if (*synth) {
      SceneSpec spec;
      if (!o.spec.empty()) {
        try {
          spec = scene_spec_from_json(nlohmann::json::parse(read_text(o.spec)));
        } catch (const nlohmann::json::exception& e) {
          throw Error(ErrorCode::ConfigError, std::string("scene spec: ") + e.what());
        }
      }
      if (o.seed) spec.seed = *o.seed;
      fs::create_directories(o.scene_dir);
      const auto gt = generate_scene(spec);
      export_scene(gt, o.scene_dir);
      std::printf("scene: %zu farms, %zu barns, %zu distractors, %zu blobs -> %s\n", gt.farms.size(), gt.barns.size(),
                  gt.distractors.size(), gt.fp_blobs.size(), o.scene_dir.c_str());
    } else if (*candidates) {
      std::printf("candidates: %zu -> %s\n", cmd_candidates(cfg), (cfg.out_dir / "candidates.geojson").c_str());
    } else if (*run) {
      const auto r = cmd_run(cfg);
      std::fputs(stage_report_csv(r.report).c_str(), stdout);
      std::printf("farms: %zu\n", r.farms.size());
    } else if (*train_filter) {
      print_train("filter", cmd_train_filter(cfg));
    } else if (*train_type) {
      print_train("type", cmd_train_type(cfg));
    } else if (*train_pop) {
      print_train("population", cmd_train_pop(cfg));
    } else if (*eval) {
      std::fputs(metrics::to_csv(cmd_eval(cfg).rows).c_str(), stdout);
    } else if (*report) {
      cmd_report(cfg);
      std::fputs(read_text(cfg.out_dir / "benchmark.csv").c_str(), stdout);
    } else if (*label_ref) {
      const auto n = cmd_label_from_reference(cfg);
      const auto c = label_counts(cfg.labels);
      std::printf("labeled %zu candidates: %zu barn, %zu false_positive\n", n, c.barn, c.false_positive);
    } else if (*serve) {
      ReviewService service(cfg);
      ReviewServer server(service);
      const int port = server.bind(o.host, o.port);
      g_server = &server;
      std::signal(SIGINT, [](int) {
        if (g_server) g_server->stop();
      });
      std::printf("serving %zu candidates on http://%s:%d\n", service.size(), o.host.c_str(), port);
      std::fflush(stdout);
      server.listen();
    }
  } catch (const Error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return e.code() == ErrorCode::ConfigError ? kExitConfig : kExitStage;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitStage;
  }
  return 0;
}
