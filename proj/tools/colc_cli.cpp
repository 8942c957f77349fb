// Command-line driver: scene generation, codebook training, runs, sweeps,
// and file inspection.
//
// Exit codes: 0 success, 1 usage error, 2 runtime error. Errors are printed
// to stderr as one JSON object per line.

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "colc/config.hpp"
#include "colc/error.hpp"
#include "colc/geometry.hpp"
#include "colc/harness.hpp"
#include "colc/pillars.hpp"
#include "colc/scenegen.hpp"
#include "colc/vqcodec.hpp"

namespace fs = std::filesystem;

namespace {

void report_error(const std::string& kind, const std::string& message) {
  std::cerr << nlohmann::json{{"error", kind}, {"message", message}}.dump() << '\n';
}

colc::ScenarioConfig resolve_config(const std::string& path,
                                    const std::optional<std::uint64_t>& seed) {
  colc::ScenarioConfig config = path.empty() ? colc::ScenarioConfig{} : colc::load_config(path);
  if (seed) config.seed = *seed;
  config.validate();
  return config;
}

void print_codebook_stats(const colc::Codebook& cb) {
  std::vector<std::uint32_t> usage = cb.usage;
  std::sort(usage.begin(), usage.end());
  const auto dead = std::count(usage.begin(), usage.end(), 0u);
  std::uint64_t total = 0;
  for (const auto u : usage) total += u;
  nlohmann::json j{{"K", cb.K()},
                   {"D_c", cb.code_dim()},
                   {"D_p", cb.patch_dim()},
                   {"p", cb.p},
                   {"C", cb.C},
                   {"usage",
                    {{"total", total},
                     {"min", usage.empty() ? 0 : usage.front()},
                     {"median", usage.empty() ? 0 : usage[usage.size() / 2]},
                     {"max", usage.empty() ? 0 : usage.back()},
                     {"unused", dead}}}};
  std::cout << j.dump(2) << '\n';
}

void print_grid_stats(const colc::PillarGrid& grid) {
  const auto mask = colc::occupancy_of(grid);
  const auto& s = grid.spec();
  std::cout << nlohmann::json{{"H", s.H},
                              {"W", s.W},
                              {"C", s.C},
                              {"cell", s.cell},
                              {"x_min", s.x_min},
                              {"y_min", s.y_min},
                              {"occupied_cells", mask.count()}}
                   .dump(2)
            << '\n';
}

void print_cloud_stats(const colc::PointCloud& cloud) {
  nlohmann::json j{{"points", cloud.size()}};
  if (!cloud.empty()) {
    double lo[3] = {1e300, 1e300, 1e300}, hi[3] = {-1e300, -1e300, -1e300};
    for (const auto& p : cloud.points) {
      const double v[3] = {p.x, p.y, p.z};
      for (int a = 0; a < 3; ++a) {
        lo[a] = std::min(lo[a], v[a]);
        hi[a] = std::max(hi[a], v[a]);
      }
    }
    j["min"] = {lo[0], lo[1], lo[2]};
    j["max"] = {hi[0], hi[1], hi[2]};
  }
  std::cout << j.dump(2) << '\n';
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Collaborative LiDAR completion simulator"};
  app.require_subcommand(1);

  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::string out_path;
  auto add_common = [&](CLI::App* cmd) {
    cmd->add_option("--config", config_path, "Scenario JSON config");
    cmd->add_option("--seed", seed, "Master seed (overrides the config)");
    cmd->add_option("--out", out_path, "Output path (stdout when omitted)");
  };

  auto* gen = app.add_subcommand("gen-scene", "Generate one scene as JSON");
  add_common(gen);
  int scene_index = 0;
  std::string clouds_dir;
  gen->add_option("--index", scene_index, "Evaluation scene index");
  gen->add_option("--clouds", clouds_dir, "Also write per-agent CPCD clouds here");

  auto* train = app.add_subcommand("train-codebook", "Fit a codebook on training scenes");
  add_common(train);

  auto* run = app.add_subcommand("run", "Evaluate the configured setting, write CSV");
  add_common(run);
  std::string codebook_path;
  run->add_option("--codebook", codebook_path, "Pre-trained codebook (CCBK)");

  auto* sw = app.add_subcommand("sweep", "Sweep r_bg x pose noise x latency, write CSV");
  add_common(sw);
  std::vector<double> r_bg_list, noise_list, latency_list;
  sw->add_option("--codebook", codebook_path, "Pre-trained codebook (CCBK)");
  sw->add_option("--r-bg", r_bg_list, "Background ratios")->delimiter(',');
  sw->add_option("--noise", noise_list, "Pose noise std in meters")->delimiter(',');
  sw->add_option("--latency-ms", latency_list, "Latencies in milliseconds")->delimiter(',');

  auto* inspect = app.add_subcommand("inspect", "Print statistics of a binary file");
  std::string inspect_codebook, inspect_grid, inspect_cloud;
  inspect->add_option("--codebook", inspect_codebook, "CCBK file");
  inspect->add_option("--grid", inspect_grid, "CGRD file");
  inspect->add_option("--cloud", inspect_cloud, "CPCD file");

  if (argc > 1 && argv[1][0] != '-') {
    const std::string name = argv[1];
    const auto subs = app.get_subcommands([](CLI::App*) { return true; });
    const bool known = std::any_of(subs.begin(), subs.end(),
                                   [&](const CLI::App* s) { return s->get_name() == name; });
    if (!known) {
      report_error("usage", "unknown subcommand \"" + name + "\"");
      std::cerr << app.help();
      return 1;
    }
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    report_error("usage", e.what());
    std::cerr << app.help();
    return 1;
  }

  try {
    if (*gen) {
      const auto config = resolve_config(config_path, seed);
      const auto scene =
          colc::generate_scene(config.scene, colc::eval_scene_seed(config.seed, scene_index));
      const std::string text = colc::scene_to_json(scene).dump(2);
      if (out_path.empty()) {
        std::cout << text << '\n';
      } else {
        std::ofstream out(out_path);
        if (!(out << text << '\n')) throw colc::IoError("cannot write " + out_path);
      }
      if (!clouds_dir.empty()) {
        fs::create_directories(clouds_dir);
        for (const auto& agent : scene.agents) {
          for (int f = 0; f < scene.frames; ++f) {
            const auto cloud = colc::simulate_lidar(scene, agent.id, f, config.lidar());
            colc::save_cloud(fs::path(clouds_dir) / ("agent" + std::to_string(agent.id) +
                                                     "_f" + std::to_string(f) + ".cpcd"),
                             cloud);
          }
        }
      }
    } else if (*train) {
      if (out_path.empty()) {
        report_error("usage", "train-codebook requires --out");
        return 1;
      }
      auto config = resolve_config(config_path, seed);
      config.codebook.path.reset();
      const auto codebook = colc::obtain_codebook(config);
      colc::save_codebook(out_path, codebook);
      print_codebook_stats(codebook);
    } else if (*run || *sw) {
      auto config = resolve_config(config_path, seed);
      if (!codebook_path.empty()) config.codebook.path = codebook_path;
      const auto codebook = colc::obtain_codebook(config);
      std::vector<colc::MetricsRecord> rows;
      if (*run) {
        rows = colc::run_scenario(config, codebook);
      } else {
        auto pick = [](const std::vector<double>& cli, const std::vector<double>& cfg,
                       double fallback) {
          if (!cli.empty()) return cli;
          if (!cfg.empty()) return cfg;
          return std::vector<double>{fallback};
        };
        rows = colc::sweep(config, codebook,
                           pick(r_bg_list, config.sweep.r_bg, config.sampling.r_bg),
                           pick(noise_list, config.sweep.pose_noise_m,
                                config.channel.pose_noise_m),
                           pick(latency_list, config.sweep.latency_ms,
                                config.channel.latency_ms));
      }
      if (out_path.empty()) {
        colc::write_csv(std::cout, rows);
      } else {
        colc::write_csv(fs::path(out_path), rows);
      }
    } else if (*inspect) {
      const int chosen = !inspect_codebook.empty() + !inspect_grid.empty() +
                         !inspect_cloud.empty();
      if (chosen != 1) {
        report_error("usage", "inspect takes exactly one of --codebook, --grid, --cloud");
        return 1;
      }
      if (!inspect_codebook.empty()) {
        print_codebook_stats(colc::load_codebook(inspect_codebook));
      } else if (!inspect_grid.empty()) {
        print_grid_stats(colc::load_grid(inspect_grid));
      } else {
        print_cloud_stats(colc::load_cloud(inspect_cloud));
      }
    }
  } catch (const colc::Error& e) {
    report_error(e.kind(), e.what());
    return 2;
  } catch (const std::exception& e) {
    report_error("internal", e.what());
    return 2;
  }
  return 0;
}
