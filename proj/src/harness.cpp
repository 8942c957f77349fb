#include "colc/harness.hpp"

#include <chrono>
#include <cstdio>
#include <fstream>
#include <map>
#include <ostream>
#include <set>
#include <string>

#include "colc/align_metrics.hpp"
#include "colc/error.hpp"
#include "colc/fusion.hpp"
#include "colc/parallel.hpp"
#include "colc/random.hpp"

namespace colc {
namespace {

enum SeedSalt : std::uint64_t {
  kTrainScene = 100,
  kEvalScene = 101,
  kSampling = 102,
  kPoseNoise = 103,
  kTrainSampling = 104,
};

using CloudCache = std::map<std::pair<AgentId, int>, PointCloud>;

SaliencyScores scores_for(const ScenarioConfig& config, const Scene& scene,
                          const PointCloud& cloud, AgentId agent, int frame) {
  if (config.scorer == ScorerKind::kOracle) {
    const auto boxes = scene.boxes_in_agent_frame(agent, frame);
    return score_points(cloud, ScorerKind::kOracle, std::span<const BoxLabel>(boxes));
  }
  return score_points(cloud, ScorerKind::kHeuristic, std::nullopt);
}

// Transform taking `from`'s frame at `from_frame` into `to`'s frame at
// `to_frame`, using true poses.
RigidTransform relative_pose(const Scene& scene, AgentId to, int to_frame,
                             AgentId from, int from_frame) {
  const auto& pt = scene.agent(to).poses.at(static_cast<std::size_t>(to_frame));
  const auto& pf = scene.agent(from).poses.at(static_cast<std::size_t>(from_frame));
  return compose(invert(pt), pf);
}

CloudCache simulate_frames(const ScenarioConfig& config, const Scene& scene,
                           const std::set<int>& frames) {
  std::vector<std::pair<AgentId, int>> keys;
  for (const auto& a : scene.agents) {
    for (const int f : frames) keys.emplace_back(a.id, f);
  }
  std::vector<PointCloud> clouds(keys.size());
  const LidarOptions lidar = config.lidar();
  parallel_for(keys.size(), [&](std::size_t begin, std::size_t end) {
    for (std::size_t i = begin; i < end; ++i) {
      clouds[i] = simulate_lidar(scene, keys[i].first, keys[i].second, lidar);
    }
  });
  CloudCache cache;
  for (std::size_t i = 0; i < keys.size(); ++i) cache.emplace(keys[i], std::move(clouds[i]));
  return cache;
}

std::string scenario_id(const ScenarioConfig& config, int scene_index, int frame,
                        AgentId ego) {
  char buf[256];
  std::snprintf(buf, sizeof(buf), "%s|scene=%d|frame=%d|ego=%d|noise=%g|latency_ms=%g",
                config.name.c_str(), scene_index, frame, ego,
                config.channel.pose_noise_m, config.channel.latency_ms);
  return buf;
}

MetricsRecord evaluate_ego(const ScenarioConfig& config, const Codebook& codebook,
                           const Scene& scene, const CloudCache& clouds,
                           int scene_index, int frame, AgentId ego) {
  using Clock = std::chrono::steady_clock;
  const auto start = Clock::now();
  const int latency = config.latency_frames();
  const int sent_frame = frame - latency;
  const PointCloud& ego_cloud = clouds.at({ego, frame});

  std::vector<Message> messages;
  std::vector<PointCloud> dense_neighbors;
  std::size_t elements = 0;
  for (const auto& agent : scene.agents) {
    if (agent.id == ego) continue;
    const std::uint64_t row_key[] = {static_cast<std::uint64_t>(scene_index),
                                     static_cast<std::uint64_t>(frame),
                                     static_cast<std::uint64_t>(ego),
                                     static_cast<std::uint64_t>(agent.id)};
    const PointCloud& sent = clouds.at({agent.id, sent_frame});
    const SaliencyScores scores = scores_for(config, scene, sent, agent.id, sent_frame);
    const RigidTransform& sender_pose = agent.poses.at(static_cast<std::size_t>(sent_frame));
    Message msg = sample_message(
        sent, scores, config.sampling, sender_pose, sent_frame,
        derive_seed(config.seed, {kSampling, row_key[0], row_key[1], row_key[2], row_key[3]}));
    elements += msg.element_count;

    // Channel: the receiver only knows the (noisy) communicated pose.
    const RigidTransform noisy = perturb_pose(
        sender_pose, config.channel.pose_noise_m, config.channel.pose_noise_rad,
        derive_seed(config.seed, {kPoseNoise, row_key[0], row_key[1], row_key[2], row_key[3]}));
    const auto& ego_pose = scene.agent(ego).poses.at(static_cast<std::size_t>(frame));
    msg.cloud = transform_cloud(msg.cloud, compose(invert(ego_pose), noisy), ego);
    if (config.channel.icp && !msg.cloud.empty() && !ego_cloud.empty()) {
      IcpOptions icp;
      icp.max_iters = config.channel.icp_max_iters;
      icp.tol = config.channel.icp_tol;
      icp.max_correspondence_dist = config.channel.icp_max_dist;
      const IcpResult fix = icp_align(msg.cloud, ego_cloud, icp);
      msg.cloud = transform_cloud(msg.cloud, fix.transform, ego);
    }
    messages.push_back(std::move(msg));

    dense_neighbors.push_back(transform_cloud(
        clouds.at({agent.id, frame}), relative_pose(scene, ego, frame, agent.id, frame), ego));
  }

  // A lossless message has nothing to restore, so it skips completion.
  FusionSwitches switches = config.ablation;
  if (config.sampling.r_fg >= 1.0 && config.sampling.r_bg >= 1.0) switches.completion = false;
  const FusionOutput fused = completion_enhanced_fusion(
      ego_cloud, messages, config.grid, codebook, config.patch, config.tau_o, switches);

  std::vector<const PointCloud*> dense_clouds{&ego_cloud};
  for (const auto& c : dense_neighbors) dense_clouds.push_back(&c);
  const PillarGrid dense = pillarize(dense_clouds, config.grid);
  const OccupancyMask dense_occ = occupancy_of(dense);

  MetricsRecord row;
  row.scenario = scenario_id(config, scene_index, frame, ego);
  row.r_fg = config.sampling.r_fg;
  row.r_bg = config.sampling.r_bg;
  row.element_count = elements;
  row.comm_volume = elements > 0 ? comm_volume(elements) : 0.0;
  row.iou_sparse = occupancy_iou(fused.observed_mask, dense_occ).value;
  row.iou_enhanced = occupancy_iou(occupancy_of(fused.enhanced), dense_occ).value;
  row.mse_enhanced = masked_mse(fused.enhanced, dense).value;
  row.mse_sparse = masked_mse(fused.sparse_fused, dense).value;
  row.kl = kl_alignment(fused.enhanced, dense).value;
  row.cosine_loss = cosine_alignment(fused.enhanced, dense).value;
  row.alignment_total =
      alignment_total(row.kl, row.cosine_loss, config.loss.gamma1, config.loss.gamma2);
  row.iou_ego = occupancy_iou(occupancy_of(pillarize(ego_cloud, config.grid)), dense_occ).value;
  row.scene_index = scene_index;
  row.frame = frame;
  row.ego = ego;
  row.pose_noise_m = config.channel.pose_noise_m;
  row.latency_ms = config.channel.latency_ms;
  if (config.record_wall_time) {
    row.wall_ms =
        std::chrono::duration<double, std::milli>(Clock::now() - start).count();
  }
  return row;
}

std::string format_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.9g", v);
  return buf;
}

}  // namespace

std::uint64_t train_scene_seed(std::uint64_t master, int index) {
  return derive_seed(master, {kTrainScene, static_cast<std::uint64_t>(index)}) & ~1ULL;
}

std::uint64_t eval_scene_seed(std::uint64_t master, int index) {
  return derive_seed(master, {kEvalScene, static_cast<std::uint64_t>(index)}) | 1ULL;
}

std::vector<TrainingPair> build_training_corpus(const ScenarioConfig& config) {
  config.validate();
  std::vector<TrainingPair> corpus;
  const int frame = config.scene.frames - 1;
  for (int k = 0; k < config.codebook.train_scenes; ++k) {
    const Scene scene = generate_scene(config.scene, train_scene_seed(config.seed, k));
    const CloudCache clouds = simulate_frames(config, scene, {frame});
    for (const auto& ego : scene.agents) {
      for (const auto& nb : scene.agents) {
        if (nb.id == ego.id) continue;
        const PointCloud& full = clouds.at({nb.id, frame});
        const SaliencyScores scores = scores_for(config, scene, full, nb.id, frame);
        const Message msg = sample_message(
            full, scores, config.sampling, nb.poses.back(), frame,
            derive_seed(config.seed, {kTrainSampling, static_cast<std::uint64_t>(k),
                                      static_cast<std::uint64_t>(ego.id),
                                      static_cast<std::uint64_t>(nb.id)}));
        const RigidTransform to_ego = relative_pose(scene, ego.id, frame, nb.id, frame);
        corpus.push_back({pillarize(transform_cloud(msg.cloud, to_ego, ego.id), config.grid),
                          pillarize(transform_cloud(full, to_ego, ego.id), config.grid)});
      }
    }
  }
  return corpus;
}

Codebook obtain_codebook(const ScenarioConfig& config) {
  if (config.codebook.path) return load_codebook(*config.codebook.path);
  const auto corpus = build_training_corpus(config);
  TrainOptions options;
  options.K = config.codebook.K;
  options.iters = config.codebook.iters;
  options.seed = config.seed;
  options.reserve_empty_code = config.codebook.reserve_empty_code;
  return train_codebook_report(corpus, config.patch, options).codebook;
}

std::vector<MetricsRecord> run_scenario(const ScenarioConfig& config,
                                        const Codebook& codebook) {
  config.validate();
  if (codebook.K() == 0) throw ConfigError("run_scenario: no codebook");
  const int latency = config.latency_frames();
  const int first_eval = config.scene.frames - config.eval_frames;

  std::vector<MetricsRecord> rows;
  for (int k = 0; k < config.eval_scenes; ++k) {
    const Scene scene = generate_scene(config.scene, eval_scene_seed(config.seed, k));
    std::set<int> frames;
    for (int f = first_eval; f < config.scene.frames; ++f) {
      frames.insert(f);
      frames.insert(f - latency);
    }
    const CloudCache clouds = simulate_frames(config, scene, frames);

    struct Item {
      int frame;
      AgentId ego;
    };
    std::vector<Item> items;
    for (int f = first_eval; f < config.scene.frames; ++f) {
      for (const auto& a : scene.agents) items.push_back({f, a.id});
    }
    std::vector<MetricsRecord> scene_rows(items.size());
    parallel_for(items.size(), [&](std::size_t begin, std::size_t end) {
      for (std::size_t i = begin; i < end; ++i) {
        scene_rows[i] = evaluate_ego(config, codebook, scene, clouds, k, items[i].frame,
                                     items[i].ego);
      }
    });
    rows.insert(rows.end(), scene_rows.begin(), scene_rows.end());
  }
  return rows;
}

std::vector<MetricsRecord> sweep(const ScenarioConfig& config, const Codebook& codebook,
                                 const std::vector<double>& r_bg_list,
                                 const std::vector<double>& noise_list,
                                 const std::vector<double>& latency_list) {
  if (r_bg_list.empty() || noise_list.empty() || latency_list.empty()) {
    throw ConfigError("sweep: r_bg, noise and latency lists must be non-empty");
  }
  std::vector<MetricsRecord> rows;
  for (const double r_bg : r_bg_list) {
    for (const double noise : noise_list) {
      for (const double latency : latency_list) {
        ScenarioConfig setting = config;
        setting.sampling.r_bg = r_bg;
        setting.channel.pose_noise_m = noise;
        setting.channel.latency_ms = latency;
        auto part = run_scenario(setting, codebook);
        rows.insert(rows.end(), part.begin(), part.end());
      }
    }
  }
  return rows;
}

void write_csv(std::ostream& out, const std::vector<MetricsRecord>& rows) {
  out << kCsvHeader << '\n';
  for (const auto& r : rows) {
    out << r.scenario << ',' << format_double(r.r_fg) << ',' << format_double(r.r_bg)
        << ',' << format_double(r.comm_volume) << ',' << format_double(r.iou_sparse)
        << ',' << format_double(r.iou_enhanced) << ',' << format_double(r.mse_enhanced)
        << ',' << format_double(r.kl) << ',' << format_double(r.cosine_loss) << ','
        << format_double(r.wall_ms) << '\n';
  }
}

void write_csv(const std::filesystem::path& path, const std::vector<MetricsRecord>& rows) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open for writing: " + path.string());
  write_csv(out, rows);
  if (!out) throw IoError("write failed: " + path.string());
}

}  // namespace colc
