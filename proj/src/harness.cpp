#include "agvrl/harness.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <sstream>

#include <CLI11.hpp>

#include "agvrl/pathmetrics.hpp"

namespace agvrl::harness {

namespace {

namespace fs = std::filesystem;

/// Shortest round-trip decimal form, locale independent.
std::string fmt(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

std::vector<std::uint64_t> parse_seed_list(const std::string& text) {
  std::vector<std::uint64_t> seeds;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      seeds.push_back(std::stoull(item));
    } catch (const std::exception&) {
      throw UsageError("bad seed '" + item + "' in list '" + text + "'");
    }
  }
  if (seeds.empty()) throw UsageError("no seeds given");
  return seeds;
}

std::vector<int> parse_int_list(const std::string& text) {
  std::vector<int> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      out.push_back(std::stoi(item));
    } catch (const std::exception&) {
      throw UsageError("bad integer '" + item + "' in list '" + text + "'");
    }
  }
  return out;
}

struct SpecBuilder {
  RunSpec spec;
  bool ess_threshold_given = false;

  void apply(const std::string& key, const nlohmann::json& v) {
    if (key == "algorithm") set_algorithm(v.get<std::string>());
    else if (key == "map") spec.map_path = v.get<std::string>();
    else if (key == "episodes") spec.train.episodes = v.get<int>();
    else if (key == "seed") {
      if (v.is_string()) spec.seeds = parse_seed_list(v.get<std::string>());
      else if (v.is_array()) spec.seeds = v.get<std::vector<std::uint64_t>>();
      else spec.seeds = {v.get<std::uint64_t>()};
    } else if (key == "out") spec.out_dir = v.get<std::string>();
    else if (key == "gamma") spec.train.gamma = v.get<double>();
    else if (key == "lr") spec.train.learning_rate = v.get<double>();
    else if (key == "batch") spec.train.batch_size = v.get<std::size_t>();
    else if (key == "memory") spec.train.memory_size = v.get<std::size_t>();
    else if (key == "sync") spec.train.target_sync_every = v.get<int>();
    else if (key == "eps-initial") spec.train.eps_initial = v.get<double>();
    else if (key == "eps-decay") spec.train.eps_decay = v.get<double>();
    else if (key == "eps-floor") spec.train.eps_floor = v.get<double>();
    else if (key == "particles") spec.pf.num_particles = v.get<int>();
    else if (key == "proc-sigma") spec.pf.process_sigma = v.get<double>();
    else if (key == "obs-sigma") spec.pf.obs_sigma = v.get<double>();
    else if (key == "init-sigma") spec.pf.init_sigma = v.get<double>();
    else if (key == "ess-threshold") {
      spec.pf.ess_threshold = v.get<double>();
      ess_threshold_given = true;
    } else if (key == "ekf-r") spec.ekf.r_obs = v.get<double>();
    else if (key == "ekf-q") spec.ekf.q_proc = v.get<double>();
    else if (key == "ekf-p0") spec.ekf.p0 = v.get<double>();
    else if (key == "max-steps") spec.train.max_steps = v.get<int>();
    else if (key == "train-every") spec.train.train_every = v.get<int>();
    else if (key == "filter-every") spec.train.filter_every = v.get<int>();
    else if (key == "learn-start") spec.train.learn_start = v.get<std::size_t>();
    else if (key == "hidden") {
      if (v.is_string()) spec.train.hidden = parse_int_list(v.get<std::string>());
      else spec.train.hidden = v.get<std::vector<int>>();
    } else if (key == "target-rule") set_target_rule(v.get<std::string>());
    else if (key == "inject") spec.train.inject_sgd_particle = v.get<bool>();
    else if (key == "timing") spec.train.measure_time = v.get<bool>();
    else if (key == "save-checkpoint") spec.save_checkpoint = v.get<bool>();
    else throw UsageError("unknown config key '" + key + "'");
  }

  void set_algorithm(const std::string& name) {
    const auto a = train::algorithm_from_name(name);
    if (!a) throw UsageError("unknown algorithm '" + name + "'");
    spec.algorithm = *a;
  }

  void set_target_rule(const std::string& name) {
    if (name == "double") spec.train.target_rule = ddqn::TargetRule::Double;
    else if (name == "max") spec.train.target_rule = ddqn::TargetRule::Max;
    else throw UsageError("unknown target rule '" + name + "'");
  }
};

}  // namespace

RunSpec parse_run_spec(const std::vector<std::string>& args) {
  SpecBuilder builder;

  // The config file provides the middle precedence layer, so it is applied
  // before the flags.
  for (std::size_t i = 0; i < args.size(); ++i) {
    if (args[i] != "--config") continue;
    if (i + 1 >= args.size()) throw UsageError("--config needs a file argument");
    std::ifstream in(args[i + 1]);
    if (!in) throw UsageError("cannot open config file '" + args[i + 1] + "'");
    nlohmann::json j;
    try {
      in >> j;
    } catch (const nlohmann::json::exception& e) {
      throw UsageError("config file parse error: " + std::string(e.what()));
    }
    if (!j.is_object()) throw UsageError("config file must hold a JSON object");
    for (const auto& [key, value] : j.items()) builder.apply(key, value);
  }

  CLI::App app{"train"};
  std::string algorithm, seed_text, hidden_text, target_rule, config_file;
  std::string map_path, out_dir;
  app.add_option("--algorithm", algorithm);
  app.add_option("--map", map_path);
  app.add_option("--episodes", builder.spec.train.episodes);
  app.add_option("--seed", seed_text);
  app.add_option("--config", config_file);
  app.add_option("--out", out_dir);
  app.add_option("--gamma", builder.spec.train.gamma);
  app.add_option("--lr", builder.spec.train.learning_rate);
  app.add_option("--batch", builder.spec.train.batch_size);
  app.add_option("--memory", builder.spec.train.memory_size);
  app.add_option("--sync", builder.spec.train.target_sync_every);
  app.add_option("--eps-initial", builder.spec.train.eps_initial);
  app.add_option("--eps-decay", builder.spec.train.eps_decay);
  app.add_option("--eps-floor", builder.spec.train.eps_floor);
  app.add_option("--particles", builder.spec.pf.num_particles);
  app.add_option("--proc-sigma", builder.spec.pf.process_sigma);
  app.add_option("--obs-sigma", builder.spec.pf.obs_sigma);
  app.add_option("--init-sigma", builder.spec.pf.init_sigma);
  auto* ess_opt = app.add_option("--ess-threshold", builder.spec.pf.ess_threshold);
  app.add_option("--ekf-r", builder.spec.ekf.r_obs);
  app.add_option("--ekf-q", builder.spec.ekf.q_proc);
  app.add_option("--ekf-p0", builder.spec.ekf.p0);
  app.add_option("--max-steps", builder.spec.train.max_steps);
  app.add_option("--train-every", builder.spec.train.train_every);
  app.add_option("--filter-every", builder.spec.train.filter_every);
  app.add_option("--learn-start", builder.spec.train.learn_start);
  app.add_option("--hidden", hidden_text);
  app.add_option("--target-rule", target_rule)->check(CLI::IsMember({"double", "max"}));
  app.add_flag("--no-inject", "disable SGD particle injection");
  app.add_flag("--no-timing", "record wall_ms as 0 for reproducible output files");
  app.add_flag("--save-checkpoint", builder.spec.save_checkpoint);

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    throw UsageError(e.what());
  }

  if (!algorithm.empty()) builder.set_algorithm(algorithm);
  if (!map_path.empty()) builder.spec.map_path = map_path;
  if (!out_dir.empty()) builder.spec.out_dir = out_dir;
  if (!seed_text.empty()) builder.spec.seeds = parse_seed_list(seed_text);
  if (!hidden_text.empty()) builder.spec.train.hidden = parse_int_list(hidden_text);
  if (!target_rule.empty()) builder.set_target_rule(target_rule);
  if (app.count("--no-inject") > 0) builder.spec.train.inject_sgd_particle = false;
  if (app.count("--no-timing") > 0) builder.spec.train.measure_time = false;
  if (ess_opt->count() > 0) builder.ess_threshold_given = true;

  if (!builder.ess_threshold_given)
    builder.spec.pf.ess_threshold = builder.spec.pf.num_particles / 2.0;

  if (builder.spec.map_path.empty()) throw UsageError("--map is required");
  if (builder.spec.seeds.empty()) throw UsageError("at least one seed is required");
  if (!fs::exists(builder.spec.map_path))
    throw UsageError("map file does not exist: " + builder.spec.map_path.string());
  train::validate(builder.spec.train);
  return builder.spec;
}

namespace {

nlohmann::json config_echo(const RunSpec& spec) {
  const train::TrainConfig& t = spec.train;
  nlohmann::json j{{"memory", t.memory_size},
                   {"batch", t.batch_size},
                   {"gamma", t.gamma},
                   {"lr", t.learning_rate},
                   {"sync", t.target_sync_every},
                   {"eps-initial", t.eps_initial},
                   {"eps-decay", t.eps_decay},
                   {"eps-floor", t.eps_floor},
                   {"episodes", t.episodes},
                   {"max-steps", t.max_steps},
                   {"train-every", t.train_every},
                   {"filter-every", t.filter_every},
                   {"learn-start", t.learn_start},
                   {"hidden", t.hidden},
                   {"target-rule", t.target_rule == ddqn::TargetRule::Double ? "double" : "max"},
                   {"inject", t.inject_sgd_particle},
                   {"timing", t.measure_time}};
  if (spec.algorithm == train::Algorithm::PFDDQN)
    j["pf"] = {{"particles", spec.pf.num_particles},
               {"proc-sigma", spec.pf.process_sigma},
               {"obs-sigma", spec.pf.obs_sigma},
               {"ess-threshold", spec.pf.ess_threshold},
               {"init-sigma", spec.pf.init_sigma}};
  if (spec.algorithm == train::Algorithm::EKFDDQN)
    j["ekf"] = {{"p0", spec.ekf.p0}, {"q", spec.ekf.q_proc}, {"r", spec.ekf.r_obs}};
  return j;
}

void write_metrics_csv(const fs::path& file, const std::vector<train::EpisodeRecord>& records) {
  std::ofstream out(file);
  out << "episode,total_reward,steps,outcome,epsilon,wall_ms\n";
  for (const auto& r : records) {
    out << r.episode << ',' << fmt(r.total_reward) << ',' << r.steps << ','
        << grid::cause_name(r.outcome) << ',' << fmt(r.epsilon) << ',' << fmt(r.wall_ms) << '\n';
  }
}

void write_curve_csv(const fs::path& file, const std::vector<train::EpisodeRecord>& records) {
  std::vector<double> rewards;
  rewards.reserve(records.size());
  for (const auto& r : records) rewards.push_back(r.total_reward);
  const std::vector<double> means = trailing_mean(rewards, 500);
  std::ofstream out(file);
  out << "episode,trailing_mean_reward\n";
  for (std::size_t e = 0; e < means.size(); ++e)
    out << records[e].episode << ',' << fmt(means[e]) << '\n';
}

nlohmann::json summary_json(const RunSpec& spec, std::uint64_t seed,
                            const train::RunSummary& s) {
  nlohmann::json j;
  j["algorithm"] = std::string(train::algorithm_name(spec.algorithm));
  j["seed"] = seed;
  j["map"] = spec.map_path.string();
  j["config"] = config_echo(spec);
  j["summary"] = {{"episodes", s.episodes},
                  {"target_hit", s.target_hit},
                  {"obstacle_hit", s.obstacle_hit},
                  {"agent_collision", s.agent_collision},
                  {"timeout", s.timeout},
                  {"solution_episode",
                   s.solution_episode ? nlohmann::json(*s.solution_episode) : nlohmann::json()},
                  {"final_path_moves", s.final_path_moves},
                  {"final_path_lengths", s.final_path_lengths},
                  {"final_success", s.final_success},
                  {"wall_ms_total", s.wall_ms_total}};
  return j;
}

nlohmann::json paths_json(const std::vector<paths::Path>& ps, bool success) {
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& p : ps) {
    nlohmann::json wp = nlohmann::json::array();
    for (const auto& pos : p) wp.push_back({pos.x, pos.y});
    arr.push_back(std::move(wp));
  }
  nlohmann::json moves = nlohmann::json::array(), lengths = nlohmann::json::array();
  for (const auto& p : ps) {
    moves.push_back(paths::move_count(p));
    lengths.push_back(paths::path_length(p));
  }
  return {{"success", success}, {"paths", arr}, {"moves", moves}, {"lengths", lengths}};
}

}  // namespace

std::vector<std::filesystem::path> run_experiment(const RunSpec& spec) {
  const grid::GridMap map = grid::load_map(spec.map_path);
  std::vector<fs::path> out_dirs;

  for (const std::uint64_t seed : spec.seeds) {
    RunSpec seeded = spec;
    seeded.train.seed = seed;

    train::RunResult result;
    switch (spec.algorithm) {
      case train::Algorithm::DDQN: result = train::run_ddqn(map, seeded.train); break;
      case train::Algorithm::PFDDQN:
        result = train::run_pf_ddqn(map, seeded.train, seeded.pf);
        break;
      case train::Algorithm::EKFDDQN:
        result = train::run_ekf_ddqn(map, seeded.train, seeded.ekf);
        break;
    }

    const fs::path dir = spec.out_dir / ("seed_" + std::to_string(seed));
    fs::create_directories(dir);
    write_metrics_csv(dir / "metrics.csv", result.records);
    write_curve_csv(dir / "curve.csv", result.records);
    {
      std::ofstream out(dir / "summary.json");
      out << summary_json(seeded, seed, result.summary).dump(2) << '\n';
    }
    {
      std::ofstream out(dir / "paths.json");
      out << paths_json(result.final_paths, result.summary.final_success).dump(2) << '\n';
    }
    if (spec.save_checkpoint) nn::save_checkpoint(result.nets.online, dir / "checkpoint.json");
    out_dirs.push_back(dir);
  }
  return out_dirs;
}

std::vector<double> trailing_mean(const std::vector<double>& values, int window) {
  std::vector<double> means(values.size(), 0.0);
  double sum = 0.0;
  for (std::size_t e = 0; e < values.size(); ++e) {
    sum += values[e];
    if (e >= static_cast<std::size_t>(window)) sum -= values[e - window];
    const auto count = std::min<std::size_t>(e + 1, static_cast<std::size_t>(window));
    means[e] = sum / static_cast<double>(count);
  }
  return means;
}

namespace {

RunRecord load_run_record(const fs::path& summary_file) {
  std::ifstream in(summary_file);
  if (!in) throw MissingRun("cannot open " + summary_file.string());
  nlohmann::json j;
  in >> j;
  RunRecord r;
  r.algorithm = j.at("algorithm").get<std::string>();
  r.seed = j.at("seed").get<std::uint64_t>();
  r.map_path = j.at("map").get<std::string>();
  const auto& s = j.at("summary");
  if (!s.at("solution_episode").is_null())
    r.solution_episode = s.at("solution_episode").get<int>();
  r.episodes = s.at("episodes").get<int>();
  r.target_hit = s.at("target_hit").get<int>();
  r.obstacle_hit = s.at("obstacle_hit").get<int>();
  r.agent_collision = s.at("agent_collision").get<int>();
  r.timeout = s.at("timeout").get<int>();
  r.final_path_moves = s.at("final_path_moves").get<std::vector<int>>();
  r.final_success = s.at("final_success").get<bool>();
  r.wall_ms_total = s.at("wall_ms_total").get<double>();
  return r;
}

std::optional<int> median_of(std::vector<int> v) {
  if (v.empty()) return std::nullopt;
  std::sort(v.begin(), v.end());
  return v[v.size() / 2];
}

}  // namespace

ComparisonReport compare(const std::vector<std::filesystem::path>& run_dirs) {
  std::vector<RunRecord> records;
  for (const fs::path& dir : run_dirs) {
    if (fs::exists(dir / "summary.json")) {
      records.push_back(load_run_record(dir / "summary.json"));
      continue;
    }
    bool found = false;
    if (fs::is_directory(dir)) {
      for (const auto& entry : fs::directory_iterator(dir)) {
        if (entry.is_directory() && fs::exists(entry.path() / "summary.json")) {
          records.push_back(load_run_record(entry.path() / "summary.json"));
          found = true;
        }
      }
    }
    if (!found) throw MissingRun("no summary.json under " + dir.string());
  }
  if (records.size() < 2) throw MissingRun("compare needs at least two completed runs");

  // BFS optima per map, for path ratios.
  std::map<std::string, std::vector<int>> bfs_cache;
  for (const RunRecord& r : records) {
    if (bfs_cache.count(r.map_path)) continue;
    std::vector<int> optima;
    try {
      const grid::GridMap map = grid::load_map(r.map_path);
      for (int i = 0; i < map.agent_count(); ++i) {
        const auto d = paths::bfs_shortest(map, map.starts[static_cast<std::size_t>(i)],
                                           map.targets[static_cast<std::size_t>(i)]);
        optima.push_back(d.value_or(0));
      }
    } catch (const grid::MalformedMap&) {
      // map moved since the run; ratios are skipped for it
    }
    bfs_cache[r.map_path] = std::move(optima);
  }

  std::map<std::string, std::vector<const RunRecord*>> by_algorithm;
  std::map<std::uint64_t, const RunRecord*> ddqn_by_seed;
  for (const RunRecord& r : records) {
    by_algorithm[r.algorithm].push_back(&r);
    if (r.algorithm == "ddqn") ddqn_by_seed[r.seed] = &r;
  }

  ComparisonReport report;
  for (const auto& [name, runs] : by_algorithm) {
    AlgorithmStats st;
    st.algorithm = name;
    st.runs = static_cast<int>(runs.size());
    std::vector<int> solutions;
    double ratio_sum = 0.0;
    int ratio_count = 0;
    for (const RunRecord* r : runs) {
      if (r->solution_episode) solutions.push_back(*r->solution_episode);
      st.mean_target_hit += r->target_hit;
      st.mean_obstacle_hit += r->obstacle_hit;
      st.mean_timeout += r->timeout;
      st.mean_wall_ms += r->wall_ms_total;
      const auto& optima = bfs_cache[r->map_path];
      if (r->final_success && optima.size() == r->final_path_moves.size()) {
        for (std::size_t i = 0; i < optima.size(); ++i) {
          if (optima[i] > 0) {
            ratio_sum += static_cast<double>(r->final_path_moves[i]) / optima[i];
            ++ratio_count;
          }
        }
      }
    }
    st.solved = static_cast<int>(solutions.size());
    st.solution_median = median_of(solutions);
    if (!solutions.empty()) {
      st.solution_min = *std::min_element(solutions.begin(), solutions.end());
      st.solution_max = *std::max_element(solutions.begin(), solutions.end());
    }
    st.mean_target_hit /= st.runs;
    st.mean_obstacle_hit /= st.runs;
    st.mean_timeout /= st.runs;
    st.mean_wall_ms /= st.runs;
    if (ratio_count > 0) st.mean_path_to_bfs_ratio = ratio_sum / ratio_count;

    if (name != "ddqn" && !ddqn_by_seed.empty()) {
      double wins = 0.0;
      int pairs = 0;
      for (const RunRecord* r : runs) {
        const auto it = ddqn_by_seed.find(r->seed);
        if (it == ddqn_by_seed.end()) continue;
        ++pairs;
        const int own = r->solution_episode.value_or(r->episodes + 1);
        const int base = it->second->solution_episode.value_or(it->second->episodes + 1);
        if (own < base) wins += 1.0;
        else if (own == base) wins += 0.5;
      }
      if (pairs > 0) st.win_rate_vs_ddqn = wins / pairs;
    }
    report.algorithms.push_back(std::move(st));
  }
  return report;
}

nlohmann::json ComparisonReport::to_json() const {
  nlohmann::json arr = nlohmann::json::array();
  for (const AlgorithmStats& st : algorithms) {
    nlohmann::json j{{"algorithm", st.algorithm},
                     {"runs", st.runs},
                     {"solved", st.solved},
                     {"solution_median",
                      st.solution_median ? nlohmann::json(*st.solution_median) : nlohmann::json()},
                     {"solution_min",
                      st.solution_min ? nlohmann::json(*st.solution_min) : nlohmann::json()},
                     {"solution_max",
                      st.solution_max ? nlohmann::json(*st.solution_max) : nlohmann::json()},
                     {"mean_target_hit", st.mean_target_hit},
                     {"mean_obstacle_hit", st.mean_obstacle_hit},
                     {"mean_timeout", st.mean_timeout},
                     {"mean_path_to_bfs_ratio", st.mean_path_to_bfs_ratio},
                     {"mean_wall_ms", st.mean_wall_ms}};
    if (st.win_rate_vs_ddqn) j["win_rate_vs_ddqn"] = *st.win_rate_vs_ddqn;
    arr.push_back(std::move(j));
  }
  return {{"algorithms", arr}};
}

std::string format_table(const ComparisonReport& report) {
  std::ostringstream out;
  out << "algorithm   runs solved  sol(med/min/max)      hits     obst     t/o   path/bfs  wall_ms     win%\n";
  for (const AlgorithmStats& st : report.algorithms) {
    char line[256];
    std::string sol = "none";
    if (st.solution_median)
      sol = std::to_string(*st.solution_median) + "/" + std::to_string(*st.solution_min) + "/" +
            std::to_string(*st.solution_max);
    std::snprintf(line, sizeof(line), "%-11s %4d %6d  %-20s %8.1f %8.1f %7.1f %9.3f %9.0f %8s\n",
                  st.algorithm.c_str(), st.runs, st.solved, sol.c_str(), st.mean_target_hit,
                  st.mean_obstacle_hit, st.mean_timeout, st.mean_path_to_bfs_ratio,
                  st.mean_wall_ms,
                  st.win_rate_vs_ddqn ? fmt(*st.win_rate_vs_ddqn * 100.0).c_str() : "-");
    out << line;
  }
  return out.str();
}

}  // namespace agvrl::harness
