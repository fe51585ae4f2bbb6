#include <cstdio>
#include <exception>
#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include <json.hpp>

#include "agvrl/harness.hpp"
#include "agvrl/neuralnet.hpp"
#include "agvrl/pathmetrics.hpp"
#include "agvrl/trainers.hpp"

namespace {

int usage() {
  std::cerr <<
      "usage:\n"
      "  agvrl train --algorithm {ddqn|pf-ddqn|ekf-ddqn} --map FILE --episodes N\n"
      "              --seed S[,S...] [--config FILE] [--out DIR] [--gamma F] [--lr F]\n"
      "              [--batch N] [--memory N] [--sync N] [--eps-decay F] [--particles N]\n"
      "              [--proc-sigma F] [--obs-sigma F] [--ekf-r F] [--ekf-q F] [--max-steps N]\n"
      "              [--hidden W,W...] [--save-checkpoint] [--no-timing]\n"
      "  agvrl eval --checkpoint FILE --map FILE [--max-steps N]\n"
      "  agvrl compare DIR...\n";
  return 2;
}

int cmd_train(const std::vector<std::string>& args) {
  const agvrl::harness::RunSpec spec = agvrl::harness::parse_run_spec(args);
  const auto dirs = agvrl::harness::run_experiment(spec);
  for (const auto& d : dirs) std::cout << d.string() << '\n';
  return 0;
}

int cmd_eval(const std::vector<std::string>& args) {
  std::string checkpoint, map_file;
  int max_steps = 0;
  for (std::size_t i = 0; i < args.size(); ++i) {
    if (args[i] == "--checkpoint" && i + 1 < args.size()) checkpoint = args[++i];
    else if (args[i] == "--map" && i + 1 < args.size()) map_file = args[++i];
    else if (args[i] == "--max-steps" && i + 1 < args.size()) max_steps = std::stoi(args[++i]);
    else throw agvrl::harness::UsageError("unexpected eval argument '" + args[i] + "'");
  }
  if (checkpoint.empty() || map_file.empty())
    throw agvrl::harness::UsageError("eval needs --checkpoint and --map");

  const agvrl::grid::GridMap map = agvrl::grid::load_map(map_file);
  agvrl::ddqn::AgentNets nets;
  nets.online = agvrl::nn::load_checkpoint(checkpoint);
  nets.target = nets.online;
  const auto eval = agvrl::train::evaluate_greedy(
      nets, map, max_steps > 0 ? max_steps : agvrl::grid::default_max_steps(map));

  nlohmann::json out;
  out["success"] = eval.success;
  nlohmann::json paths = nlohmann::json::array();
  for (const auto& p : eval.paths) {
    nlohmann::json wp = nlohmann::json::array();
    for (const auto& pos : p) wp.push_back({pos.x, pos.y});
    paths.push_back(std::move(wp));
    out["moves"].push_back(agvrl::paths::move_count(p));
    out["lengths"].push_back(agvrl::paths::path_length(p));
  }
  out["paths"] = std::move(paths);
  std::cout << out.dump(2) << '\n';
  return eval.success ? 0 : 1;
}

int cmd_compare(const std::vector<std::string>& args) {
  if (args.size() < 1) throw agvrl::harness::UsageError("compare needs run directories");
  std::vector<std::filesystem::path> dirs(args.begin(), args.end());
  const auto report = agvrl::harness::compare(dirs);
  std::cout << agvrl::harness::format_table(report);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  if (argc < 2) return usage();
  const std::string command = argv[1];
  const std::vector<std::string> args(argv + 2, argv + argc);
  try {
    if (command == "train") return cmd_train(args);
    if (command == "eval") return cmd_eval(args);
    if (command == "compare") return cmd_compare(args);
    std::cerr << "unknown command '" << command << "'\n";
    return usage();
  } catch (const agvrl::harness::UsageError& e) {
    std::cerr << "usage error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
}
