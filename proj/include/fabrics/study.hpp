#pragma once

#include <chrono>
#include <fstream>
#include <functional>
#include <future>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "fabrics/metrics.hpp"
#include "fabrics/sampler.hpp"

namespace fabrics {

struct Trial {
  int index = 0;
  ParamValues params;
  double cost = 0.0;
  Metrics metrics;
  Termination termination = Termination::Completed;
  std::uint64_t rng_seed = 0;
  double wall_time = 0.0;  // seconds; excluded from reproducibility comparisons
};

struct Study {
  SearchSpace space;
  Weights weights;
  std::string scenario_label;
  PlannerMetadata planner;
  SamplerConfig sampler;
  std::uint64_t master_seed = 0;
  std::vector<Trial> trials;
};

inline const Trial& best(const Study& study) {
  if (study.trials.empty()) throw Error("best: study has no trials");
  const Trial* best_trial = &study.trials.front();
  for (const auto& t : study.trials)
    if (t.cost < best_trial->cost) best_trial = &t;
  return *best_trial;
}

struct RunConfig {
  int trials = 60;
  SamplerConfig sampler;
  Weights weights;
  std::uint64_t master_seed = 0;
  std::string scenario_label;
  int batch_size = 1;  // >1 evaluates suggestions of one round concurrently
};

using TrialSink = std::function<void(const Trial&)>;

// Algorithm: suggest a parameter set from the history, roll it out, score
// the trajectory, append the trial; repeat N times and keep the best.
// Fully deterministic under master_seed: per-trial streams are derived by
// counter, and batched evaluation commits in suggestion order.
inline Study run_study(const SearchSpace& space, const Scenario& scenario,
                       const CompiledPlanner& planner, const RunConfig& config,
                       const TrialSink& sink = {}) {
  if (config.trials < 1) throw ConstructionError("run_study: trials must be >= 1");
  if (config.batch_size < 1) throw ConstructionError("run_study: batch_size must be >= 1");
  scenario.validate(planner.robot());
  if (static_cast<int>(scenario.obstacles.size()) > planner.metadata().obstacle_count)
    throw ConstructionError("run_study: scenario has more obstacles than the planner supports");
  if (scenario.q0.size() != planner.metadata().dof)
    throw ConstructionError("run_study: scenario robot dof mismatch");

  Study study;
  study.space = space;
  study.weights = config.weights;
  study.scenario_label = config.scenario_label;
  study.planner = planner.metadata();
  study.sampler = config.sampler;
  study.master_seed = config.master_seed;

  auto evaluate_params = [&](const ParamValues& params, std::uint64_t seed,
                             int index) -> Trial {
    const auto start = std::chrono::steady_clock::now();
    TrajectoryLog log = rollout(planner, scenario, params);
    Trial trial;
    trial.index = index;
    trial.params = params;
    trial.metrics = compute_metrics(log, scenario);
    trial.termination = log.termination;
    trial.rng_seed = seed;
    const double cost = objective(trial.metrics, config.weights);
    trial.cost = std::isfinite(cost) ? cost : std::numeric_limits<double>::infinity();
    trial.wall_time = std::chrono::duration<double>(std::chrono::steady_clock::now() - start)
                          .count();
    return trial;
  };

  int next = 0;
  while (next < config.trials) {
    const int batch = std::min(config.batch_size, config.trials - next);
    std::vector<std::pair<ParamValues, std::uint64_t>> suggestions;
    suggestions.reserve(static_cast<std::size_t>(batch));
    for (int j = 0; j < batch; ++j) {
      const std::uint64_t seed = derive_seed(config.master_seed,
                                             static_cast<std::uint64_t>(next + j));
      Rng rng(seed);
      ParamValues params = config.sampler.kind == SamplerKind::Random
                               ? sample_uniform(space, rng)
                               : suggest_tpe(space, study.trials, rng, config.sampler.tpe);
      suggestions.emplace_back(std::move(params), seed);
    }

    if (batch == 1) {
      study.trials.push_back(
          evaluate_params(suggestions[0].first, suggestions[0].second, next));
    } else {
      std::vector<std::future<Trial>> futures;
      futures.reserve(static_cast<std::size_t>(batch));
      for (int j = 0; j < batch; ++j)
        futures.push_back(std::async(std::launch::async, evaluate_params,
                                     suggestions[static_cast<std::size_t>(j)].first,
                                     suggestions[static_cast<std::size_t>(j)].second, next + j));
      for (auto& f : futures) study.trials.push_back(f.get());
    }
    for (int j = 0; j < batch; ++j) {
      if (sink) sink(study.trials[static_cast<std::size_t>(next + j)]);
    }
    next += batch;
  }
  return study;
}

// ---------------------------------------------------------------------------
// JSON-Lines persistence: one header record, then one record per trial.

namespace study_json {

inline nlohmann::json to_json(const ParameterDecl& d) {
  return {{"name", d.name},
          {"lower", d.lower},
          {"upper", d.upper},
          {"kind", d.kind == ValueKind::Int ? "int" : "float"},
          {"scale", d.scale == Scale::Log ? "log" : "uniform"},
          {"manual", d.manual_default}};
}

inline ParameterDecl decl_from_json(const nlohmann::json& j) {
  ParameterDecl d;
  d.name = j.at("name").get<std::string>();
  d.lower = j.at("lower").get<double>();
  d.upper = j.at("upper").get<double>();
  const auto kind = j.at("kind").get<std::string>();
  if (kind != "int" && kind != "float")
    throw ConfigError("parameter kind must be 'int' or 'float', got '" + kind + "'");
  d.kind = kind == "int" ? ValueKind::Int : ValueKind::Float;
  const auto scale = j.at("scale").get<std::string>();
  if (scale != "log" && scale != "uniform")
    throw ConfigError("parameter scale must be 'uniform' or 'log', got '" + scale + "'");
  d.scale = scale == "log" ? Scale::Log : Scale::Uniform;
  d.manual_default = j.at("manual").get<double>();
  return d;
}

inline nlohmann::json to_json(const PlannerMetadata& m) {
  nlohmann::json layout = nlohmann::json::array();
  for (const auto& g : m.input_layout) layout.push_back({{"name", g.name}, {"dim", g.dim}});
  return {{"robot", m.robot_name},
          {"dof", m.dof},
          {"obstacle_count", m.obstacle_count},
          {"parameters", m.parameter_order},
          {"input_layout", layout},
          {"leaves", m.leaf_names}};
}

inline PlannerMetadata planner_from_json(const nlohmann::json& j) {
  PlannerMetadata m;
  m.robot_name = j.at("robot").get<std::string>();
  m.dof = j.at("dof").get<int>();
  m.obstacle_count = j.at("obstacle_count").get<int>();
  m.parameter_order = j.at("parameters").get<std::vector<std::string>>();
  for (const auto& g : j.at("input_layout"))
    m.input_layout.push_back({g.at("name").get<std::string>(), g.at("dim").get<int>()});
  m.leaf_names = j.at("leaves").get<std::vector<std::string>>();
  return m;
}

inline nlohmann::json header_record(const Study& study) {
  nlohmann::json space = nlohmann::json::array();
  for (const auto& d : study.space.decls()) space.push_back(to_json(d));
  return {{"type", "header"},
          {"space", space},
          {"weights",
           {{"distance", study.weights.distance},
            {"path", study.weights.path},
            {"clearance", study.weights.clearance}}},
          {"scenario", study.scenario_label},
          {"planner", to_json(study.planner)},
          {"sampler",
           {{"kind", name_of(study.sampler.kind)},
            {"n_startup", study.sampler.tpe.n_startup},
            {"gamma", study.sampler.tpe.gamma},
            {"n_candidates", study.sampler.tpe.n_candidates},
            {"bandwidth_floor", study.sampler.tpe.bandwidth_floor}}},
          {"master_seed", study.master_seed}};
}

inline nlohmann::json trial_record(const Trial& t) {
  return {{"type", "trial"},
          {"index", t.index},
          {"params", t.params},
          {"cost", t.cost},
          {"metrics",
           {{"cost_distance", t.metrics.cost_distance},
            {"cost_path", t.metrics.cost_path},
            {"cost_clearance", t.metrics.cost_clearance},
            {"reached", t.metrics.reached}}},
          {"termination", name_of(t.termination)},
          {"rng_seed", t.rng_seed},
          {"wall_time", t.wall_time}};
}

inline Trial trial_from_json(const nlohmann::json& j) {
  Trial t;
  t.index = j.at("index").get<int>();
  for (const auto& [name, value] : j.at("params").items())
    t.params[name] = value.get<double>();
  t.cost = j.at("cost").is_null() ? std::numeric_limits<double>::infinity()
                                  : j.at("cost").get<double>();
  const auto& m = j.at("metrics");
  t.metrics.cost_distance = m.at("cost_distance").get<double>();
  t.metrics.cost_path = m.at("cost_path").get<double>();
  t.metrics.cost_clearance = m.at("cost_clearance").get<double>();
  t.metrics.reached = m.at("reached").get<bool>();
  const auto term = j.at("termination").get<std::string>();
  if (term == "completed")
    t.termination = Termination::Completed;
  else if (term == "collided")
    t.termination = Termination::Collided;
  else if (term == "nonfinite")
    t.termination = Termination::NonFinite;
  else
    throw ConfigError("unknown termination '" + term + "'");
  t.rng_seed = j.at("rng_seed").get<std::uint64_t>();
  t.wall_time = j.at("wall_time").get<double>();
  return t;
}

}  // namespace study_json

// Streams a study to disk as it runs; each record is one flushed line, so a
// crash loses at most the line being written.
class StudyWriter {
 public:
  StudyWriter(const std::string& path, const Study& study) : out_(path, std::ios::trunc) {
    if (!out_) throw ConfigError("cannot open study file '" + path + "' for writing");
    out_ << study_json::header_record(study).dump() << '\n';
    out_.flush();
  }

  void append(const Trial& trial) {
    out_ << study_json::trial_record(trial).dump() << '\n';
    out_.flush();
  }

 private:
  std::ofstream out_;
};

inline void save_study(const Study& study, const std::string& path) {
  StudyWriter writer(path, study);
  for (const auto& t : study.trials) writer.append(t);
}

// Loads a study. A truncated or unparseable FINAL line is tolerated with a
// warning (interrupted append); a bad line anywhere else is an error naming
// the line number.
inline Study load_study(const std::string& path, std::ostream& warnings = std::cerr) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open study file '" + path + "'");
  std::vector<std::pair<int, std::string>> lines;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty()) lines.emplace_back(line_no, line);
  }
  if (lines.empty()) throw ConfigError("study file '" + path + "' is empty");

  Study study;
  bool have_header = false;
  for (std::size_t i = 0; i < lines.size(); ++i) {
    const bool final_line = i + 1 == lines.size();
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(lines[i].second);
      const auto type = j.at("type").get<std::string>();
      if (type == "header") {
        if (have_header)
          throw ConfigError("duplicate header");
        for (const auto& d : j.at("space")) study.space.add(study_json::decl_from_json(d));
        const auto& w = j.at("weights");
        study.weights = {w.at("distance").get<double>(), w.at("path").get<double>(),
                         w.at("clearance").get<double>()};
        study.scenario_label = j.at("scenario").get<std::string>();
        study.planner = study_json::planner_from_json(j.at("planner"));
        const auto kind = j.at("sampler").at("kind").get<std::string>();
        study.sampler.kind = kind == "random" ? SamplerKind::Random : SamplerKind::Tpe;
        study.sampler.tpe.n_startup = j.at("sampler").at("n_startup").get<int>();
        study.sampler.tpe.gamma = j.at("sampler").at("gamma").get<double>();
        study.sampler.tpe.n_candidates = j.at("sampler").at("n_candidates").get<int>();
        study.sampler.tpe.bandwidth_floor = j.at("sampler").at("bandwidth_floor").get<double>();
        study.master_seed = j.at("master_seed").get<std::uint64_t>();
        have_header = true;
      } else if (type == "trial") {
        if (!have_header) throw ConfigError("trial record before header");
        study.trials.push_back(study_json::trial_from_json(j));
      } else {
        throw ConfigError("unknown record type '" + type + "'");
      }
    } catch (const std::exception& e) {
      if (final_line) {
        warnings << "warning: ignoring truncated final line " << lines[i].first << " of '"
                 << path << "'\n";
        break;
      }
      throw ConfigError("study file '" + path + "' line " + std::to_string(lines[i].first) +
                        ": " + e.what());
    }
  }
  if (!have_header) throw ConfigError("study file '" + path + "' has no header record");
  for (std::size_t i = 0; i < study.trials.size(); ++i)
    if (study.trials[i].index != static_cast<int>(i))
      throw ConfigError("study file '" + path + "': trial indices are not contiguous");
  return study;
}

}  // namespace fabrics
