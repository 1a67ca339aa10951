// pbo: command-line front end (optimize, brute-force, sample, check).

#include <pbo/bridge.hpp>
#include <pbo/pbo.hpp>
#include <pbo/selfcheck.hpp>

#if __has_include(<CLI/CLI.hpp>)
#include <CLI/CLI.hpp>
#else
#include <CLI11.hpp>
#endif
#include <nlohmann/json.hpp>

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <set>
#include <sstream>
#include <string>

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

namespace {

enum ExitCode { kOk = 0, kFailure = 1, kConfig = 2, kInfeasible = 3, kObjective = 4 };

//---------------------------------------------------------------------------//
// Config parsing
//---------------------------------------------------------------------------//

void reject_unknown(const json& obj, const std::string& where, std::initializer_list<const char*> allowed) {
  if (!obj.is_object()) throw pbo::ConfigError("'" + where + "' must be an object");
  const std::set<std::string> ok(allowed.begin(), allowed.end());
  for (const auto& item : obj.items())
    if (!ok.count(item.key()))
      throw pbo::ConfigError("unknown key '" + (where.empty() ? "" : where + ".") + item.key() + "'");
}

const json& require(const json& obj, const std::string& where, const char* key) {
  if (!obj.contains(key))
    throw pbo::ConfigError("missing required field '" + (where.empty() ? "" : where + ".") + key + "'");
  return obj.at(key);
}

template <class T>
T get_as(const json& v, const std::string& name) {
  try {
    return v.get<T>();
  } catch (const json::exception&) {
    throw pbo::ConfigError("field '" + name + "' has the wrong type");
  }
}

std::size_t get_count(const json& v, const std::string& name) {
  if (!v.is_number_integer() || v.get<long long>() < 0)
    throw pbo::ConfigError("field '" + name + "' must be a nonnegative integer");
  return v.get<std::size_t>();
}

struct ObjectiveSpec {
  pbo::Objective objective;
  std::string description;
};

ObjectiveSpec parse_objective(const json& o, const fs::path& base) {
  const std::string type = get_as<std::string>(require(o, "objective", "type"), "objective.type");
  if (type == "bilinear") {
    reject_unknown(o, "objective", {"type", "dimension"});
    const std::size_t n = get_count(require(o, "objective", "dimension"), "objective.dimension");
    if (n == 0) throw pbo::ConfigError("objective.dimension must be positive");
    return {pbo::bilinear_objective(n), "bilinear"};
  }
  if (type == "trace_fim") {
    reject_unknown(o, "objective", {"type", "sigma", "synthetic", "matrix_file", "rows_per_sensor"});
    const double sigma = o.contains("sigma") ? get_as<double>(o.at("sigma"), "objective.sigma") : 1.0;
    std::shared_ptr<const pbo::TraceFIMProblem> problem;
    try {
      if (o.contains("synthetic") == o.contains("matrix_file"))
        throw pbo::ConfigError("objective needs exactly one of 'synthetic' or 'matrix_file'");
      if (o.contains("synthetic")) {
        const json& s = o.at("synthetic");
        reject_unknown(s, "objective.synthetic", {"sensors", "times", "parameters", "decay", "seed"});
        problem = std::make_shared<pbo::TraceFIMProblem>(pbo::synthetic_trace_fim(
            get_count(require(s, "objective.synthetic", "sensors"), "objective.synthetic.sensors"),
            s.contains("times") ? get_count(s.at("times"), "objective.synthetic.times") : 4,
            s.contains("parameters") ? get_count(s.at("parameters"), "objective.synthetic.parameters") : 8,
            sigma, s.contains("decay") ? get_as<double>(s.at("decay"), "objective.synthetic.decay") : 0.7,
            s.contains("seed") ? get_as<std::uint64_t>(s.at("seed"), "objective.synthetic.seed") : 0));
      } else {
        fs::path file = get_as<std::string>(o.at("matrix_file"), "objective.matrix_file");
        if (file.is_relative()) file = base / file;
        const std::size_t rows = o.contains("rows_per_sensor")
                                     ? get_count(o.at("rows_per_sensor"), "objective.rows_per_sensor")
                                     : 1;
        problem = std::make_shared<pbo::TraceFIMProblem>(
            pbo::TraceFIMProblem::with_row_blocks(pbo::load_matrix_text(file.string()), sigma, rows));
      }
    } catch (const pbo::DomainError& e) {
      throw pbo::ConfigError(std::string("objective: ") + e.what());
    }
    return {pbo::trace_fim_objective(problem), "trace_fim"};
  }
  if (type == "external") {
    reject_unknown(o, "objective", {"type", "command", "dimension", "workers"});
    pbo::BridgeConfig bc;
    const json& cmd = require(o, "objective", "command");
    if (!cmd.is_array() || cmd.empty()) throw pbo::ConfigError("objective.command must be a nonempty array");
    for (const auto& a : cmd) bc.command.push_back(get_as<std::string>(a, "objective.command"));
    if (bc.command.front().find('/') != std::string::npos && fs::path(bc.command.front()).is_relative())
      bc.command.front() = (base / bc.command.front()).string();
    bc.dimension = get_count(require(o, "objective", "dimension"), "objective.dimension");
    bc.workers = o.contains("workers") ? get_count(o.at("workers"), "objective.workers") : 1;
    return {pbo::external_objective(bc), "external"};
  }
  throw pbo::ConfigError("objective.type must be one of bilinear, trace_fim, external");
}

pbo::ConstraintSpec parse_constraint(const json& c) {
  const std::string type = get_as<std::string>(require(c, "constraint", "type"), "constraint.type");
  if (type == "equality") {
    reject_unknown(c, "constraint", {"type", "budget"});
    return pbo::ConstraintSpec::equality(get_count(require(c, "constraint", "budget"), "constraint.budget"));
  }
  if (type == "inclusion") {
    reject_unknown(c, "constraint", {"type", "budgets"});
    const json& b = require(c, "constraint", "budgets");
    if (!b.is_array()) throw pbo::ConfigError("constraint.budgets must be an array");
    std::vector<std::size_t> z;
    for (const auto& v : b) z.push_back(get_count(v, "constraint.budgets"));
    if (z.empty()) throw pbo::ConfigError("constraint.budgets must be nonempty");
    return pbo::ConstraintSpec::inclusion(z);
  }
  if (type == "unconstrained") {
    reject_unknown(c, "constraint", {"type"});
    return pbo::ConstraintSpec::unconstrained();
  }
  throw pbo::ConfigError("constraint.type must be one of equality, inclusion, unconstrained");
}

/// Probability vector given as a scalar fill or an explicit array.
pbo::Vector parse_probs(const json& v, std::size_t n, const std::string& name) {
  if (v.is_number()) return pbo::Vector(n, v.get<double>());
  if (!v.is_array()) throw pbo::ConfigError("field '" + name + "' must be a number or an array");
  pbo::Vector p;
  for (const auto& x : v) p.push_back(get_as<double>(x, name));
  return p;
}

void parse_optimizer(const json& o, pbo::OptimizerConfig& cfg) {
  reject_unknown(o, "optimizer", {"learning_rate", "sample_size", "max_iterations", "pgtol",
                                  "final_sample_size", "direction", "baseline", "baseline_estimate", "initial_p",
                                  "schedule"});
  if (o.contains("learning_rate")) cfg.learning_rate = get_as<double>(o.at("learning_rate"), "optimizer.learning_rate");
  if (o.contains("sample_size")) cfg.sample_size = get_count(o.at("sample_size"), "optimizer.sample_size");
  if (o.contains("max_iterations")) cfg.max_iterations = get_count(o.at("max_iterations"), "optimizer.max_iterations");
  if (o.contains("pgtol")) cfg.pgtol = get_as<double>(o.at("pgtol"), "optimizer.pgtol");
  if (o.contains("final_sample_size"))
    cfg.final_sample_size = get_count(o.at("final_sample_size"), "optimizer.final_sample_size");
  if (o.contains("direction")) {
    const auto d = get_as<std::string>(o.at("direction"), "optimizer.direction");
    if (d == "maximize") cfg.direction = pbo::Direction::maximize;
    else if (d == "minimize") cfg.direction = pbo::Direction::minimize;
    else throw pbo::ConfigError("optimizer.direction must be maximize or minimize");
  }
  if (o.contains("baseline")) cfg.baseline = get_as<bool>(o.at("baseline"), "optimizer.baseline");
  if (o.contains("baseline_estimate")) {
    const auto e = get_as<std::string>(o.at("baseline_estimate"), "optimizer.baseline_estimate");
    if (e == "diagonal") cfg.baseline_estimate = pbo::BaselineEstimate::diagonal;
    else if (e == "double_sum") cfg.baseline_estimate = pbo::BaselineEstimate::double_sum;
    else if (e == "cross_fit") cfg.baseline_estimate = pbo::BaselineEstimate::cross_fit;
    else throw pbo::ConfigError("optimizer.baseline_estimate must be diagonal, double_sum or cross_fit");
  }
  if (o.contains("schedule")) {
    const auto s = get_as<std::string>(o.at("schedule"), "optimizer.schedule");
    if (s == "constant") cfg.schedule = pbo::LearningRateSchedule::constant;
    else if (s == "inverse") cfg.schedule = pbo::LearningRateSchedule::inverse;
    else throw pbo::ConfigError("optimizer.schedule must be constant or inverse");
  }
  if (o.contains("initial_p")) {
    const json& v = o.at("initial_p");
    if (v.is_number()) cfg.initial_fill = v.get<double>();
    else cfg.initial_p = parse_probs(v, 0, "optimizer.initial_p");
  }
}

struct SampleSpec {
  std::string model = "cb";
  std::size_t count = 1000;
  json p = 0.5;
  std::optional<std::size_t> dimension;
};

SampleSpec parse_sample(const json& s) {
  reject_unknown(s, "sample", {"model", "count", "p", "dimension"});
  SampleSpec out;
  if (s.contains("model")) out.model = get_as<std::string>(s.at("model"), "sample.model");
  if (out.model != "cb" && out.model != "gcb" && out.model != "pb")
    throw pbo::ConfigError("sample.model must be one of pb, cb, gcb");
  if (s.contains("count")) out.count = get_count(s.at("count"), "sample.count");
  if (s.contains("p")) out.p = s.at("p");
  if (s.contains("dimension")) out.dimension = get_count(s.at("dimension"), "sample.dimension");
  return out;
}

struct RunConfig {
  json raw;
  fs::path base;
  std::optional<ObjectiveSpec> objective;
  std::optional<pbo::ConstraintSpec> constraint;
  pbo::OptimizerConfig optimizer;
  std::optional<SampleSpec> sample;
  std::size_t check_instances = 50;
  fs::path out_dir = ".";
};

RunConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw pbo::ConfigError("cannot open config file '" + path + "'");
  RunConfig rc;
  try {
    rc.raw = json::parse(in, nullptr, true, /*ignore_comments=*/true);
  } catch (const json::parse_error& e) {
    throw pbo::ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
  rc.base = fs::path(path).parent_path();
  reject_unknown(rc.raw, "", {"objective", "constraint", "optimizer", "seed", "threads", "output", "sample", "check"});
  if (rc.raw.contains("seed")) rc.optimizer.seed = get_as<std::uint64_t>(rc.raw.at("seed"), "seed");
  if (rc.raw.contains("threads")) rc.optimizer.threads = get_count(rc.raw.at("threads"), "threads");
  if (rc.raw.contains("optimizer")) parse_optimizer(rc.raw.at("optimizer"), rc.optimizer);
  if (rc.raw.contains("constraint")) rc.constraint = parse_constraint(rc.raw.at("constraint"));
  if (rc.raw.contains("sample")) rc.sample = parse_sample(rc.raw.at("sample"));
  if (rc.raw.contains("check")) {
    const json& c = rc.raw.at("check");
    reject_unknown(c, "check", {"instances"});
    if (c.contains("instances")) rc.check_instances = get_count(c.at("instances"), "check.instances");
  }
  if (rc.raw.contains("output")) {
    const json& o = rc.raw.at("output");
    reject_unknown(o, "output", {"directory"});
    if (o.contains("directory")) {
      fs::path dir = get_as<std::string>(o.at("directory"), "output.directory");
      rc.out_dir = dir.is_relative() ? rc.base / dir : dir;
    }
  }
  return rc;
}

void ensure_objective(RunConfig& rc) {
  if (rc.objective) return;
  rc.objective = parse_objective(require(rc.raw, "", "objective"), rc.base);
}

const pbo::ConstraintSpec& need_constraint(const RunConfig& rc) {
  if (!rc.constraint) throw pbo::ConfigError("missing required field 'constraint'");
  return *rc.constraint;
}

//---------------------------------------------------------------------------//
// Output helpers
//---------------------------------------------------------------------------//

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

std::ofstream open_out(const fs::path& file) {
  std::ofstream out(file, std::ios::binary);
  if (!out) throw pbo::ConfigError("cannot write '" + file.string() + "'");
  return out;
}

json constraint_json(const pbo::ConstraintSpec& c, std::size_t n) {
  json j;
  switch (c.kind()) {
    case pbo::ConstraintSpec::Kind::equality:
      j["type"] = "equality";
      j["budget"] = c.z();
      break;
    case pbo::ConstraintSpec::Kind::inclusion:
      j["type"] = "inclusion";
      j["budgets"] = c.budgets(n);
      break;
    case pbo::ConstraintSpec::Kind::unconstrained:
      j["type"] = "unconstrained";
      break;
  }
  return j;
}

void write_trace_csv(const fs::path& file, const pbo::OptimizerTrace& trace, std::size_t n) {
  auto out = open_out(file);
  out << "iteration,pgnorm,baseline,mean_J,best_J,new_evals";
  for (std::size_t i = 0; i < n; ++i) out << ",p_" << i;
  out << "\n";
  for (const auto& r : trace.iterations) {
    out << r.iteration << ',' << fmt(r.pgnorm) << ',' << fmt(r.baseline) << ',' << fmt(r.mean_value) << ','
        << fmt(r.best_value) << ',' << r.new_evaluations;
    for (double v : r.p) out << ',' << fmt(v);
    out << "\n";
  }
}

json result_json(const RunConfig& rc, const pbo::OptimizerTrace& trace, const std::string& status) {
  const std::size_t n = rc.objective->objective.dimension();
  const auto& c = *rc.constraint;
  const auto& cfg = rc.optimizer;
  json j;
  j["status"] = status;
  j["seed"] = cfg.seed;
  j["rng"] = pbo::RandomStream::kAlgorithm;
  j["objective"] = rc.objective->description;
  j["dimension"] = n;
  j["constraint"] = constraint_json(c, n);
  j["direction"] = cfg.direction == pbo::Direction::maximize ? "maximize" : "minimize";
  j["learning_rate"] = cfg.learning_rate;
  j["sample_size"] = cfg.sample_size;
  j["max_iterations"] = cfg.max_iterations;
  j["pgtol"] = cfg.pgtol;
  j["baseline"] = cfg.baseline;
  j["baseline_estimate"] = cfg.baseline_estimate == pbo::BaselineEstimate::diagonal     ? "diagonal"
                           : cfg.baseline_estimate == pbo::BaselineEstimate::double_sum ? "double_sum"
                                                                                        : "cross_fit";
  j["iterations"] = trace.iterations.size();
  j["converged"] = trace.converged;
  j["optimal_p"] = trace.optimal_p;
  if (!trace.returned_design.empty()) {
    j["returned_design"] = pbo::to_bitstring(trace.returned_design);
    j["returned_value"] = trace.returned_value;
  }
  if (!trace.best_design.empty()) {
    j["best_along_route"] = {{"design", pbo::to_bitstring(trace.best_design)}, {"value", trace.best_value}};
  }
  j["distinct_evaluations"] = trace.distinct_evaluations;
  j["cache_hits"] = trace.cache_hits;
  j["final_sample_size"] = trace.final_sample.size();
  j["final_new_evaluations"] = trace.final_new_evaluations;
  j["explored_percentage"] = pbo::explored_percentage(trace.distinct_evaluations, c, n);
  return j;
}

void write_json(const fs::path& file, const json& j) {
  auto out = open_out(file);
  out << j.dump(2) << "\n";
}

//---------------------------------------------------------------------------//
// Subcommands
//---------------------------------------------------------------------------//

int cmd_optimize(RunConfig& rc) {
  ensure_objective(rc);
  const auto& constraint = need_constraint(rc);
  const std::size_t n = rc.objective->objective.dimension();
  fs::create_directories(rc.out_dir);
  pbo::OptimizerTrace trace;
  std::string status = "ok";
  int code = kOk;
  try {
    trace = pbo::run(rc.objective->objective, constraint, rc.optimizer);
  } catch (const pbo::RunAborted& e) {
    trace = e.trace;
    status = std::string("aborted: ") + e.what();
    std::cerr << "pbo: objective failure: " << e.what() << "\n";
    code = kObjective;
  }
  write_trace_csv(rc.out_dir / "trace.csv", trace, n);
  write_json(rc.out_dir / "result.json", result_json(rc, trace, status));
  if (code == kOk) {
    std::cout << "iterations " << trace.iterations.size() << (trace.converged ? " (converged)" : "") << "\n"
              << "best along route " << fmt(trace.best_value) << " " << pbo::to_bitstring(trace.best_design) << "\n"
              << "returned design  " << fmt(trace.returned_value) << " " << pbo::to_bitstring(trace.returned_design)
              << "\n"
              << "distinct evaluations " << trace.distinct_evaluations << "\n";
  }
  return code;
}

int cmd_brute_force(RunConfig& rc) {
  ensure_objective(rc);
  const auto& constraint = need_constraint(rc);
  const auto& objective = rc.objective->objective;
  fs::create_directories(rc.out_dir);
  const auto rows = pbo::brute_force_table(objective, constraint);
  {
    auto out = open_out(rc.out_dir / "brute_force.csv");
    out << "index,value\n";
    for (const auto& r : rows) out << r.index << ',' << fmt(r.value) << "\n";
  }
  const auto best = pbo::brute_force_optimum(objective, constraint, rc.optimizer.direction);
  json j;
  j["objective"] = rc.objective->description;
  j["dimension"] = objective.dimension();
  j["constraint"] = constraint_json(constraint, objective.dimension());
  j["feasible_designs"] = rows.size();
  j["optimal_value"] = best.value;
  json designs = json::array();
  for (const auto& d : best.designs) designs.push_back(pbo::to_bitstring(d));
  j["optimal_designs"] = designs;
  write_json(rc.out_dir / "brute_force.json", j);
  std::cout << "feasible designs " << rows.size() << "\noptimal value " << fmt(best.value) << "\n";
  return kOk;
}

int cmd_sample(RunConfig& rc) {
  if (!rc.sample) throw pbo::ConfigError("missing required field 'sample'");
  const SampleSpec& s = *rc.sample;
  std::size_t n = 0;
  if (s.p.is_array()) n = s.p.size();
  else if (s.dimension) n = *s.dimension;
  else if (rc.raw.contains("objective") && rc.raw.at("objective").contains("dimension"))
    n = get_count(rc.raw.at("objective").at("dimension"), "objective.dimension");
  else
    throw pbo::ConfigError("missing required field 'sample.dimension'");
  pbo::Vector p = parse_probs(s.p, n, "sample.p");
  pbo::SuccessProbabilities sp;
  try {
    sp = pbo::SuccessProbabilities(p);
  } catch (const pbo::DomainError& e) {
    throw pbo::ConfigError(std::string("sample.p: ") + e.what());
  }
  pbo::RandomStream rng(rc.optimizer.seed);
  fs::create_directories(rc.out_dir);
  auto out = open_out(rc.out_dir / "samples.csv");
  std::size_t violations = 0;
  if (s.model == "pb") {
    const auto sums = pbo::pb_sample(pbo::PBModel(sp), s.count, rng);
    out << "draw,ones\n";
    for (std::size_t k = 0; k < sums.size(); ++k) out << k << ',' << sums[k] << "\n";
  } else {
    const auto& constraint = need_constraint(rc);
    pbo::SampleBatch batch;
    if (s.model == "cb") {
      if (constraint.kind() != pbo::ConstraintSpec::Kind::equality)
        throw pbo::ConfigError("sample.model 'cb' needs an equality constraint");
      batch = pbo::cb_sample(pbo::CBModel(sp, constraint.z()), s.count, rng);
    } else {
      constraint.validate(n);
      batch = pbo::gcb_sample(pbo::GCBModel(sp, constraint.budgets(n)), s.count, rng);
    }
    out << "draw,design,ones,feasible\n";
    for (std::size_t k = 0; k < batch.size(); ++k) {
      const std::size_t ones = pbo::popcount(batch.designs[k]);
      const bool ok = constraint.admits(ones);
      violations += ok ? 0 : 1;
      out << k << ',' << pbo::to_bitstring(batch.designs[k]) << ',' << ones << ',' << (ok ? 1 : 0) << "\n";
    }
  }
  std::cout << "draws " << s.count << "\nconstraint violations " << violations << "\n";
  return violations == 0 ? kOk : kFailure;
}

int cmd_check(RunConfig& rc) {
  const auto results = pbo::run_selfcheck(rc.check_instances, rc.optimizer.seed);
  std::size_t failures = 0, total = 0;
  json j = json::array();
  for (const auto& r : results) {
    std::cout << (r.failures == 0 ? "PASS " : "FAIL ") << r.name << ": " << r.instances - r.failures << "/"
              << r.instances << " (worst error " << fmt(r.worst) << ")\n";
    failures += r.failures;
    total += r.instances;
    j.push_back({{"check", r.name}, {"instances", r.instances}, {"failures", r.failures}, {"worst_error", r.worst}});
  }
  std::cout << "checks " << total << ", failures " << failures << "\n";
  fs::create_directories(rc.out_dir);
  write_json(rc.out_dir / "check.json", j);
  return failures == 0 ? kOk : kFailure;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Probabilistic binary optimization with conditional Bernoulli policies"};
  app.require_subcommand(1);
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out_dir;
  std::optional<std::size_t> threads;

  const std::vector<std::pair<std::string, std::string>> commands{
      {"optimize", "run the stochastic optimizer; writes trace.csv and result.json"},
      {"brute-force", "enumerate every feasible design; writes brute_force.csv and brute_force.json"},
      {"sample", "draw designs from a PB, CB or GCB model; writes samples.csv"},
      {"check", "run the finite-difference and normalization self-checks; writes check.json"}};
  for (const auto& [name, help] : commands) {
    auto* sub = app.add_subcommand(name, help);
    sub->add_option("--config", config_path, "JSON run configuration")->required();
    sub->add_option("--seed", seed, "override the configured seed");
    sub->add_option("--out", out_dir, "output directory");
    sub->add_option("--threads", threads, "concurrent objective evaluations (env PBO_THREADS)");
  }
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kConfig;
  }
  const std::string command = app.get_subcommands().front()->get_name();

  try {
    RunConfig rc = load_config(config_path);
    if (const char* env = std::getenv("PBO_THREADS")) {
      try {
        rc.optimizer.threads = std::stoul(env);
      } catch (const std::exception&) {
        throw pbo::ConfigError("PBO_THREADS must be a nonnegative integer");
      }
    }
    if (threads) rc.optimizer.threads = *threads;
    if (seed) rc.optimizer.seed = *seed;
    if (out_dir) rc.out_dir = *out_dir;
    if (command == "optimize") return cmd_optimize(rc);
    if (command == "brute-force") return cmd_brute_force(rc);
    if (command == "sample") return cmd_sample(rc);
    return cmd_check(rc);
  } catch (const pbo::ConfigError& e) {
    std::cerr << "pbo: config error: " << e.what() << "\n";
    return kConfig;
  } catch (const pbo::InfeasibleError& e) {
    std::cerr << "pbo: infeasible: " << e.what() << "\n";
    return kInfeasible;
  } catch (const pbo::ObjectiveError& e) {
    std::cerr << "pbo: objective failure: " << e.what() << "\n";
    return kObjective;
  } catch (const pbo::Error& e) {
    std::cerr << "pbo: " << e.what() << "\n";
    return kFailure;
  } catch (const std::exception& e) {
    std::cerr << "pbo: " << e.what() << "\n";
    return kFailure;
  }
}
