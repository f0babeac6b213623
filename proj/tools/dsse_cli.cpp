// Command-line front end: generate and partition feeders, run static and
// real-time estimation campaigns, observability analysis, and paired
// gradient / Gauss-Newton comparisons.  Every run copies its configuration
// into the output directory and is reproducible from that file plus the seed.

#include <CLI11.hpp>
#include <json.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <limits>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "dsse/estimator.hpp"
#include "dsse/feeder.hpp"
#include "dsse/io.hpp"
#include "dsse/measurements.hpp"
#include "dsse/multiarea.hpp"
#include "dsse/observability.hpp"
#include "dsse/powerflow.hpp"
#include "dsse/sensitivity.hpp"

namespace {

using namespace dsse;
using nlohmann::json;

std::string fmt(double v) { return format_double(v); }

struct RunArgs {
  std::string feeder;
  std::string generate;       // "size=36,seed=7[,phases=3][,load_fraction=0.6]"
  std::string roots;          // "3,7,12"
  std::string meters = "frac=0.05";
  double sigma_v = 0.01;
  double sigma_rel = 0.5;
  std::string solver = "gradient";
  std::string feedback = "linear";
  std::string eps = "auto";
  double delta = 1e-6;
  int trials = 1;
  std::uint64_t seed = 0;
  std::string out;
  std::string timeseries;
  int ticks = 3600;
};

void add_common_options(CLI::App* cmd, RunArgs& args) {
  cmd->add_option("--feeder", args.feeder, "feeder document (.json or nodes.csv)");
  cmd->add_option("--generate", args.generate,
                  "generator spec, e.g. size=36,seed=7[,phases=3]");
  cmd->add_option("--roots", args.roots, "area root node ids, comma separated");
  cmd->add_option("--meters", args.meters, "frac=0.05 or list=3,5,9");
  cmd->add_option("--sigma-v", args.sigma_v, "voltage magnitude noise, relative");
  cmd->add_option("--sigma-rel", args.sigma_rel, "pseudo-measurement noise, relative");
  cmd->add_option("--solver", args.solver, "gradient|multiarea|gauss-newton")
      ->check(CLI::IsMember({"gradient", "multiarea", "gauss-newton"}));
  cmd->add_option("--feedback", args.feedback, "linear|nonlinear")
      ->check(CLI::IsMember({"linear", "nonlinear"}));
  cmd->add_option("--eps", args.eps, "step size: auto or a float");
  cmd->add_option("--delta", args.delta, "voltage stop tolerance");
  cmd->add_option("--trials", args.trials, "Monte-Carlo trial count");
  cmd->add_option("--seed", args.seed, "base RNG seed");
  cmd->add_option("--out", args.out, "output directory (default $DSSE_OUT_DIR)");
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> parts;
  std::string part;
  std::stringstream ss(s);
  while (std::getline(ss, part, sep)) parts.push_back(part);
  return parts;
}

std::filesystem::path resolve_out_dir(const RunArgs& args) {
  std::string dir = args.out;
  if (dir.empty())
    if (const char* env = std::getenv("DSSE_OUT_DIR")) dir = env;
  if (dir.empty()) dir = "out";
  std::filesystem::create_directories(dir);
  return dir;
}

FeederModel load_or_generate(const RunArgs& args) {
  if (!args.feeder.empty() && !args.generate.empty())
    throw ValidationError("--feeder and --generate are mutually exclusive");
  if (!args.feeder.empty()) return load_feeder(args.feeder);
  if (args.generate.empty())
    throw ValidationError("one of --feeder or --generate is required");

  FeederSpec spec;
  for (const std::string& kv : split(args.generate, ',')) {
    auto eq = kv.find('=');
    if (eq == std::string::npos)
      throw ValidationError("bad --generate token '" + kv + "'");
    const std::string key = kv.substr(0, eq);
    const std::string value = kv.substr(eq + 1);
    if (key == "size")
      spec.size = std::stoi(value);
    else if (key == "seed")
      spec.seed = std::stoull(value);
    else if (key == "phases")
      spec.three_phase = std::stoi(value) == 3;
    else if (key == "load_fraction")
      spec.load_fraction = std::stod(value);
    else
      throw ValidationError("unknown --generate key '" + key + "'");
  }
  return generate_feeder(spec);
}

std::vector<int> parse_roots(const std::string& roots) {
  std::vector<int> out;
  if (roots.empty()) return out;
  for (const std::string& token : split(roots, ',')) out.push_back(std::stoi(token));
  return out;
}

// Resolves --meters to an explicit node list so that every trial in a
// campaign reads the same locations; only the noise draws differ.
MeterPlacement resolve_placement(const FeederModel& model, const std::string& spec,
                                 std::uint64_t seed) {
  if (spec.rfind("list=", 0) == 0) {
    std::vector<int> nodes;
    for (const std::string& token : split(spec.substr(5), ','))
      nodes.push_back(std::stoi(token));
    return MeterPlacement::list(std::move(nodes));
  }
  if (spec.rfind("frac=", 0) != 0)
    throw ValidationError("--meters must be frac=<float> or list=<ids>");
  const double fraction = std::stod(spec.substr(5));
  if (fraction < 0.0 || fraction > 1.0)
    throw ValidationError("meter fraction must lie in [0, 1]");

  std::vector<int> pool;
  for (const NodeRecord& node : model.nodes())
    if (node.id != model.slack_id()) pool.push_back(node.id);
  Rng rng(mix_seed(seed, 0xC0FFEE));
  const int want = std::max(
      1, static_cast<int>(std::lround(fraction * static_cast<double>(pool.size()))));
  for (int k = 0; k < want; ++k) {
    const int j = rng.uniform_int(k, static_cast<int>(pool.size()) - 1);
    std::swap(pool[static_cast<size_t>(k)], pool[static_cast<size_t>(j)]);
  }
  pool.resize(static_cast<size_t>(want));
  std::sort(pool.begin(), pool.end());
  return MeterPlacement::list(std::move(pool));
}

std::optional<double> parse_eps(const std::string& eps) {
  if (eps == "auto") return std::nullopt;
  return std::stod(eps);
}

void write_config(const RunArgs& args, const std::string& command,
                  const std::filesystem::path& dir) {
  json doc;
  doc["command"] = command;
  doc["feeder"] = args.feeder;
  doc["generate"] = args.generate;
  doc["roots"] = args.roots;
  doc["meters"] = args.meters;
  doc["sigma_v"] = args.sigma_v;
  doc["sigma_rel"] = args.sigma_rel;
  doc["solver"] = args.solver;
  doc["feedback"] = args.feedback;
  doc["eps"] = args.eps;
  doc["delta"] = args.delta;
  doc["trials"] = args.trials;
  doc["seed"] = args.seed;
  doc["timeseries"] = args.timeseries;
  doc["ticks"] = args.ticks;
  std::ofstream out(dir / "config.json");
  out << doc.dump(2) << '\n';
}

struct ErrorStats {
  double avg_pct = 0.0;
  double max_pct = 0.0;
};

// Per-node voltage magnitude error against the true (nonlinear) solution.
ErrorStats error_stats(const Eigen::VectorXcd& v_true, const Eigen::VectorXd& v_est) {
  ErrorStats stats;
  double sum = 0.0;
  for (Eigen::Index k = 0; k < v_est.size(); ++k) {
    const double mag_true = std::abs(v_true[k]);
    const double mag_est = std::sqrt(std::max(0.0, v_est[k]));
    const double err = 100.0 * std::abs(mag_est - mag_true) / mag_true;
    sum += err;
    stats.max_pct = std::max(stats.max_pct, err);
  }
  stats.avg_pct = sum / static_cast<double>(v_est.size());
  return stats;
}

struct TrialResult {
  ErrorStats errors;
  int iterations = 0;
  double seconds = 0.0;
  bool converged = false;
  std::string status = "converged";
};

TrialResult run_one_trial(const RunArgs& args, const FeederModel& model,
                          const SensitivityModel& sens, const AreaPartition* areas,
                          const MeasurementSet& ms,
                          const PowerFlowSolution& truth_flow,
                          std::vector<RoundMessage>* message_log,
                          std::vector<IterationRecord>* trace) {
  const VoltageFeedback feedback = args.feedback == "nonlinear"
                                       ? VoltageFeedback::nonlinear(model)
                                       : VoltageFeedback::linear();
  TrialResult result;
  const auto t0 = std::chrono::steady_clock::now();
  if (args.solver == "gradient") {
    SolveOptions opts;
    opts.epsilon = parse_eps(args.eps);
    opts.delta = args.delta;
    EstimateState est = solve_gradient(ms, sens, feedback, opts);
    result.errors = error_stats(truth_flow.voltage, est.v);
    result.iterations = est.iterations;
    result.converged = est.converged;
    if (!est.converged) result.status = "iteration cap";
    if (trace) *trace = est.trace;
  } else if (args.solver == "multiarea") {
    if (!areas) throw ValidationError("--solver multiarea requires --roots");
    MultiAreaOptions opts;
    opts.epsilon = parse_eps(args.eps);
    opts.delta = args.delta;
    MultiAreaEstimator estimator(model, sens, *areas, ms, feedback, opts);
    MultiAreaEstimator::Result run = estimator.run();
    result.errors = error_stats(truth_flow.voltage, run.state.v);
    result.iterations = run.state.iterations;
    result.converged = run.state.converged;
    if (message_log) *message_log = estimator.transport().log();
  } else {
    GaussNewtonResult gn = solve_gauss_newton(ms, model);
    result.converged = gn.status == "converged";
    result.status = gn.status;
    result.iterations = gn.state.iterations;
    if (gn.state.v.allFinite())
      result.errors = error_stats(truth_flow.voltage, gn.state.v);
    else
      result.errors = {std::numeric_limits<double>::quiet_NaN(),
                       std::numeric_limits<double>::quiet_NaN()};
    if (trace) *trace = gn.state.trace;
  }
  result.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
                       .count();
  return result;
}

int cmd_estimate(const RunArgs& args) {
  const std::filesystem::path dir = resolve_out_dir(args);
  write_config(args, "estimate", dir);

  const FeederModel model = load_or_generate(args);
  const SensitivityModel sens = SensitivityModel::build(model);
  const Injections truth = nominal_injections(model);
  const PowerFlowSolution truth_flow = solve_nonlinear(model, truth);

  std::optional<AreaPartition> areas;
  if (!args.roots.empty()) areas = partition(model, parse_roots(args.roots));

  NoisePolicy noise;
  noise.sigma_mag = args.sigma_v;
  noise.sigma_rel = args.sigma_rel;
  const MeterPlacement placement = resolve_placement(model, args.meters, args.seed);

  std::ofstream trials_csv(dir / "trials.csv");
  trials_csv << "# schema: estimate-trials v1\n";
  trials_csv << "trial,avg_error_pct,max_error_pct,iterations,converged\n";
  std::ofstream timing_csv(dir / "timing.csv");
  timing_csv << "# schema: estimate-timing v1\n";
  timing_csv << "trial,solve_seconds\n";

  double sum_avg = 0.0, sum_max = 0.0, sum_iters = 0.0, sum_seconds = 0.0;
  int converged = 0;
  for (int trial = 0; trial < args.trials; ++trial) {
    const MeasurementSet ms = synthesize(model, truth, truth_flow, noise, placement,
                                         mix_seed(args.seed, trial));
    std::vector<RoundMessage> messages;
    std::vector<IterationRecord> trace;
    const TrialResult r =
        run_one_trial(args, model, sens, areas ? &*areas : nullptr, ms, truth_flow,
                      trial == 0 ? &messages : nullptr, trial == 0 ? &trace : nullptr);
    trials_csv << trial << ',' << fmt(r.errors.avg_pct) << ','
               << fmt(r.errors.max_pct) << ',' << r.iterations << ','
               << (r.converged ? 1 : 0) << '\n';
    timing_csv << trial << ',' << fmt(r.seconds) << '\n';
    sum_avg += r.errors.avg_pct;
    sum_max += r.errors.max_pct;
    sum_iters += r.iterations;
    sum_seconds += r.seconds;
    converged += r.converged ? 1 : 0;
    if (trial == 0) {
      if (!trace.empty()) save_trace_csv(trace, (dir / "trace.csv").string());
      if (!messages.empty())
        save_message_log(messages, (dir / "messages.jsonl").string());
    }
  }

  const double n = std::max(1, args.trials);
  std::ofstream summary(dir / "summary.csv");
  summary << "# schema: estimate-summary v1\n";
  summary << "trials,avg_error_pct,avg_max_error_pct,avg_iterations,converged_trials\n";
  summary << args.trials << ',' << fmt(sum_avg / n) << ',' << fmt(sum_max / n) << ','
          << fmt(sum_iters / n) << ',' << converged << '\n';
  timing_csv << "mean," << fmt(sum_seconds / n) << '\n';

  std::cout << "estimate: " << args.trials << " trial(s), mean error "
            << fmt(sum_avg / n) << "%, mean max error " << fmt(sum_max / n)
            << "%, results in " << dir.string() << '\n';
  return 0;
}

int cmd_realtime(const RunArgs& args) {
  const std::filesystem::path dir = resolve_out_dir(args);
  write_config(args, "realtime", dir);

  const FeederModel model = load_or_generate(args);
  const SensitivityModel sens = SensitivityModel::build(model);

  std::vector<Scenario> scenarios;
  if (!args.timeseries.empty()) {
    scenarios = load_timeseries_csv(args.timeseries, model.state_index());
  } else {
    DiurnalSpec spec;
    spec.ticks = args.ticks;
    spec.seed = mix_seed(args.seed, 0xD1);
    scenarios = generate_diurnal(model, spec);
  }
  if (scenarios.empty()) throw ValidationError("empty scenario stream");

  NoisePolicy noise;
  noise.sigma_mag = args.sigma_v;
  noise.sigma_rel = args.sigma_rel;
  const MeterPlacement placement = resolve_placement(model, args.meters, args.seed);
  const VoltageFeedback feedback = args.feedback == "nonlinear"
                                       ? VoltageFeedback::nonlinear(model)
                                       : VoltageFeedback::linear();

  // One gradient step per tick with a step size fixed up front.
  PowerFlowSolution flow0 = solve_nonlinear(model, scenarios.front().truth);
  MeasurementSet ms0 = synthesize(model, scenarios.front().truth, flow0, noise,
                                  placement, mix_seed(args.seed, 0));
  double epsilon;
  if (auto fixed = parse_eps(args.eps))
    epsilon = *fixed;
  else
    epsilon = estimate_constants(ms0, sens).auto_epsilon();

  const int n = model.state_index().size();
  const int samples[3] = {0, n / 2, n - 1};
  std::ofstream out(dir / "realtime.csv");
  out << "# schema: realtime-ticks v1\n";
  out << "tick";
  for (int s : samples) {
    const auto& e = model.state_index().entry(s);
    out << ",v_true_" << e.node << phase_letter(e.phase) << ",v_est_" << e.node
        << phase_letter(e.phase);
  }
  out << ",avg_error_pct,max_error_pct,run_avg_error_pct,run_avg_max_error_pct\n";

  EstimateState state;
  state.z = initial_state(ms0);
  state.v = feedback.evaluate(sens, state.z);
  double run_avg = 0.0, run_max = 0.0;
  for (size_t t = 0; t < scenarios.size(); ++t) {
    const Scenario& sc = scenarios[t];
    const PowerFlowSolution flow = t == 0 ? flow0 : solve_nonlinear(model, sc.truth);
    const MeasurementSet ms =
        t == 0 ? ms0
               : synthesize(model, sc.truth, flow, noise, placement,
                            mix_seed(args.seed, t));
    state = step_realtime(state, ms, sens, feedback, epsilon);
    const ErrorStats err = error_stats(flow.voltage, state.v);
    run_avg += (err.avg_pct - run_avg) / static_cast<double>(t + 1);
    run_max += (err.max_pct - run_max) / static_cast<double>(t + 1);
    out << sc.tick;
    for (int s : samples)
      out << ',' << fmt(flow.v[s]) << ',' << fmt(state.v[s]);
    out << ',' << fmt(err.avg_pct) << ',' << fmt(err.max_pct) << ',' << fmt(run_avg)
        << ',' << fmt(run_max) << '\n';
  }

  std::cout << "realtime: " << scenarios.size() << " tick(s), final running avg error "
            << fmt(run_avg) << "%, max " << fmt(run_max) << "%, results in "
            << dir.string() << '\n';
  return 0;
}

int cmd_observability(const RunArgs& args) {
  const std::filesystem::path dir = resolve_out_dir(args);
  write_config(args, "observability", dir);

  const FeederModel model = load_or_generate(args);
  const SensitivityModel sens = SensitivityModel::build(model);
  const Injections truth = nominal_injections(model);

  NoisePolicy noise;
  noise.sigma_mag = args.sigma_v;
  noise.sigma_rel = args.sigma_rel;
  const MeterPlacement placement = resolve_placement(model, args.meters, args.seed);
  const MeasurementSet ms =
      synthesize(model, truth, noise, placement, mix_seed(args.seed, 0));

  const ObservabilityReport report =
      analyze_observability(model, sens, channels_from(ms));
  save_observability_json(report, (dir / "observability.json").string());
  if (report.rank < report.state_dimension)
    save_null_basis_csv(report, (dir / "null_basis.csv").string());

  std::cout << "observability: rank " << report.rank << " of "
            << report.state_dimension << " (" << fmt(report.index_percent)
            << "%), report in " << dir.string() << '\n';
  return 0;
}

int cmd_compare(const RunArgs& args) {
  const std::filesystem::path dir = resolve_out_dir(args);
  write_config(args, "compare", dir);

  const FeederModel model = load_or_generate(args);
  const SensitivityModel sens = SensitivityModel::build(model);
  const Injections truth = nominal_injections(model);
  const PowerFlowSolution truth_flow = solve_nonlinear(model, truth);

  NoisePolicy noise;
  noise.sigma_mag = args.sigma_v;
  noise.sigma_rel = args.sigma_rel;
  const MeterPlacement placement = resolve_placement(model, args.meters, args.seed);
  const VoltageFeedback feedback = args.feedback == "nonlinear"
                                       ? VoltageFeedback::nonlinear(model)
                                       : VoltageFeedback::linear();

  std::ofstream pairs(dir / "compare.csv");
  pairs << "# schema: compare-trials v1\n";
  pairs << "trial,grad_avg_error_pct,grad_max_error_pct,grad_iterations,"
           "gn_avg_error_pct,gn_max_error_pct,gn_status\n";
  std::ofstream hist(dir / "error_distribution.csv");
  hist << "# schema: compare-error-distribution v1\n";
  hist << "solver,error_pct\n";
  std::ofstream timing_csv(dir / "timing.csv");
  timing_csv << "# schema: compare-timing v1\n";
  timing_csv << "trial,grad_seconds,gn_seconds\n";

  double grad_sum = 0.0, gn_sum = 0.0;
  int gn_failures = 0, gn_ok = 0;
  for (int trial = 0; trial < args.trials; ++trial) {
    const MeasurementSet ms = synthesize(model, truth, truth_flow, noise, placement,
                                         mix_seed(args.seed, trial));

    SolveOptions opts;
    opts.epsilon = parse_eps(args.eps);
    opts.delta = args.delta;
    const auto t0 = std::chrono::steady_clock::now();
    const EstimateState grad = solve_gradient(ms, sens, feedback, opts);
    const double grad_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    const ErrorStats grad_err = error_stats(truth_flow.voltage, grad.v);

    const auto t1 = std::chrono::steady_clock::now();
    const GaussNewtonResult gn = solve_gauss_newton(ms, model);
    const double gn_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t1).count();
    ErrorStats gn_err{std::numeric_limits<double>::quiet_NaN(),
                      std::numeric_limits<double>::quiet_NaN()};
    if (gn.status == "converged" && gn.state.v.allFinite()) {
      gn_err = error_stats(truth_flow.voltage, gn.state.v);
      gn_sum += gn_err.avg_pct;
      ++gn_ok;
    } else {
      ++gn_failures;
    }
    grad_sum += grad_err.avg_pct;

    pairs << trial << ',' << fmt(grad_err.avg_pct) << ',' << fmt(grad_err.max_pct)
          << ',' << grad.iterations << ',' << fmt(gn_err.avg_pct) << ','
          << fmt(gn_err.max_pct) << ',' << gn.status << '\n';
    timing_csv << trial << ',' << fmt(grad_seconds) << ',' << fmt(gn_seconds) << '\n';

    for (Eigen::Index k = 0; k < grad.v.size(); ++k) {
      const double mag_true = std::abs(truth_flow.voltage[k]);
      hist << "gradient,"
           << fmt(100.0 * std::abs(std::sqrt(std::max(0.0, grad.v[k])) - mag_true) /
                  mag_true)
           << '\n';
      if (gn.status == "converged" && gn.state.v.allFinite())
        hist << "gauss-newton,"
             << fmt(100.0 *
                    std::abs(std::sqrt(std::max(0.0, gn.state.v[k])) - mag_true) /
                    mag_true)
             << '\n';
    }
  }

  const double n = std::max(1, args.trials);
  std::ofstream summary(dir / "summary.csv");
  summary << "# schema: compare-summary v1\n";
  summary << "trials,grad_mean_error_pct,gn_mean_error_pct,gn_converged,"
             "gn_nonconverged\n";
  summary << args.trials << ',' << fmt(grad_sum / n) << ','
          << fmt(gn_ok > 0 ? gn_sum / gn_ok : std::numeric_limits<double>::quiet_NaN())
          << ',' << gn_ok << ',' << gn_failures << '\n';

  std::cout << "compare: gradient mean error " << fmt(grad_sum / n)
            << "%, gauss-newton mean error "
            << fmt(gn_ok > 0 ? gn_sum / gn_ok : std::numeric_limits<double>::quiet_NaN())
            << "% (" << gn_failures << " non-converged), results in " << dir.string()
            << '\n';
  return 0;
}

int cmd_generate(const RunArgs& args) {
  const std::filesystem::path dir = resolve_out_dir(args);
  write_config(args, "generate", dir);
  if (args.generate.empty()) throw ValidationError("generate requires --generate");
  const FeederModel model = load_or_generate(args);
  save_feeder_json(model, (dir / "feeder.json").string());
  save_feeder_csv(model, (dir / "nodes.csv").string(), (dir / "lines.csv").string());
  std::cout << "generate: " << model.node_count() << " nodes, "
            << model.lines().size() << " lines, written to " << dir.string() << '\n';
  return 0;
}

int cmd_partition(const RunArgs& args) {
  const std::filesystem::path dir = resolve_out_dir(args);
  write_config(args, "partition", dir);
  const FeederModel model = load_or_generate(args);
  const AreaPartition areas = partition(model, parse_roots(args.roots));

  std::ofstream out(dir / "partition.csv");
  out << "# schema: partition v1\n";
  out << "node,area,root\n";
  for (const Area& area : areas.areas)
    for (int id : area.nodes) out << id << ',' << area.id << ',' << area.root << '\n';
  for (int id : areas.unclustered) out << id << ",-1,-1\n";

  std::cout << "partition: " << areas.areas.size() << " area(s), "
            << areas.unclustered.size() << " unclustered node(s), table in "
            << dir.string() << '\n';
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"distribution system state estimation toolkit"};
  app.require_subcommand(1);

  RunArgs args;
  CLI::App* estimate = app.add_subcommand("estimate", "static estimation campaign");
  add_common_options(estimate, args);
  CLI::App* realtime =
      app.add_subcommand("realtime", "one gradient step per tick over a scenario stream");
  add_common_options(realtime, args);
  realtime->add_option("--timeseries", args.timeseries,
                       "tick CSV (synthetic diurnal profile when omitted)");
  realtime->add_option("--ticks", args.ticks, "synthetic stream length");
  CLI::App* observability =
      app.add_subcommand("observability", "measurement-matrix rank analysis");
  add_common_options(observability, args);
  CLI::App* compare =
      app.add_subcommand("compare", "paired gradient vs Gauss-Newton campaign");
  add_common_options(compare, args);
  CLI::App* generate = app.add_subcommand("generate", "write a random feeder document");
  add_common_options(generate, args);
  CLI::App* partition_cmd =
      app.add_subcommand("partition", "area decomposition table for given roots");
  add_common_options(partition_cmd, args);

  CLI11_PARSE(app, argc, argv);

  try {
    if (estimate->parsed()) return cmd_estimate(args);
    if (realtime->parsed()) return cmd_realtime(args);
    if (observability->parsed()) return cmd_observability(args);
    if (compare->parsed()) return cmd_compare(args);
    if (generate->parsed()) return cmd_generate(args);
    if (partition_cmd->parsed()) return cmd_partition(args);
  } catch (const dsse::Error& ex) {
    std::cerr << "error: " << ex.what() << '\n';
    return 1;
  }
  return 0;
}
