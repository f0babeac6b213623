// Acceptance suite: one pass/fail line per criterion, nonzero exit when any
// criterion fails.  Tolerances and budgets are pinned in the code next to
// each check.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "dsse/estimator.hpp"
#include "dsse/feeder.hpp"
#include "dsse/measurements.hpp"
#include "dsse/multiarea.hpp"
#include "dsse/observability.hpp"
#include "dsse/powerflow.hpp"
#include "dsse/sensitivity.hpp"
#include "helpers.hpp"

using namespace dsse;

namespace {

double now_seconds() {
  using clock = std::chrono::steady_clock;
  static const clock::time_point start = clock::now();
  return std::chrono::duration<double>(clock::now() - start).count();
}

// Per-entry percent voltage-magnitude error, averaged and maxed over entries.
std::pair<double, double> magnitude_error_pct(const Eigen::VectorXd& v_est,
                                              const Eigen::VectorXd& v_true) {
  double sum = 0.0, worst = 0.0;
  for (Eigen::Index k = 0; k < v_true.size(); ++k) {
    const double mag_est = std::sqrt(std::max(0.0, v_est[k]));
    const double mag_true = std::sqrt(v_true[k]);
    const double pct = 100.0 * std::abs(mag_est - mag_true) / mag_true;
    sum += pct;
    worst = std::max(worst, pct);
  }
  return {sum / static_cast<double>(v_true.size()), worst};
}

double stacked_norm_sq(const Injections& a, const Injections& b) {
  return (a.p - b.p).squaredNorm() + (a.q - b.q).squaredNorm();
}

struct CriterionResult {
  bool pass = false;
  std::string detail;
};

// 1. Distributed rounds reproduce the centralized iteration on random
// feeders and partitions: per-round state difference <= 1e-12 over 100
// rounds, 20 feeders, finishing inside 60 s.
CriterionResult criterion_1() {
  const double t0 = now_seconds();
  Rng rng(0x0A11);
  double worst = 0.0;
  for (int trial = 0; trial < 20; ++trial) {
    FeederSpec spec;
    spec.size = rng.uniform_int(20, 500);
    spec.seed = 0xFEED0 + static_cast<std::uint64_t>(trial);
    const FeederModel model = generate_feeder(spec);
    const SensitivityModel sens = SensitivityModel::build(model);
    const MeasurementSet ms = testutil::interior_instance(
        model, 0xBEA7 + static_cast<std::uint64_t>(trial),
        std::max(1, spec.size / 12));

    const std::vector<int> roots =
        testutil::pick_non_nested_roots(model, rng.uniform_int(1, 6), rng);
    const AreaPartition part = partition(model, roots);

    const ConvergenceConstants c = estimate_constants(ms, sens);
    const double eps = c.auto_epsilon();

    MultiAreaOptions mopts;
    mopts.epsilon = eps;
    MultiAreaEstimator dist(model, sens, part, ms, VoltageFeedback::linear(),
                            mopts);

    EstimateState central;
    central.z = initial_state(ms);
    central.v = sens.predict_voltage(central.z);
    central.epsilon = eps;
    for (int round = 0; round < 100; ++round) {
      dist.run_round();
      central = step_realtime(central, ms, sens, VoltageFeedback::linear(), eps);
      worst = std::max(worst, testutil::max_abs_diff(dist.z(), central.z));
    }
  }
  const double elapsed = now_seconds() - t0;
  CriterionResult r;
  r.pass = worst <= 1e-12 && elapsed < 60.0;
  char buf[128];
  std::snprintf(buf, sizeof(buf), "max per-round diff %.2e, %.1f s", worst,
                elapsed);
  r.detail = buf;
  return r;
}

// 2. Analytic WLS gradient matches central differences to 1e-6 relative on
// 50 random 10-node instances inside 5 s.
CriterionResult criterion_2() {
  const double t0 = now_seconds();
  double worst = 0.0;
  for (int trial = 0; trial < 50; ++trial) {
    FeederSpec spec;
    spec.size = 10;
    spec.seed = 0x6AD0 + static_cast<std::uint64_t>(trial);
    const FeederModel model = generate_feeder(spec);
    const SensitivityModel sens = SensitivityModel::build(model);
    const MeasurementSet ms = testutil::interior_instance(
        model, 0x0D0 + static_cast<std::uint64_t>(trial), 2);

    Rng zr(0x5A + static_cast<std::uint64_t>(trial));
    Injections z = initial_state(ms);
    for (int k = 0; k < ms.size(); ++k) {
      z.p[k] += zr.uniform(-0.5, 0.5);
      z.q[k] += zr.uniform(-0.5, 0.5);
    }
    const Injections analytic =
        wls_gradient(ms, sens, z, sens.predict_voltage(z));
    const Injections numeric = testutil::numeric_gradient(ms, sens, z);
    const double scale = std::max(
        {numeric.p.lpNorm<Eigen::Infinity>(),
         numeric.q.lpNorm<Eigen::Infinity>(), 1e-6});
    worst = std::max(worst, testutil::max_abs_diff(analytic, numeric) / scale);
  }
  const double elapsed = now_seconds() - t0;
  CriterionResult r;
  r.pass = worst <= 1e-6 && elapsed < 5.0;
  char buf[128];
  std::snprintf(buf, sizeof(buf), "max relative error %.2e, %.1f s", worst,
                elapsed);
  r.detail = buf;
  return r;
}

// 3. With linear feedback and an interior optimum the projected-gradient
// solve lands on the dense normal-equation solution within 1e-8 (inf-norm)
// on 20 instances inside 10 s.
CriterionResult criterion_3() {
  const double t0 = now_seconds();
  double worst = 0.0;
  for (int trial = 0; trial < 20; ++trial) {
    FeederSpec spec;
    spec.size = 8 + 2 * trial;
    spec.seed = 0x0B7 + static_cast<std::uint64_t>(trial);
    const FeederModel model = generate_feeder(spec);
    const SensitivityModel sens = SensitivityModel::build(model);
    const MeasurementSet ms = testutil::interior_instance(
        model, 0x3E5 + static_cast<std::uint64_t>(trial), 3);

    SolveOptions opts;
    opts.delta = 1e-14;
    opts.max_iterations = 300000;
    const EstimateState est =
        solve_gradient(ms, sens, VoltageFeedback::linear(), opts);
    const Injections exact = testutil::dense_wls_solution(ms, sens);
    worst = std::max(worst, testutil::max_abs_diff(est.z, exact));
  }
  const double elapsed = now_seconds() - t0;
  CriterionResult r;
  r.pass = worst <= 1e-8 && elapsed < 10.0;
  char buf[128];
  std::snprintf(buf, sizeof(buf), "max distance to dense solution %.2e, %.1f s",
                worst, elapsed);
  r.detail = buf;
  return r;
}

// 4. For step sizes {0.5, 1.0, 1.5} x M/L^2 the measured per-iteration
// contraction of ||z - z*||^2 never exceeds 1 + eps^2 L^2 - 2 eps M plus
// 1e-9, on interior iterates, inside 10 s.
CriterionResult criterion_4() {
  const double t0 = now_seconds();
  double worst_excess = -1.0;
  for (int trial = 0; trial < 4; ++trial) {
    FeederSpec spec;
    spec.size = 10 + 5 * trial;
    spec.seed = 0xC0 + static_cast<std::uint64_t>(trial);
    const FeederModel model = generate_feeder(spec);
    const SensitivityModel sens = SensitivityModel::build(model);
    const MeasurementSet ms = testutil::interior_instance(
        model, 0x4C + static_cast<std::uint64_t>(trial), 2);

    const ConvergenceConstants c = estimate_constants(ms, sens);
    const Injections star = solve_reference(ms, sens);

    for (double mult : {0.5, 1.0, 1.5}) {
      const double eps = mult * c.auto_epsilon();
      const double rho = c.contraction(eps);

      EstimateState cur;
      cur.z = initial_state(ms);
      Rng pr(0x9E + static_cast<std::uint64_t>(trial));
      for (int k = 0; k < ms.size(); ++k) {
        cur.z.p[k] += pr.uniform(-0.2, 0.2);
        cur.z.q[k] += pr.uniform(-0.2, 0.2);
      }
      cur.v = sens.predict_voltage(cur.z);
      cur.epsilon = eps;

      double prev_sq = stacked_norm_sq(cur.z, star);
      for (int step = 0; step < 80 && prev_sq > 1e-20; ++step) {
        cur = step_realtime(cur, ms, sens, VoltageFeedback::linear(), eps);
        const double cur_sq = stacked_norm_sq(cur.z, star);
        worst_excess = std::max(worst_excess, cur_sq / prev_sq - rho);
        prev_sq = cur_sq;
      }
    }
  }
  const double elapsed = now_seconds() - t0;
  CriterionResult r;
  r.pass = worst_excess <= 1e-9 && elapsed < 10.0;
  char buf[128];
  std::snprintf(buf, sizeof(buf), "worst ratio excess over bound %.2e, %.1f s",
                worst_excess, elapsed);
  r.detail = buf;
  return r;
}

// 5. Full pseudo coverage of every load entry yields a 100% observability
// index on 25 random feeders, and with no meters removing a single pseudo
// channel drops the rank by exactly one; inside 10 s.
CriterionResult criterion_5() {
  const double t0 = now_seconds();
  const PseudoCoverageReport cover = verify_full_pseudo_coverage(25, 0x0B5);
  bool all_hundred = cover.all_observable();
  for (double idx : cover.indices)
    if (idx != 100.0) all_hundred = false;

  FeederSpec spec;
  spec.size = 20;
  spec.seed = 0x0B6;
  const FeederModel model = generate_feeder(spec);
  const SensitivityModel sens = SensitivityModel::build(model);
  ObservabilityChannels channels;
  for (int k = 0; k < sens.index().size(); ++k) {
    if (model.node(sens.index().entry(k).node).kind != NodeKind::Load) continue;
    channels.pseudo_p.push_back(k);
    channels.pseudo_q.push_back(k);
  }
  const ObservabilityReport full = analyze_observability(model, sens, channels);
  channels.pseudo_p.erase(channels.pseudo_p.begin() +
                          static_cast<std::ptrdiff_t>(channels.pseudo_p.size() / 2));
  const ObservabilityReport dropped =
      analyze_observability(model, sens, channels);

  const bool rank_drop = full.rank == full.state_dimension &&
                         dropped.rank == full.rank - 1;
  const double elapsed = now_seconds() - t0;
  CriterionResult r;
  r.pass = all_hundred && rank_drop && elapsed < 10.0;
  char buf[160];
  std::snprintf(buf, sizeof(buf),
                "%d/%d feeders at 100%%, rank %d -> %d of %d, %.1f s",
                cover.full_rank_trials, cover.trials, full.rank, dropped.rank,
                full.state_dimension, elapsed);
  r.detail = buf;
  return r;
}

// 6. On a 37-node feeder at nominal load the mean gap between the linear and
// nonlinear voltage solutions stays below 3% of the nominal squared-voltage
// level; inside 5 s.
CriterionResult criterion_6() {
  const double t0 = now_seconds();
  FeederSpec spec;
  spec.size = 36;
  spec.seed = 0x0B8;
  const FeederModel model = generate_feeder(spec);
  const SensitivityModel sens = SensitivityModel::build(model);
  const Injections truth = nominal_injections(model);

  const PowerFlowSolution nl = solve_nonlinear(model, truth);
  const Eigen::VectorXd lin = solve_linear(sens, truth);
  const double mean_gap = (lin - nl.v).cwiseAbs().mean();
  const double level = nl.v.mean();

  const double elapsed = now_seconds() - t0;
  CriterionResult r;
  r.pass = mean_gap <= 0.03 * level && elapsed < 5.0;
  char buf[128];
  std::snprintf(buf, sizeof(buf), "mean gap %.2e vs budget %.2e, %.1f s",
                mean_gap, 0.03 * level, elapsed);
  r.detail = buf;
  return r;
}

// Shared 200-trial study for criteria 7 and 8: 37-node feeder, 3 voltage
// meters at 1% magnitude noise, all-load pseudo channels at 50% relative
// noise, projected-gradient estimates paired with flat-start Gauss-Newton
// on identical seeds.
struct StaticStudy {
  double grad_mean = 0.0;       // mean over trials of the per-node average, %
  double grad_mean_max = 0.0;   // mean over trials of the per-trial max, %
  double grad_paired_mean = 0.0;  // gradient mean on the trials GN finished
  double gn_mean = 0.0;           // Gauss-Newton mean on the same trials
  int gn_used = 0;
  std::vector<int> iterations;
  double elapsed = 0.0;
};

StaticStudy run_static_study() {
  const double t0 = now_seconds();
  StaticStudy out;

  FeederSpec spec;
  spec.size = 36;
  spec.seed = 0x0B9;
  const FeederModel model = generate_feeder(spec);
  const SensitivityModel sens = SensitivityModel::build(model);
  const Injections truth = nominal_injections(model);
  const PowerFlowSolution truth_flow = solve_nonlinear(model, truth);

  NoisePolicy noise;
  noise.sigma_mag = 0.01;
  noise.sigma_rel = 0.5;

  Rng mr(0x0BA);
  std::vector<int> meter_nodes;
  while (meter_nodes.size() < 3) {
    const int node = mr.uniform_int(1, spec.size);
    if (std::find(meter_nodes.begin(), meter_nodes.end(), node) ==
        meter_nodes.end())
      meter_nodes.push_back(node);
  }

  double gn_sum = 0.0;
  double grad_sum = 0.0, grad_paired_sum = 0.0, grad_max_sum = 0.0;
  for (int trial = 0; trial < 200; ++trial) {
    const std::uint64_t seed = 0x51A7 + 31 * static_cast<std::uint64_t>(trial);
    const MeasurementSet ms =
        synthesize(model, truth, truth_flow, noise,
                   MeterPlacement::list(meter_nodes), seed);

    SolveOptions opts;
    opts.delta = 1e-6;
    opts.max_iterations = 2000;
    opts.record_trace = false;
    const EstimateState est =
        solve_gradient(ms, sens, VoltageFeedback::linear(), opts);
    const auto [avg, worst] = magnitude_error_pct(est.v, truth_flow.v);
    grad_sum += avg;
    grad_max_sum += worst;
    out.iterations.push_back(est.iterations);

    const GaussNewtonResult gn = solve_gauss_newton(ms, model);
    const auto [gn_avg, gn_worst] = magnitude_error_pct(gn.state.v, truth_flow.v);
    if (std::isfinite(gn_avg)) {
      gn_sum += gn_avg;
      grad_paired_sum += avg;
      ++out.gn_used;
    }
    (void)gn_worst;
  }
  out.grad_mean = grad_sum / 200.0;
  out.grad_mean_max = grad_max_sum / 200.0;
  if (out.gn_used > 0) {
    out.gn_mean = gn_sum / out.gn_used;
    out.grad_paired_mean = grad_paired_sum / out.gn_used;
  }
  out.elapsed = now_seconds() - t0;
  return out;
}

// 7. Static accuracy: gradient mean per-node error <= 1.0%, mean per-trial
// max <= 2.5%, and strictly better than the Gauss-Newton mean on paired
// seeds; inside 5 min.
CriterionResult criterion_7(const StaticStudy& study) {
  CriterionResult r;
  r.pass = study.grad_mean <= 1.0 && study.grad_mean_max <= 2.5 &&
           study.gn_used > 0 && study.grad_paired_mean < study.gn_mean &&
           study.elapsed < 300.0;
  char buf[192];
  std::snprintf(buf, sizeof(buf),
                "gradient mean %.3f%% max-mean %.3f%%, paired %.3f%% vs GN "
                "%.3f%% on %d/200, %.1f s",
                study.grad_mean, study.grad_mean_max, study.grad_paired_mean,
                study.gn_mean, study.gn_used, study.elapsed);
  r.detail = buf;
  return r;
}

// 8. The same runs reach the 1e-6 voltage-change stop within 40 iterations
// at the 90th percentile.
CriterionResult criterion_8(const StaticStudy& study) {
  std::vector<int> sorted = study.iterations;
  std::sort(sorted.begin(), sorted.end());
  const size_t idx = (sorted.size() * 9 + 9) / 10 - 1;  // ceil(0.9 n) - 1
  const int p90 = sorted[idx];
  CriterionResult r;
  r.pass = p90 <= 40;
  char buf[96];
  std::snprintf(buf, sizeof(buf), "90th percentile %d iterations (max %d)",
                p90, sorted.back());
  r.detail = buf;
  return r;
}

// 9. Real-time tracking over a 3600-tick diurnal stream with one nonlinear-
// feedback step per tick: running-average per-node error <= 1.0%, running-
// average per-tick max <= 3.0%, and the sampled long-run ||z - z*||^2 stays
// inside twice the tracking ball built from sampled drift and feedback-gap
// terms; inside 5 min at roughly 200 nodes.
CriterionResult criterion_9() {
  const double t0 = now_seconds();
  FeederSpec spec;
  spec.size = 200;
  spec.seed = 0x0BB;
  const FeederModel model = generate_feeder(spec);
  const SensitivityModel sens = SensitivityModel::build(model);

  DiurnalSpec diurnal;
  diurnal.ticks = 3600;
  diurnal.seed = 0x0BC;
  const std::vector<Scenario> stream = generate_diurnal(model, diurnal);

  NoisePolicy noise;
  noise.sigma_mag = 0.01;
  noise.sigma_rel = 0.5;

  Rng mr(0x0BD);
  std::vector<int> meter_nodes;
  while (meter_nodes.size() < 10) {
    const int node = mr.uniform_int(1, spec.size);
    if (std::find(meter_nodes.begin(), meter_nodes.end(), node) ==
        meter_nodes.end())
      meter_nodes.push_back(node);
  }
  const MeterPlacement placement = MeterPlacement::list(meter_nodes);

  const VoltageFeedback feedback = VoltageFeedback::nonlinear(model);

  const PowerFlowSolution flow0 = solve_nonlinear(model, stream[0].truth);
  const MeasurementSet ms0 =
      synthesize(model, stream[0].truth, flow0, noise, placement, 0x7100);
  ConvergenceConstants c = estimate_constants(ms0, sens);
  const double eps = c.auto_epsilon();

  EstimateState cur;
  cur.z = initial_state(ms0);
  cur.v = sens.predict_voltage(cur.z);
  cur.epsilon = eps;

  double avg_sum = 0.0, max_sum = 0.0;
  double drift_max = 0.0, dist_sq_max = 0.0;
  bool have_prev_star = false;
  Injections prev_star;
  int prev_star_tick = -2;

  for (int t = 0; t < diurnal.ticks; ++t) {
    const PowerFlowSolution flow = solve_nonlinear(model, stream[t].truth);
    const MeasurementSet ms =
        synthesize(model, stream[t].truth, flow, noise, placement,
                   0x7200 + static_cast<std::uint64_t>(t));
    cur = step_realtime(cur, ms, sens, feedback, eps);

    const auto [avg, worst] = magnitude_error_pct(cur.v, flow.v);
    avg_sum += avg;
    max_sum += worst;

    const bool sample = t % 300 == 0 || (t - 1) % 300 == 0 || t == diurnal.ticks - 1;
    if (sample) {
      const Injections star = solve_reference(ms, sens);
      if (have_prev_star && prev_star_tick == t - 1) {
        const double step = std::sqrt(stacked_norm_sq(star, prev_star));
        drift_max = std::max(drift_max, step);
      }
      if (t >= diurnal.ticks / 2)
        dist_sq_max = std::max(dist_sq_max, stacked_norm_sq(cur.z, star));
      prev_star = star;
      prev_star_tick = t;
      have_prev_star = true;
    }
  }

  c.drift = drift_max;
  c.feedback_gap_sq = estimate_feedback_gap(ms0, sens, model, 30, 0x0BE);
  const double ball = c.tracking_ball_sq(eps);

  const double run_avg = avg_sum / diurnal.ticks;
  const double run_max = max_sum / diurnal.ticks;
  const double elapsed = now_seconds() - t0;
  CriterionResult r;
  r.pass = run_avg <= 1.0 && run_max <= 3.0 && dist_sq_max <= 2.0 * ball &&
           elapsed < 300.0;
  char buf[192];
  std::snprintf(buf, sizeof(buf),
                "running avg %.3f%% max %.3f%%, ||z-z*||^2 %.2e vs ball "
                "%.2e, %.1f s",
                run_avg, run_max, dist_sq_max, 2.0 * ball, elapsed);
  r.detail = buf;
  return r;
}

// 10. Multi-phase consistency: dense sensitivities match the path-
// enumeration oracle to 1e-12, and the distributed multi-phase coupling
// reproduces the centralized iteration to 1e-12 on 10 random three-phase
// feeders inside 30 s.
CriterionResult criterion_10() {
  const double t0 = now_seconds();
  Rng rng(0x0BF);
  double worst_sens = 0.0, worst_round = 0.0;
  for (int trial = 0; trial < 10; ++trial) {
    FeederSpec spec;
    spec.size = 12 + 2 * trial;
    spec.three_phase = true;
    spec.seed = 0xABC0 + static_cast<std::uint64_t>(trial);
    const FeederModel model = generate_feeder(spec);
    const SensitivityModel sens = SensitivityModel::build(model);
    const StateIndex& index = sens.index();

    for (int a = 0; a < index.size(); ++a) {
      const StateIndex::Entry& ea = index.entry(a);
      for (int b = 0; b < index.size(); ++b) {
        const StateIndex::Entry& eb = index.entry(b);
        const auto [rr, xx] =
            testutil::sensitivity_oracle(model, ea.node, ea.phase, eb.node,
                                         eb.phase);
        worst_sens = std::max(worst_sens, std::abs(sens.R()(a, b) - rr));
        worst_sens = std::max(worst_sens, std::abs(sens.X()(a, b) - xx));
      }
    }

    const MeasurementSet ms = testutil::interior_instance(
        model, 0x77A + static_cast<std::uint64_t>(trial), 3);
    const std::vector<int> roots =
        testutil::pick_non_nested_roots(model, 2 + trial % 3, rng);
    const AreaPartition part = partition(model, roots);
    const ConvergenceConstants c = estimate_constants(ms, sens);
    const double eps = c.auto_epsilon();

    MultiAreaOptions mopts;
    mopts.epsilon = eps;
    MultiAreaEstimator dist(model, sens, part, ms, VoltageFeedback::linear(),
                            mopts);
    EstimateState central;
    central.z = initial_state(ms);
    central.v = sens.predict_voltage(central.z);
    central.epsilon = eps;
    for (int round = 0; round < 10; ++round) {
      dist.run_round();
      central = step_realtime(central, ms, sens, VoltageFeedback::linear(), eps);
      worst_round =
          std::max(worst_round, testutil::max_abs_diff(dist.z(), central.z));
    }
  }
  const double elapsed = now_seconds() - t0;
  CriterionResult r;
  r.pass = worst_sens <= 1e-12 && worst_round <= 1e-12 && elapsed < 30.0;
  char buf[160];
  std::snprintf(buf, sizeof(buf),
                "max sensitivity diff %.2e, max coupling diff %.2e, %.1f s",
                worst_sens, worst_round, elapsed);
  r.detail = buf;
  return r;
}

}  // namespace

int main() {
  int failures = 0;
  const auto report = [&](int number, const char* behavior,
                          const CriterionResult& result) {
    std::printf("[%s] criterion %d: %s (%s)\n", result.pass ? "PASS" : "FAIL",
                number, behavior, result.detail.c_str());
    std::fflush(stdout);
    if (!result.pass) ++failures;
  };

  report(1, "distributed rounds match the centralized iteration",
         criterion_1());
  report(2, "analytic gradient matches central differences", criterion_2());
  report(3, "projected-gradient optimum matches the dense WLS solution",
         criterion_3());
  report(4, "per-iteration contraction stays within the step-size bound",
         criterion_4());
  report(5, "full pseudo coverage is observable and one dropped channel "
            "costs one rank",
         criterion_5());
  report(6, "linear voltage model tracks the nonlinear solution at nominal "
            "load",
         criterion_6());
  const StaticStudy study = run_static_study();
  report(7, "static accuracy within budget and ahead of Gauss-Newton",
         criterion_7(study));
  report(8, "convergence within the iteration budget at the 90th percentile",
         criterion_8(study));
  report(9, "real-time tracking stays inside the error and tracking-ball "
            "budgets",
         criterion_9());
  report(10, "multi-phase sensitivities and distributed coupling are "
             "consistent",
         criterion_10());

  if (failures == 0) std::printf("all criteria passed\n");
  return failures == 0 ? 0 : 1;
}
