#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <complex>

#include "dsse/powerflow.hpp"
#include "helpers.hpp"

using namespace dsse;
using namespace testutil;

namespace {

// Closed-form two-bus solution: constant-power injection s (negative for a
// load) at the end of one line with impedance z and a slack at voltage v0.
// The node draws branch current -conj(s / V), so the receiving voltage
// solves V = v0 + z * conj(s / V), iterated here to machine precision as an
// implementation-independent oracle.
std::complex<double> two_bus_voltage(std::complex<double> z,
                                     std::complex<double> s, double v0) {
  std::complex<double> v(v0, 0.0);
  for (int k = 0; k < 200; ++k) v = v0 + z * std::conj(s / v);
  return v;
}

}  // namespace

TEST_CASE("two-bus solution matches the fixed-point oracle") {
  FeederModel model = chain_feeder(1, 0.02, 0.04);
  Injections inj = Injections::zero(1);
  inj.p[0] = -0.3;
  inj.q[0] = -0.12;
  PowerFlowSolution sol = solve_nonlinear(model, inj);

  const std::complex<double> expect =
      two_bus_voltage({0.02, 0.04}, {-0.3, -0.12}, 1.0);
  CHECK(std::abs(sol.voltage[0] - expect) <= 1e-10);
  CHECK(sol.v[0] == doctest::Approx(std::norm(expect)).epsilon(1e-12));
  CHECK(sol.mismatch <= 1e-10);
  CHECK(sol.sweeps > 1);
}

TEST_CASE("reported mismatch agrees with an external recomputation") {
  FeederModel model = forked_feeder();
  Injections inj = nominal_injections(model, 0.9);
  PowerFlowSolution sol = solve_nonlinear(model, inj);
  CHECK(power_mismatch(model, inj, sol) == doctest::Approx(sol.mismatch));
  CHECK(sol.mismatch <= 1e-10);

  // Perturbing the answer must show up in the mismatch.
  PowerFlowSolution bad = sol;
  bad.voltage[2] += std::complex<double>(0.01, 0.0);
  CHECK(power_mismatch(model, inj, bad) > 1e-4);
}

TEST_CASE("branch quantities satisfy Kirchhoff at the sending end") {
  FeederModel model = forked_feeder();
  Injections inj = nominal_injections(model, 0.8);
  PowerFlowSolution sol = solve_nonlinear(model, inj);
  const StateIndex& idx = model.state_index();

  for (size_t l = 0; l < model.lines().size(); ++l) {
    const LineRecord& line = model.lines()[l];
    // Line current equals downstream load current plus child-line currents.
    const int e = idx.index_of(line.to, Phase::A);
    const std::complex<double> s(inj.p[e], inj.q[e]);
    std::complex<double> expect = -std::conj(s / sol.voltage[e]);
    for (int child : model.children(line.to)) {
      const int cl = model.parent_line(child);
      expect += sol.branch_current[static_cast<size_t>(cl)][0];
    }
    CHECK(std::abs(sol.branch_current[l][0] - expect) <= 1e-9);

    const int from_entry =
        line.from == model.slack_id() ? -1 : idx.index_of(line.from, Phase::A);
    const std::complex<double> v_from =
        from_entry < 0 ? std::complex<double>(1.0, 0.0)
                       : sol.voltage[from_entry];
    CHECK(std::abs(sol.branch_power[l][0] -
                   v_from * std::conj(sol.branch_current[l][0])) <= 1e-9);
    CHECK(sol.branch_current_sq[l][0] ==
          doctest::Approx(std::norm(sol.branch_current[l][0])).epsilon(1e-12));
  }
}

TEST_CASE("linear model tracks the sweep solution to second order") {
  FeederModel model = chain_feeder(8, 0.008, 0.016, 0.03);
  SensitivityModel sens = SensitivityModel::build(model);

  Injections light = nominal_injections(model, 0.1);
  Injections heavy = nominal_injections(model, 1.0);

  const double gap_light =
      (solve_nonlinear(model, light).v - solve_linear(sens, light))
          .lpNorm<Eigen::Infinity>();
  const double gap_heavy =
      (solve_nonlinear(model, heavy).v - solve_linear(sens, heavy))
          .lpNorm<Eigen::Infinity>();

  CHECK(gap_light < 1e-4);
  CHECK(gap_heavy < 1e-2);
  // Error should shrink roughly quadratically with loading, not linearly.
  CHECK(gap_light * 20.0 < gap_heavy);
}

TEST_CASE("diagonal impedance decouples the phases") {
  std::vector<NodeRecord> nodes(3);
  for (int i = 0; i < 3; ++i) {
    nodes[static_cast<size_t>(i)].id = i;
    nodes[static_cast<size_t>(i)].phases = PhaseSet::abc();
    nodes[static_cast<size_t>(i)].kind = i == 0 ? NodeKind::Slack : NodeKind::Load;
    if (i > 0)
      for (int k = 0; k < 3; ++k)
        nodes[static_cast<size_t>(i)].boxes.push_back(PqBox{-1, 0, -1, 1});
  }
  std::vector<LineRecord> lines(2);
  for (int l = 0; l < 2; ++l) {
    lines[static_cast<size_t>(l)].from = l;
    lines[static_cast<size_t>(l)].to = l + 1;
    lines[static_cast<size_t>(l)].z = Eigen::Matrix3cd::Zero();
    for (int d = 0; d < 3; ++d)
      lines[static_cast<size_t>(l)].z(d, d) = {0.01 + 0.001 * d, 0.02};
  }
  FeederModel model = FeederModel::from_records(std::move(nodes), std::move(lines), {});
  const StateIndex& idx = model.state_index();

  // Load phase A only; phases B and C must stay at the slack voltage.
  Injections inj = Injections::zero(idx.size());
  inj.p[idx.index_of(2, Phase::A)] = -0.2;
  inj.q[idx.index_of(2, Phase::A)] = -0.05;
  PowerFlowSolution sol = solve_nonlinear(model, inj);

  for (int node : {1, 2})
    for (Phase ph : {Phase::B, Phase::C}) {
      const int e = idx.index_of(node, ph);
      CHECK(std::abs(std::abs(sol.voltage[e]) - 1.0) <= 1e-12);
    }
  CHECK(std::abs(sol.voltage[idx.index_of(2, Phase::A)]) < 0.999);

  // The loaded phase matches a single-phase feeder with the same series path.
  FeederModel equiv = chain_feeder(2, 0.01, 0.02);
  Injections einj = Injections::zero(2);
  einj.p[1] = -0.2;
  einj.q[1] = -0.05;
  PowerFlowSolution esol = solve_nonlinear(equiv, einj);
  CHECK(std::abs(sol.voltage[idx.index_of(2, Phase::A)] - esol.voltage[1]) <= 1e-9);
}

TEST_CASE("unsupportable load reports collapse") {
  FeederModel model = chain_feeder(1, 0.5, 1.0);
  Injections inj = Injections::zero(1);
  inj.p[0] = -5.0;
  inj.q[0] = -2.0;
  CHECK_THROWS_AS(solve_nonlinear(model, inj), PowerFlowError);
}

TEST_CASE("injection sanity bound rejects absurd inputs") {
  FeederModel model = chain_feeder(2);
  Injections inj = Injections::zero(2);
  inj.p[0] = -50.0;
  CHECK_THROWS_AS(solve_nonlinear(model, inj), PowerFlowError);
}

TEST_CASE("three-phase mutual coupling still reaches a consistent fixed point") {
  FeederSpec spec;
  spec.size = 20;
  spec.three_phase = true;
  spec.seed = 77;
  FeederModel model = generate_feeder(spec);
  Injections inj = nominal_injections(model, 0.7);
  PowerFlowSolution sol = solve_nonlinear(model, inj);
  CHECK(sol.mismatch <= 1e-10);
  CHECK(power_mismatch(model, inj, sol) <= 1e-10);
  for (int k = 0; k < sol.v.size(); ++k) {
    CHECK(sol.v[k] > 0.8);
    CHECK(sol.v[k] == doctest::Approx(std::norm(sol.voltage[k])).epsilon(1e-12));
  }
}
