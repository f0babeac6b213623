#pragma once

// Shared fixtures and independent oracles for the test suites.  Oracles here
// recompute expected values from first principles (raw line data, explicit
// path enumeration, dense algebra) so the library is never checked against
// itself.

#include <Eigen/Dense>
#include <algorithm>
#include <complex>
#include <set>
#include <vector>

#include "dsse/estimator.hpp"
#include "dsse/feeder.hpp"
#include "dsse/measurements.hpp"
#include "dsse/sensitivity.hpp"

namespace testutil {

using namespace dsse;

// Single-phase chain 0 - 1 - ... - n with per-line impedance r + jx.
inline FeederModel chain_feeder(int n, double r = 0.01, double x = 0.02,
                                double p_peak = 0.05) {
  std::vector<NodeRecord> nodes;
  std::vector<LineRecord> lines;
  for (int id = 0; id <= n; ++id) {
    NodeRecord node;
    node.id = id;
    node.phases = PhaseSet::single(Phase::A);
    node.kind = id == 0 ? NodeKind::Slack : NodeKind::Load;
    if (id != 0)
      node.boxes.push_back(PqBox{-2.0 * p_peak, 0.0, -p_peak, p_peak});
    nodes.push_back(node);
    if (id != 0) {
      LineRecord line;
      line.from = id - 1;
      line.to = id;
      line.z = Eigen::MatrixXcd::Constant(1, 1, std::complex<double>(r, x));
      lines.push_back(line);
    }
  }
  return FeederModel::from_records(std::move(nodes), std::move(lines), {});
}

// Small hand-drawn tree used across suites:
// 0 -> 1 -> {2 -> {3, 4}, 5 -> 6}
inline FeederModel forked_feeder(double r = 0.01, double x = 0.02) {
  std::vector<NodeRecord> nodes;
  for (int id = 0; id <= 6; ++id) {
    NodeRecord node;
    node.id = id;
    node.phases = PhaseSet::single(Phase::A);
    node.kind = id == 0 ? NodeKind::Slack : NodeKind::Load;
    if (id != 0) node.boxes.push_back(PqBox{-0.1, 0.0, -0.05, 0.05});
    nodes.push_back(node);
  }
  std::vector<std::pair<int, int>> edges = {{0, 1}, {1, 2}, {2, 3},
                                            {2, 4}, {1, 5}, {5, 6}};
  std::vector<LineRecord> lines;
  for (size_t k = 0; k < edges.size(); ++k) {
    LineRecord line;
    line.from = edges[k].first;
    line.to = edges[k].second;
    line.z = Eigen::MatrixXcd::Constant(
        1, 1, std::complex<double>(r * static_cast<double>(k + 1), x));
    lines.push_back(line);
  }
  return FeederModel::from_records(std::move(nodes), std::move(lines), {});
}

// Brute-force common-path oracle: line-id sets of both slack paths,
// intersected, in slack-to-node order.
inline std::vector<int> path_intersection(const FeederModel& model, int i, int j) {
  const std::vector<int>& pi = model.path_lines(i);
  std::set<int> pj(model.path_lines(j).begin(), model.path_lines(j).end());
  std::vector<int> out;
  for (int line : pi)
    if (pj.count(line)) out.push_back(line);
  return out;
}

// Independent multi-phase sensitivity oracle: enumerate the common path with
// the brute-force intersection, pad each 3x3 line impedance over global
// phases, conjugate the sum, rotate, and split into the R / X pair.
inline std::pair<double, double> sensitivity_oracle(const FeederModel& model,
                                                    int node_i, Phase phase_i,
                                                    int node_j, Phase phase_j) {
  Eigen::Matrix3cd sum = Eigen::Matrix3cd::Zero();
  for (int line_idx : path_intersection(model, node_i, node_j)) {
    const LineRecord& line = model.lines()[static_cast<size_t>(line_idx)];
    const PhaseSet phases = model.node(line.to).phases;
    std::vector<Phase> list = phases.list();
    for (size_t r = 0; r < list.size(); ++r)
      for (size_t c = 0; c < list.size(); ++c)
        sum(static_cast<int>(list[r]), static_cast<int>(list[c])) +=
            line.z(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c));
  }
  const std::complex<double> z =
      std::conj(sum(static_cast<int>(phase_i), static_cast<int>(phase_j)));
  const int k = static_cast<int>(phase_i) - static_cast<int>(phase_j);
  const double angle = -2.0 * M_PI / 3.0 * static_cast<double>(k);
  const std::complex<double> rot(std::cos(angle), std::sin(angle));
  const std::complex<double> c = z * rot;
  return {2.0 * c.real(), -2.0 * c.imag()};
}

// Dense normal-equation solution of the interior WLS problem, stacked
// x = [p_free; q_free]; assumes the optimum lies strictly inside the boxes.
inline Injections dense_wls_solution(const MeasurementSet& ms,
                                     const SensitivityModel& sens) {
  std::vector<int> free;
  for (int k = 0; k < ms.size(); ++k)
    if (ms.has_pseudo[static_cast<size_t>(k)]) free.push_back(k);
  const Eigen::Index f = static_cast<Eigen::Index>(free.size());
  const Eigen::Index m = static_cast<Eigen::Index>(ms.meters.size());

  Eigen::MatrixXd A = Eigen::MatrixXd::Zero(2 * f, 2 * f);
  Eigen::VectorXd b = Eigen::VectorXd::Zero(2 * f);
  for (Eigen::Index col = 0; col < f; ++col) {
    const int e = free[static_cast<size_t>(col)];
    const double wp = 1.0 / (ms.sigma_p[e] * ms.sigma_p[e]);
    const double wq = 1.0 / (ms.sigma_q[e] * ms.sigma_q[e]);
    A(col, col) += wp;
    A(f + col, f + col) += wq;
    b[col] += wp * ms.p_pseudo[e];
    b[f + col] += wq * ms.q_pseudo[e];
  }
  for (Eigen::Index row = 0; row < m; ++row) {
    const int meter = ms.meters[static_cast<size_t>(row)];
    const double w = 1.0 / (ms.sigma_v[row] * ms.sigma_v[row]);
    const double res = ms.v_meas[row] - sens.v_tilde()[meter];
    Eigen::VectorXd h(2 * f);
    for (Eigen::Index col = 0; col < f; ++col) {
      h[col] = sens.R()(meter, free[static_cast<size_t>(col)]);
      h[f + col] = sens.X()(meter, free[static_cast<size_t>(col)]);
    }
    A += w * h * h.transpose();
    b += w * res * h;
  }
  const Eigen::VectorXd x = A.ldlt().solve(b);

  Injections z = Injections::zero(ms.size());
  for (Eigen::Index col = 0; col < f; ++col) {
    z.p[free[static_cast<size_t>(col)]] = x[col];
    z.q[free[static_cast<size_t>(col)]] = x[f + col];
  }
  return z;
}

// Central-difference gradient of the WLS objective.
inline Injections numeric_gradient(const MeasurementSet& ms,
                                   const SensitivityModel& sens, const Injections& z,
                                   double h = 1e-5) {
  Injections g = Injections::zero(ms.size());
  Injections probe = z;
  for (int k = 0; k < ms.size(); ++k) {
    probe.p[k] = z.p[k] + h;
    const double up = wls_objective(ms, sens, probe);
    probe.p[k] = z.p[k] - h;
    const double dn = wls_objective(ms, sens, probe);
    probe.p[k] = z.p[k];
    g.p[k] = (up - dn) / (2.0 * h);

    probe.q[k] = z.q[k] + h;
    const double uq = wls_objective(ms, sens, probe);
    probe.q[k] = z.q[k] - h;
    const double dq = wls_objective(ms, sens, probe);
    probe.q[k] = z.q[k];
    g.q[k] = (uq - dq) / (2.0 * h);
  }
  return g;
}

// Measurement set with uniform channel weights and boxes wide enough that
// the optimum is interior; conditioning stays mild so gradient runs converge
// in a bounded iteration budget.
inline MeasurementSet interior_instance(const FeederModel& model,
                                        std::uint64_t seed, int meter_count,
                                        double sigma_pq = 0.05,
                                        double sigma_v = 0.02) {
  const Injections truth = nominal_injections(model);
  NoisePolicy noise;
  noise.sigma_mag = 0.01;
  noise.sigma_rel = 0.2;

  std::vector<int> pool;
  for (const NodeRecord& node : model.nodes())
    if (node.id != model.slack_id() && node.kind == NodeKind::Load)
      pool.push_back(node.id);
  Rng rng(seed);
  std::vector<int> picked;
  for (int k = 0; k < meter_count && !pool.empty(); ++k) {
    const size_t j = static_cast<size_t>(
        rng.uniform_int(0, static_cast<int>(pool.size()) - 1));
    picked.push_back(pool[j]);
    pool.erase(pool.begin() + static_cast<std::ptrdiff_t>(j));
  }
  MeasurementSet ms = synthesize(model, truth, noise,
                                 MeterPlacement::list(std::move(picked)), seed);
  for (int k = 0; k < ms.size(); ++k) {
    if (!ms.has_pseudo[static_cast<size_t>(k)]) continue;
    ms.sigma_p[k] = sigma_pq;
    ms.sigma_q[k] = sigma_pq;
    ms.p_lo[k] = -1e3;
    ms.p_hi[k] = 1e3;
    ms.q_lo[k] = -1e3;
    ms.q_hi[k] = 1e3;
  }
  for (Eigen::Index m = 0; m < ms.sigma_v.size(); ++m) ms.sigma_v[m] = sigma_v;
  return ms;
}

// Random area roots whose subtrees do not contain one another.
inline std::vector<int> pick_non_nested_roots(const FeederModel& model, int want,
                                              Rng& rng) {
  std::vector<int> roots;
  std::vector<int> candidates;
  for (const NodeRecord& node : model.nodes())
    if (node.id != model.slack_id()) candidates.push_back(node.id);
  for (int attempt = 0; attempt < 200 && static_cast<int>(roots.size()) < want;
       ++attempt) {
    const int pick = candidates[static_cast<size_t>(
        rng.uniform_int(0, static_cast<int>(candidates.size()) - 1))];
    bool nested = false;
    for (int existing : roots) {
      std::vector<int> sub = model.subtree_nodes(existing);
      if (std::find(sub.begin(), sub.end(), pick) != sub.end()) nested = true;
      std::vector<int> sub2 = model.subtree_nodes(pick);
      if (std::find(sub2.begin(), sub2.end(), existing) != sub2.end()) nested = true;
    }
    if (!nested &&
        std::find(roots.begin(), roots.end(), pick) == roots.end())
      roots.push_back(pick);
  }
  std::sort(roots.begin(), roots.end());
  return roots;
}

inline double max_abs_diff(const Injections& a, const Injections& b) {
  return std::max((a.p - b.p).lpNorm<Eigen::Infinity>(),
                  (a.q - b.q).lpNorm<Eigen::Infinity>());
}

}  // namespace testutil
