#include "dsse/observability.hpp"

#include <Eigen/SVD>
#include <algorithm>

namespace dsse {

namespace {

// Node-line incidence of the directed tree: +1 at the upstream endpoint, -1
// downstream.  Built over nodes in id order (slack row first in the full
// matrix) and lines in storage order; single-phase analysis only.
Eigen::MatrixXd build_incidence(const FeederModel& model) {
  const int n = model.node_count();
  const int e = static_cast<int>(model.lines().size());
  Eigen::MatrixXd b = Eigen::MatrixXd::Zero(n, e);
  int slack_row = model.index_of(model.slack_id());
  for (int l = 0; l < e; ++l) {
    const LineRecord& line = model.lines()[static_cast<size_t>(l)];
    b(model.index_of(line.from), l) = 1.0;
    b(model.index_of(line.to), l) = -1.0;
  }
  // Move the slack row to the top so dropping it is a plain tail view.
  if (slack_row != 0) b.row(slack_row).swap(b.row(0));
  return b;
}

}  // namespace

ObservabilityChannels channels_from(const MeasurementSet& ms) {
  ObservabilityChannels ch;
  for (int k = 0; k < ms.size(); ++k)
    if (ms.has_pseudo[static_cast<size_t>(k)]) {
      ch.pseudo_p.push_back(k);
      ch.pseudo_q.push_back(k);
    }
  ch.meters = ms.meters;
  return ch;
}

ObservabilityReport analyze_observability(const FeederModel& model,
                                          const SensitivityModel& sens,
                                          const ObservabilityChannels& channels,
                                          const ObservabilityOptions& opts) {
  const StateIndex& index = model.state_index();
  const int n = index.size();
  for (int e : channels.pseudo_p)
    if (e < 0 || e >= n) throw ValidationError("pseudo-p channel out of range");
  for (int e : channels.pseudo_q)
    if (e < 0 || e >= n) throw ValidationError("pseudo-q channel out of range");
  for (int e : channels.meters)
    if (e < 0 || e >= n) throw ValidationError("meter channel out of range");

  std::vector<int> zero_injection;
  if (opts.zero_injection_rows)
    for (int k = 0; k < n; ++k)
      if (model.node(index.entry(k).node).kind == NodeKind::ZeroInjection)
        zero_injection.push_back(k);

  Eigen::Index rows = static_cast<Eigen::Index>(
      channels.pseudo_p.size() + channels.pseudo_q.size() +
      channels.meters.size() + 2 * zero_injection.size());
  if (opts.branch_flow_rows)
    rows += 2 * static_cast<Eigen::Index>(model.lines().size());
  if (opts.slack_injection_rows) rows += 2;

  ObservabilityReport report;
  report.state_dimension = 2 * n;
  report.H = Eigen::MatrixXd::Zero(rows, 2 * n);

  Eigen::Index r = 0;
  // Injection channels are direct state reads: identity rows.
  for (int e : channels.pseudo_p) report.H(r++, e) = 1.0;
  for (int e : channels.pseudo_q) report.H(r++, n + e) = 1.0;
  // Exact virtual rows for zero-injection nodes.
  for (int e : zero_injection) report.H(r++, e) = 1.0;
  for (int e : zero_injection) report.H(r++, n + e) = 1.0;
  // Voltage rows come straight from the sensitivity matrices, which keeps
  // the rank analysis on exactly the model the estimator linearizes.
  for (int e : channels.meters) {
    report.H.block(r, 0, 1, n) = sens.R().row(e);
    report.H.block(r, n, 1, n) = sens.X().row(e);
    ++r;
  }
  if (opts.branch_flow_rows) {
    // Sending-end flows of a lossless tree aggregate the downstream
    // injections: each line row sums its subtree's entries.
    for (const LineRecord& line : model.lines()) {
      for (int id : model.subtree_nodes(line.to))
        if (id != model.slack_id())
          for (Phase ph : model.node(id).phases.list()) {
            if (auto col = index.find(id, ph)) report.H(r, *col) = -1.0;
          }
      ++r;
      for (int id : model.subtree_nodes(line.to))
        if (id != model.slack_id())
          for (Phase ph : model.node(id).phases.list()) {
            if (auto col = index.find(id, ph)) report.H(r, n + *col) = -1.0;
          }
      ++r;
    }
  }
  if (opts.slack_injection_rows) {
    // The slack balances the feeder, so its injection reads every entry.
    report.H.block(r, 0, 1, n).setConstant(-1.0);
    ++r;
    report.H.block(r, n, 1, n).setConstant(-1.0);
    ++r;
  }

  report.incidence = build_incidence(model);
  report.reduced_incidence =
      report.incidence.bottomRows(report.incidence.rows() - 1);

  if (rows == 0) {
    report.rank = 0;
    report.index_percent = 0.0;
    report.null_basis = Eigen::MatrixXd::Identity(2 * n, 2 * n);
    return report;
  }

  Eigen::JacobiSVD<Eigen::MatrixXd> svd(report.H,
                                        Eigen::ComputeThinU | Eigen::ComputeFullV);
  const Eigen::VectorXd& sv = svd.singularValues();
  const double cutoff = sv.size() > 0 ? opts.rank_tolerance * sv[0] : 0.0;
  int rank = 0;
  for (Eigen::Index k = 0; k < sv.size(); ++k)
    if (sv[k] > cutoff) ++rank;
  report.rank = rank;
  report.index_percent =
      100.0 * static_cast<double>(rank) / static_cast<double>(2 * n);
  report.null_basis = svd.matrixV().rightCols(2 * n - rank);
  return report;
}

PseudoCoverageReport verify_full_pseudo_coverage(int trials, std::uint64_t seed,
                                                 int max_size,
                                                 bool three_phase) {
  PseudoCoverageReport report;
  report.trials = trials;
  Rng rng(seed);
  for (int t = 0; t < trials; ++t) {
    FeederSpec spec;
    spec.size = rng.uniform_int(3, max_size);
    spec.load_fraction = rng.uniform(0.4, 1.0);
    spec.three_phase = three_phase;
    spec.seed = rng.next_u64();
    const FeederModel model = generate_feeder(spec);
    const SensitivityModel sens = SensitivityModel::build(model);

    // Full pseudo coverage: every load entry on both axes; zero-injection
    // rows complete the remaining entries exactly.
    ObservabilityChannels ch;
    for (int k = 0; k < model.state_index().size(); ++k)
      if (model.node(model.state_index().entry(k).node).kind == NodeKind::Load) {
        ch.pseudo_p.push_back(k);
        ch.pseudo_q.push_back(k);
      }
    const ObservabilityReport r = analyze_observability(model, sens, ch);
    report.indices.push_back(r.index_percent);
    if (r.rank == r.state_dimension) ++report.full_rank_trials;
  }
  return report;
}

}  // namespace dsse
