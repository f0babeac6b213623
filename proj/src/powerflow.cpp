#include "dsse/powerflow.hpp"

#include <algorithm>
#include <cmath>

namespace dsse {

namespace {

// Slack phasor for one phase: balanced positive-sequence reference.
std::complex<double> slack_phasor(double magnitude, Phase ph) {
  switch (ph) {
    case Phase::A: return {magnitude, 0.0};
    case Phase::B: return std::polar(magnitude, -2.0 * M_PI / 3.0);
    case Phase::C: return std::polar(magnitude, +2.0 * M_PI / 3.0);
  }
  return {magnitude, 0.0};
}

}  // namespace

PowerFlowSolution solve_nonlinear(const FeederModel& model, const Injections& inj,
                                  const PowerFlowOptions& opts) {
  const StateIndex& index = model.state_index();
  const int n = index.size();
  if (inj.p.size() != n || inj.q.size() != n)
    throw PowerFlowError("injection vectors must match the state dimension");
  for (int k = 0; k < n; ++k) {
    const double s = std::hypot(inj.p[k], inj.q[k]);
    if (!std::isfinite(s) || s > opts.max_injection) {
      const auto& e = index.entry(k);
      throw PowerFlowError("implausible injection " + std::to_string(s) +
                           " pu at node " + std::to_string(e.node) + " phase " +
                           phase_letter(e.phase));
    }
  }

  // Complex voltages per state entry, flat start at the slack phasor.
  Eigen::VectorXcd voltage(n);
  for (int k = 0; k < n; ++k)
    voltage[k] = slack_phasor(model.slack_voltage(), index.entry(k).phase);

  const auto& order = model.nodes_by_depth();
  std::vector<Eigen::VectorXcd> current(model.lines().size());
  std::vector<Eigen::VectorXcd> drawn(static_cast<size_t>(model.node_count()));

  auto phase_voltages = [&](int id) {
    const auto list = model.node(id).phases.list();
    Eigen::VectorXcd out(static_cast<Eigen::Index>(list.size()));
    if (id == model.slack_id()) {
      for (size_t k = 0; k < list.size(); ++k)
        out[static_cast<Eigen::Index>(k)] = slack_phasor(model.slack_voltage(), list[k]);
      return out;
    }
    for (size_t k = 0; k < list.size(); ++k)
      out[static_cast<Eigen::Index>(k)] = voltage[index.index_of(id, list[k])];
    return out;
  };

  int sweep = 0;
  double mismatch = std::numeric_limits<double>::infinity();
  for (; sweep < opts.max_sweeps; ++sweep) {
    // Backward: accumulate branch currents from the leaves up.  Nodes are
    // visited deepest first, so child branch currents are ready when the
    // parent line is formed.
    for (auto it = order.rbegin(); it != order.rend(); ++it) {
      const int id = *it;
      if (id == model.slack_id()) continue;
      const auto list = model.node(id).phases.list();
      Eigen::VectorXcd draw(static_cast<Eigen::Index>(list.size()));
      for (size_t k = 0; k < list.size(); ++k) {
        const int e = index.index_of(id, list[k]);
        const std::complex<double> s(inj.p[e], inj.q[e]);
        draw[static_cast<Eigen::Index>(k)] = std::conj(-s / voltage[e]);
      }
      drawn[static_cast<size_t>(model.index_of(id))] = draw;
      Eigen::VectorXcd total = draw;
      for (int child : model.children(id)) {
        const Eigen::VectorXcd& child_current =
            current[static_cast<size_t>(model.parent_line(child))];
        const auto child_list = model.node(child).phases.list();
        for (size_t k = 0; k < child_list.size(); ++k) {
          // Child phases are a subset of this node's phases.
          int slot = 0;
          for (size_t m = 0; m < list.size(); ++m)
            if (list[m] == child_list[k]) slot = static_cast<int>(m);
          total[slot] += child_current[static_cast<Eigen::Index>(k)];
        }
      }
      current[static_cast<size_t>(model.parent_line(id))] = total;
    }

    // Forward: propagate voltage drops from the slack down.
    for (int id : order) {
      if (id == model.slack_id()) continue;
      const int line_idx = model.parent_line(id);
      const LineRecord& line = model.lines()[static_cast<size_t>(line_idx)];
      const auto list = model.node(id).phases.list();
      const auto parent_list = model.node(line.from).phases.list();
      const Eigen::VectorXcd up = phase_voltages(line.from);
      Eigen::VectorXcd restricted(static_cast<Eigen::Index>(list.size()));
      for (size_t k = 0; k < list.size(); ++k) {
        int slot = 0;
        for (size_t m = 0; m < parent_list.size(); ++m)
          if (parent_list[m] == list[k]) slot = static_cast<int>(m);
        restricted[static_cast<Eigen::Index>(k)] = up[slot];
      }
      const Eigen::VectorXcd drop =
          line.z * current[static_cast<size_t>(line_idx)];
      for (size_t k = 0; k < list.size(); ++k) {
        const int e = index.index_of(id, list[k]);
        voltage[e] = restricted[static_cast<Eigen::Index>(k)] -
                     drop[static_cast<Eigen::Index>(k)];
        const double mag = std::abs(voltage[e]);
        if (mag < opts.collapse_voltage)
          throw PowerFlowError("voltage collapse at node " + std::to_string(id) +
                               " phase " + phase_letter(list[k]) + ": |V| = " +
                               std::to_string(mag) + " pu");
      }
    }

    // Residual: the power the stale branch currents imply at the new
    // voltages, against the specified injections.
    mismatch = 0.0;
    for (int id : order) {
      if (id == model.slack_id()) continue;
      const auto list = model.node(id).phases.list();
      const Eigen::VectorXcd& line_current =
          current[static_cast<size_t>(model.parent_line(id))];
      Eigen::VectorXcd net = line_current;
      for (int child : model.children(id)) {
        const Eigen::VectorXcd& child_current =
            current[static_cast<size_t>(model.parent_line(child))];
        const auto child_list = model.node(child).phases.list();
        for (size_t k = 0; k < child_list.size(); ++k) {
          int slot = 0;
          for (size_t m = 0; m < list.size(); ++m)
            if (list[m] == child_list[k]) slot = static_cast<int>(m);
          net[slot] -= child_current[static_cast<Eigen::Index>(k)];
        }
      }
      for (size_t k = 0; k < list.size(); ++k) {
        const int e = index.index_of(id, list[k]);
        const std::complex<double> implied =
            -voltage[e] * std::conj(net[static_cast<Eigen::Index>(k)]);
        const std::complex<double> spec(inj.p[e], inj.q[e]);
        mismatch = std::max(mismatch, std::abs(implied - spec));
      }
    }
    if (mismatch <= opts.tolerance) {
      ++sweep;
      break;
    }
  }

  if (mismatch > opts.tolerance)
    throw PowerFlowError("sweep did not converge in " +
                         std::to_string(opts.max_sweeps) +
                         " iterations; residual " + std::to_string(mismatch) +
                         " pu");

  PowerFlowSolution sol;
  sol.voltage = voltage;
  sol.v = voltage.cwiseAbs2();
  sol.sweeps = sweep;
  sol.mismatch = mismatch;
  sol.branch_current = current;
  sol.branch_power.resize(current.size());
  sol.branch_current_sq.resize(current.size());
  for (size_t e = 0; e < model.lines().size(); ++e) {
    const LineRecord& line = model.lines()[e];
    const auto list = model.node(line.to).phases.list();
    const auto parent_list = model.node(line.from).phases.list();
    const Eigen::VectorXcd up = phase_voltages(line.from);
    Eigen::VectorXcd sending(static_cast<Eigen::Index>(list.size()));
    for (size_t k = 0; k < list.size(); ++k) {
      int slot = 0;
      for (size_t m = 0; m < parent_list.size(); ++m)
        if (parent_list[m] == list[k]) slot = static_cast<int>(m);
      sending[static_cast<Eigen::Index>(k)] =
          up[slot] * std::conj(current[e][static_cast<Eigen::Index>(k)]);
    }
    sol.branch_power[e] = sending;
    sol.branch_current_sq[e] = current[e].cwiseAbs2();
  }
  return sol;
}

Eigen::VectorXd solve_linear(const SensitivityModel& sens, const Injections& inj) {
  return sens.predict_voltage(inj);
}

double power_mismatch(const FeederModel& model, const Injections& inj,
                      const PowerFlowSolution& sol) {
  const StateIndex& index = model.state_index();
  double worst = 0.0;
  for (const NodeRecord& rec : model.nodes()) {
    if (rec.id == model.slack_id()) continue;
    const auto list = rec.phases.list();
    const Eigen::VectorXcd& line_current =
        sol.branch_current[static_cast<size_t>(model.parent_line(rec.id))];
    Eigen::VectorXcd net = line_current;
    for (int child : model.children(rec.id)) {
      const Eigen::VectorXcd& child_current =
          sol.branch_current[static_cast<size_t>(model.parent_line(child))];
      const auto child_list = model.node(child).phases.list();
      for (size_t k = 0; k < child_list.size(); ++k) {
        int slot = 0;
        for (size_t m = 0; m < list.size(); ++m)
          if (list[m] == child_list[k]) slot = static_cast<int>(m);
        net[slot] -= child_current[static_cast<Eigen::Index>(k)];
      }
    }
    for (size_t k = 0; k < list.size(); ++k) {
      const int e = index.index_of(rec.id, list[k]);
      const std::complex<double> implied =
          -sol.voltage[e] * std::conj(net[static_cast<Eigen::Index>(k)]);
      worst = std::max(worst,
                       std::abs(implied - std::complex<double>(inj.p[e], inj.q[e])));
    }
  }
  return worst;
}

}  // namespace dsse
