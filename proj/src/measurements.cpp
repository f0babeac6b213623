#include "dsse/measurements.hpp"

#include <algorithm>
#include <cmath>
#include <set>

namespace dsse {

MeterPlacement MeterPlacement::list(std::vector<int> nodes) {
  MeterPlacement out;
  for (int id : nodes) out.explicit_meters.push_back({id, std::nullopt});
  return out;
}

MeterPlacement MeterPlacement::random_fraction(double fraction) {
  MeterPlacement out;
  out.fraction = fraction;
  return out;
}

bool MeasurementSet::is_metered(int entry) const {
  return std::binary_search(meters.begin(), meters.end(), entry);
}

namespace {

std::vector<int> pick_metered_nodes(const FeederModel& model,
                                    const MeterPlacement& placement, Rng& rng) {
  std::vector<int> pool;
  if (!placement.eligible.empty()) {
    pool = placement.eligible;
  } else {
    for (const NodeRecord& rec : model.nodes())
      if (rec.id != model.slack_id()) pool.push_back(rec.id);
  }
  std::sort(pool.begin(), pool.end());
  const int want = std::max(
      1, static_cast<int>(std::lround(placement.fraction *
                                      static_cast<double>(pool.size()))));
  for (int k = static_cast<int>(pool.size()) - 1; k > 0; --k)
    std::swap(pool[static_cast<size_t>(k)],
              pool[static_cast<size_t>(rng.uniform_int(0, k))]);
  pool.resize(static_cast<size_t>(std::min<int>(want, static_cast<int>(pool.size()))));
  std::sort(pool.begin(), pool.end());
  return pool;
}

}  // namespace

MeasurementSet synthesize(const FeederModel& model, const Injections& truth,
                          const NoisePolicy& noise, const MeterPlacement& placement,
                          std::uint64_t seed) {
  return synthesize(model, truth, solve_nonlinear(model, truth), noise,
                    placement, seed);
}

MeasurementSet synthesize(const FeederModel& model, const Injections& truth,
                          const PowerFlowSolution& truth_flow,
                          const NoisePolicy& noise, const MeterPlacement& placement,
                          std::uint64_t seed) {
  const StateIndex& index = model.state_index();
  const int n = index.size();
  if (truth.p.size() != n || truth.q.size() != n)
    throw ValidationError("truth injections must match the state dimension");

  Rng rng(seed);
  MeasurementSet ms;
  ms.index = index;
  ms.has_pseudo.assign(static_cast<size_t>(n), 0);
  ms.p_pseudo = Eigen::VectorXd::Zero(n);
  ms.q_pseudo = Eigen::VectorXd::Zero(n);
  ms.sigma_p = Eigen::VectorXd::Constant(n, noise.sigma_min);
  ms.sigma_q = Eigen::VectorXd::Constant(n, noise.sigma_min);
  ms.p_lo = Eigen::VectorXd::Zero(n);
  ms.p_hi = Eigen::VectorXd::Zero(n);
  ms.q_lo = Eigen::VectorXd::Zero(n);
  ms.q_hi = Eigen::VectorXd::Zero(n);

  // Pseudo-measurements cover exactly the load entries; zero-injection nodes
  // carry the {(0,0)} singleton box instead of a noisy channel.
  for (int k = 0; k < n; ++k) {
    const auto& entry = index.entry(k);
    const NodeRecord& rec = model.node(entry.node);
    if (rec.kind != NodeKind::Load) continue;
    const PqBox& box = rec.box(entry.phase);
    ms.p_lo[k] = box.p_min;
    ms.p_hi[k] = box.p_max;
    ms.q_lo[k] = box.q_min;
    ms.q_hi[k] = box.q_max;
    ms.has_pseudo[static_cast<size_t>(k)] = 1;
    ms.p_pseudo[k] = truth.p[k] * (1.0 + noise.sigma_rel * rng.normal());
    ms.q_pseudo[k] = truth.q[k] * (1.0 + noise.sigma_rel * rng.normal());
    ms.sigma_p[k] = std::max(noise.sigma_rel * std::max(std::abs(ms.p_pseudo[k]),
                                                        noise.p_floor),
                             noise.sigma_min);
    ms.sigma_q[k] = std::max(noise.sigma_rel * std::max(std::abs(ms.q_pseudo[k]),
                                                        noise.p_floor),
                             noise.sigma_min);
  }

  // Voltage meters: noise enters the magnitude, readings are squared.
  std::vector<int> metered_nodes;
  if (!placement.explicit_meters.empty()) {
    std::set<int> entries;
    for (const auto& meter : placement.explicit_meters) {
      const NodeRecord& rec = model.node(meter.node);
      if (meter.node == model.slack_id())
        throw ValidationError("meter requested at the slack node");
      if (meter.phase) {
        if (!rec.phases.has(*meter.phase))
          throw ValidationError("meter requested at node " +
                                std::to_string(meter.node) + " phase " +
                                phase_letter(*meter.phase) +
                                ", which the node does not carry");
        entries.insert(index.index_of(meter.node, *meter.phase));
      } else {
        for (Phase ph : rec.phases.list())
          entries.insert(index.index_of(meter.node, ph));
      }
    }
    ms.meters.assign(entries.begin(), entries.end());
  } else {
    for (int id : pick_metered_nodes(model, placement, rng))
      for (Phase ph : model.node(id).phases.list())
        ms.meters.push_back(index.index_of(id, ph));
    std::sort(ms.meters.begin(), ms.meters.end());
  }

  ms.v_meas.resize(static_cast<Eigen::Index>(ms.meters.size()));
  ms.sigma_v.resize(static_cast<Eigen::Index>(ms.meters.size()));
  for (size_t m = 0; m < ms.meters.size(); ++m) {
    const int entry = ms.meters[m];
    const double mag_true = std::abs(truth_flow.voltage[entry]);
    const double mag_meas = mag_true * (1.0 + noise.sigma_mag * rng.normal());
    const double v_meas = mag_meas * mag_meas;
    ms.v_meas[static_cast<Eigen::Index>(m)] = v_meas;
    // First-order propagation of the magnitude noise to the squared reading.
    ms.sigma_v[static_cast<Eigen::Index>(m)] =
        std::max(2.0 * noise.sigma_mag * v_meas, noise.sigma_min);
  }
  return ms;
}

double empirical_state_drift(const std::vector<Scenario>& scenarios) {
  double worst = 0.0;
  for (size_t t = 1; t < scenarios.size(); ++t) {
    const Injections& a = scenarios[t - 1].truth;
    const Injections& b = scenarios[t].truth;
    const double dp = (b.p - a.p).squaredNorm() + (b.q - a.q).squaredNorm();
    worst = std::max(worst, std::sqrt(dp));
  }
  return worst;
}

std::vector<Scenario> generate_diurnal(const FeederModel& model,
                                       const DiurnalSpec& spec) {
  const Injections nominal = nominal_injections(model);
  const int n = model.state_index().size();
  Rng rng(spec.seed);

  std::vector<bool> has_pv(static_cast<size_t>(n), false);
  for (int k = 0; k < n; ++k)
    if (rng.uniform() < spec.pv_fraction) has_pv[static_cast<size_t>(k)] = true;

  // Low-pass noise state, one channel per entry.
  Eigen::VectorXd smooth = Eigen::VectorXd::Zero(n);
  const double mix = 0.02;

  std::vector<Scenario> out;
  out.reserve(static_cast<size_t>(spec.ticks));
  for (int t = 0; t < spec.ticks; ++t) {
    const double day = static_cast<double>(t) / std::max(1, spec.ticks - 1);
    // Morning-to-evening ramp peaking late; one huge period over the stream.
    const double swing = std::sin(M_PI * (0.25 + 0.75 * day));
    const double pv_bell = std::exp(-12.0 * (day - 0.5) * (day - 0.5));
    Scenario sc;
    sc.tick = t;
    sc.truth = Injections::zero(n);
    for (int k = 0; k < n; ++k) {
      smooth[k] = (1.0 - mix) * smooth[k] + mix * rng.normal();
      double scale = spec.utilization_base + spec.utilization_swing * swing +
                     spec.cloud_noise * smooth[k];
      if (has_pv[static_cast<size_t>(k)]) scale -= spec.pv_depth * pv_bell;
      scale = std::clamp(scale, 0.15, 1.0);
      sc.truth.p[k] = nominal.p[k] * scale;
      sc.truth.q[k] = nominal.q[k] * scale;
    }
    out.push_back(std::move(sc));
  }
  return out;
}

}  // namespace dsse
