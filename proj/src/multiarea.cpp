#include "dsse/multiarea.hpp"

#include <algorithm>
#include <cstring>
#include <set>

namespace dsse {

std::uint64_t RoundMessage::digest() const {
  std::uint64_t hash = 0xcbf29ce484222325ull;
  for (double value : payload) {
    std::uint64_t bits = 0;
    std::memcpy(&bits, &value, sizeof(bits));
    for (int b = 0; b < 8; ++b) {
      hash ^= (bits >> (8 * b)) & 0xffu;
      hash *= 0x100000001b3ull;
    }
  }
  return hash;
}

const char* message_kind_name(RoundMessage::Kind kind) {
  switch (kind) {
    case RoundMessage::Kind::NuSum: return "nu_sum";
    case RoundMessage::Kind::Coupling: return "coupling";
    case RoundMessage::Kind::StateSlice: return "state_slice";
  }
  return "unknown";
}

const char* message_direction_name(MessageDirection dir) {
  return dir == MessageDirection::Up ? "ams_to_dso" : "dso_to_ams";
}

void QueueTransport::send(RoundMessage message) {
  log_.push_back(message);
  pending_.push_back(std::move(message));
}

std::vector<RoundMessage> QueueTransport::collect(MessageDirection direction,
                                                  RoundMessage::Kind kind,
                                                  int round, int expected) {
  std::vector<RoundMessage> batch;
  std::vector<RoundMessage> keep;
  for (RoundMessage& msg : pending_) {
    if (msg.direction != direction) {
      keep.push_back(std::move(msg));
      continue;
    }
    if (msg.kind != kind || msg.round != round)
      throw ProtocolError(std::string("unexpected ") +
                          message_kind_name(msg.kind) + " message for round " +
                          std::to_string(msg.round) + " while collecting " +
                          message_kind_name(kind) + " for round " +
                          std::to_string(round));
    batch.push_back(std::move(msg));
  }
  pending_ = std::move(keep);
  if (static_cast<int>(batch.size()) != expected)
    throw ProtocolError("round " + std::to_string(round) + ": expected " +
                        std::to_string(expected) + " " +
                        message_kind_name(kind) + " messages, got " +
                        std::to_string(batch.size()));
  std::sort(batch.begin(), batch.end(),
            [](const RoundMessage& a, const RoundMessage& b) {
              return a.area < b.area;
            });
  for (int k = 0; k + 1 < static_cast<int>(batch.size()); ++k)
    if (batch[static_cast<size_t>(k)].area == batch[static_cast<size_t>(k) + 1].area)
      throw ProtocolError("duplicate report from area " +
                          std::to_string(batch[static_cast<size_t>(k)].area) +
                          " in round " + std::to_string(round));
  return batch;
}

std::array<double, 3> AmsState::nu_sums(const StateIndex& index) const {
  std::array<double, 3> sums = {0.0, 0.0, 0.0};
  for (size_t m = 0; m < meter_entries.size(); ++m) {
    const int entry = meter_entries[m];
    const double sigma = sigma_v[static_cast<Eigen::Index>(m)];
    const double nu =
        (v_model[static_cast<Eigen::Index>(m)] - v_meas[static_cast<Eigen::Index>(m)]) /
        (sigma * sigma);
    sums[static_cast<size_t>(index.entry(entry).phase)] += nu;
  }
  return sums;
}

void AmsState::gradient_step(const StateIndex& index, double epsilon,
                             const std::array<double, 3>& alpha_out,
                             const std::array<double, 3>& beta_out) {
  const Eigen::Index local = static_cast<Eigen::Index>(entries.size());
  // In-area coupling, meter-major in ascending meter order, then the
  // downlinked out-of-area terms.
  Eigen::VectorXd alpha = Eigen::VectorXd::Zero(local);
  Eigen::VectorXd beta = Eigen::VectorXd::Zero(local);
  for (size_t m = 0; m < meter_entries.size(); ++m) {
    const double sigma = sigma_v[static_cast<Eigen::Index>(m)];
    const double nu =
        (v_model[static_cast<Eigen::Index>(m)] - v_meas[static_cast<Eigen::Index>(m)]) /
        (sigma * sigma);
    for (Eigen::Index i = 0; i < local; ++i) {
      alpha[i] += R_in(static_cast<Eigen::Index>(m), i) * nu;
      beta[i] += X_in(static_cast<Eigen::Index>(m), i) * nu;
    }
  }
  for (Eigen::Index i = 0; i < local; ++i) {
    const Phase phase = index.entry(entries[static_cast<size_t>(i)]).phase;
    alpha[i] += alpha_out[static_cast<size_t>(phase)];
    beta[i] += beta_out[static_cast<size_t>(phase)];
  }

  for (Eigen::Index i = 0; i < local; ++i) {
    double gp = alpha[i];
    double gq = beta[i];
    if (has_pseudo[static_cast<size_t>(i)]) {
      gp = (p[i] - p_pseudo[i]) / (sigma_p[i] * sigma_p[i]) + alpha[i];
      gq = (q[i] - q_pseudo[i]) / (sigma_q[i] * sigma_q[i]) + beta[i];
    }
    p[i] = std::clamp(p[i] - epsilon * gp, p_lo[i], p_hi[i]);
    q[i] = std::clamp(q[i] - epsilon * gq, q_lo[i], q_hi[i]);
  }
}

CouplingTerms decompose_coupling(const DsoState& dso, const StateIndex& index,
                                 const std::vector<std::array<double, 3>>& area_nu,
                                 const Eigen::VectorXd& uncl_nu) {
  const int k_count = dso.area_count();
  if (static_cast<int>(area_nu.size()) != k_count)
    throw ProtocolError("expected residual sums for " + std::to_string(k_count) +
                        " areas, got " + std::to_string(area_nu.size()));

  CouplingTerms out;
  out.area_alpha.assign(static_cast<size_t>(k_count), {0.0, 0.0, 0.0});
  out.area_beta.assign(static_cast<size_t>(k_count), {0.0, 0.0, 0.0});

  // Out-of-area terms per area and target phase: one complex inner sum whose
  // real and imaginary parts serve alpha and beta.
  for (int k = 0; k < k_count; ++k) {
    for (Phase target : dso.root_phase_sets[static_cast<size_t>(k)].list()) {
      std::complex<double> inner = 0.0;
      for (int src = 0; src < 3; ++src) {
        const Phase source = static_cast<Phase>(src);
        std::complex<double> per_phase = 0.0;
        for (int h = 0; h < k_count; ++h) {
          if (h == k) continue;
          const Eigen::Matrix3cd& block =
              dso.root_blocks[static_cast<size_t>(h * k_count + k)];
          per_phase += block(src, static_cast<int>(target)) *
                       area_nu[static_cast<size_t>(h)][static_cast<size_t>(src)];
        }
        for (size_t m = 0; m < dso.uncl_meter_entries.size(); ++m) {
          const auto& entry = index.entry(dso.uncl_meter_entries[m]);
          if (entry.phase != source) continue;
          int slot = 0;
          for (size_t s = 0; s < dso.uncl_node_ids.size(); ++s)
            if (dso.uncl_node_ids[s] == entry.node) slot = static_cast<int>(s);
          const Eigen::Matrix3cd& block =
              dso.uncl_blocks[static_cast<size_t>(slot * k_count + k)];
          per_phase += block(src, static_cast<int>(target)) *
                       uncl_nu[static_cast<Eigen::Index>(m)];
        }
        inner += phase_rotation(source, target) * per_phase;
      }
      out.area_alpha[static_cast<size_t>(k)][static_cast<size_t>(target)] =
          2.0 * inner.real();
      out.area_beta[static_cast<size_t>(k)][static_cast<size_t>(target)] =
          -2.0 * inner.imag();
    }
  }

  // Unclustered targets: cross terms against every area's aggregated
  // residuals, plus the operator's own meters through dense rows.
  const Eigen::Index u = static_cast<Eigen::Index>(dso.uncl_entries.size());
  out.uncl_alpha = Eigen::VectorXd::Zero(u);
  out.uncl_beta = Eigen::VectorXd::Zero(u);
  for (Eigen::Index i = 0; i < u; ++i) {
    const auto& entry = index.entry(dso.uncl_entries[static_cast<size_t>(i)]);
    int slot = 0;
    for (size_t s = 0; s < dso.uncl_node_ids.size(); ++s)
      if (dso.uncl_node_ids[s] == entry.node) slot = static_cast<int>(s);
    std::complex<double> inner = 0.0;
    for (int src = 0; src < 3; ++src) {
      std::complex<double> per_phase = 0.0;
      for (int h = 0; h < k_count; ++h) {
        const Eigen::Matrix3cd& block =
            dso.uncl_blocks[static_cast<size_t>(slot * k_count + h)];
        per_phase += block(src, static_cast<int>(entry.phase)) *
                     area_nu[static_cast<size_t>(h)][static_cast<size_t>(src)];
      }
      inner += phase_rotation(static_cast<Phase>(src), entry.phase) * per_phase;
    }
    out.uncl_alpha[i] = 2.0 * inner.real();
    out.uncl_beta[i] = -2.0 * inner.imag();
  }
  for (size_t m = 0; m < dso.uncl_meter_entries.size(); ++m) {
    const double nu = uncl_nu[static_cast<Eigen::Index>(m)];
    for (Eigen::Index i = 0; i < u; ++i) {
      out.uncl_alpha[i] += dso.R_uncl(static_cast<Eigen::Index>(m), i) * nu;
      out.uncl_beta[i] += dso.X_uncl(static_cast<Eigen::Index>(m), i) * nu;
    }
  }
  return out;
}

MultiAreaEstimator::MultiAreaEstimator(const FeederModel& model,
                                       const SensitivityModel& sens,
                                       const AreaPartition& partition,
                                       const MeasurementSet& ms,
                                       VoltageFeedback feedback,
                                       MultiAreaOptions opts)
    : sens_(&sens), ms_(ms), feedback_(feedback), opts_(opts) {
  const StateIndex& index = sens.index();
  if (ms_.size() != index.size())
    throw ValidationError("measurement set does not match the state dimension");
  if (partition.contains_nested_roots(model))
    throw ValidationError(
        "area roots must not be nested: the inter-area coupling blocks are "
        "only constant across non-nested subtree pairs");

  // The partition must cover every node exactly once.
  {
    std::set<int> covered(partition.unclustered.begin(), partition.unclustered.end());
    size_t total = partition.unclustered.size();
    for (const Area& area : partition.areas) {
      covered.insert(area.nodes.begin(), area.nodes.end());
      total += area.nodes.size();
    }
    if (total != static_cast<size_t>(model.node_count()) ||
        covered.size() != static_cast<size_t>(model.node_count()))
      throw ValidationError("partition does not cover every node exactly once");
  }

  slack_phases_ = model.node(model.slack_id()).phases.list();
  transport_ = std::make_unique<QueueTransport>();

  const int k_count = static_cast<int>(partition.areas.size());
  std::vector<int> area_of_node(static_cast<size_t>(model.node_count()) + 1, -1);
  std::unordered_map<int, int> area_lookup;
  for (const Area& area : partition.areas)
    for (int id : area.nodes) area_lookup[id] = area.id;

  // Slice the global problem into per-agent views.
  ams_.resize(static_cast<size_t>(k_count));
  for (const Area& area : partition.areas) {
    AmsState& ams = ams_[static_cast<size_t>(area.id)];
    ams.area = area.id;
    ams.root = area.root;
    ams.root_phases = model.node(area.root).phases.list();
    ams.nodes = area.nodes;
  }

  std::vector<int> entry_area(static_cast<size_t>(index.size()), -1);
  for (int e = 0; e < index.size(); ++e) {
    auto it = area_lookup.find(index.entry(e).node);
    if (it != area_lookup.end()) {
      entry_area[static_cast<size_t>(e)] = it->second;
      ams_[static_cast<size_t>(it->second)].entries.push_back(e);
    } else {
      dso_.uncl_entries.push_back(e);
    }
  }
  for (int id : partition.unclustered)
    if (id != model.slack_id()) dso_.uncl_node_ids.push_back(id);

  auto slice_channels = [&](const std::vector<int>& entries,
                            std::vector<std::uint8_t>& has_pseudo,
                            Eigen::VectorXd& p_pseudo, Eigen::VectorXd& q_pseudo,
                            Eigen::VectorXd& sigma_p, Eigen::VectorXd& sigma_q,
                            Eigen::VectorXd& p_lo, Eigen::VectorXd& p_hi,
                            Eigen::VectorXd& q_lo, Eigen::VectorXd& q_hi) {
    const Eigen::Index n = static_cast<Eigen::Index>(entries.size());
    has_pseudo.resize(entries.size());
    p_pseudo.resize(n);
    q_pseudo.resize(n);
    sigma_p.resize(n);
    sigma_q.resize(n);
    p_lo.resize(n);
    p_hi.resize(n);
    q_lo.resize(n);
    q_hi.resize(n);
    for (Eigen::Index i = 0; i < n; ++i) {
      const int e = entries[static_cast<size_t>(i)];
      has_pseudo[static_cast<size_t>(i)] = ms_.has_pseudo[static_cast<size_t>(e)];
      p_pseudo[i] = ms_.p_pseudo[e];
      q_pseudo[i] = ms_.q_pseudo[e];
      sigma_p[i] = ms_.sigma_p[e];
      sigma_q[i] = ms_.sigma_q[e];
      p_lo[i] = ms_.p_lo[e];
      p_hi[i] = ms_.p_hi[e];
      q_lo[i] = ms_.q_lo[e];
      q_hi[i] = ms_.q_hi[e];
    }
  };

  for (AmsState& ams : ams_)
    slice_channels(ams.entries, ams.has_pseudo, ams.p_pseudo, ams.q_pseudo,
                   ams.sigma_p, ams.sigma_q, ams.p_lo, ams.p_hi, ams.q_lo,
                   ams.q_hi);
  slice_channels(dso_.uncl_entries, dso_.has_pseudo, dso_.p_pseudo,
                 dso_.q_pseudo, dso_.sigma_p, dso_.sigma_q, dso_.p_lo,
                 dso_.p_hi, dso_.q_lo, dso_.q_hi);

  // Meter channels go to the owning agent.
  std::vector<std::vector<int>> area_meters(static_cast<size_t>(k_count));
  std::vector<std::vector<double>> area_vm(static_cast<size_t>(k_count));
  std::vector<std::vector<double>> area_sv(static_cast<size_t>(k_count));
  std::vector<double> uncl_vm, uncl_sv;
  for (size_t m = 0; m < ms_.meters.size(); ++m) {
    const int e = ms_.meters[m];
    const int owner = entry_area[static_cast<size_t>(e)];
    if (owner >= 0) {
      area_meters[static_cast<size_t>(owner)].push_back(e);
      area_vm[static_cast<size_t>(owner)].push_back(ms_.v_meas[static_cast<Eigen::Index>(m)]);
      area_sv[static_cast<size_t>(owner)].push_back(ms_.sigma_v[static_cast<Eigen::Index>(m)]);
    } else {
      dso_.uncl_meter_entries.push_back(e);
      uncl_vm.push_back(ms_.v_meas[static_cast<Eigen::Index>(m)]);
      uncl_sv.push_back(ms_.sigma_v[static_cast<Eigen::Index>(m)]);
    }
  }
  for (int k = 0; k < k_count; ++k) {
    AmsState& ams = ams_[static_cast<size_t>(k)];
    ams.meter_entries = area_meters[static_cast<size_t>(k)];
    const std::vector<double>& vm = area_vm[static_cast<size_t>(k)];
    const std::vector<double>& sv = area_sv[static_cast<size_t>(k)];
    ams.v_meas.resize(static_cast<Eigen::Index>(vm.size()));
    ams.sigma_v.resize(static_cast<Eigen::Index>(sv.size()));
    for (size_t m = 0; m < vm.size(); ++m) {
      ams.v_meas[static_cast<Eigen::Index>(m)] = vm[m];
      ams.sigma_v[static_cast<Eigen::Index>(m)] = sv[m];
    }
    ams.v_model = Eigen::VectorXd::Zero(ams.v_meas.size());
    ams.R_in.resize(static_cast<Eigen::Index>(ams.meter_entries.size()),
                    static_cast<Eigen::Index>(ams.entries.size()));
    ams.X_in.resize(ams.R_in.rows(), ams.R_in.cols());
    for (Eigen::Index r = 0; r < ams.R_in.rows(); ++r)
      for (Eigen::Index c = 0; c < ams.R_in.cols(); ++c) {
        ams.R_in(r, c) = sens.R()(ams.meter_entries[static_cast<size_t>(r)],
                                  ams.entries[static_cast<size_t>(c)]);
        ams.X_in(r, c) = sens.X()(ams.meter_entries[static_cast<size_t>(r)],
                                  ams.entries[static_cast<size_t>(c)]);
      }
  }
  dso_.v_meas.resize(static_cast<Eigen::Index>(uncl_vm.size()));
  dso_.sigma_v.resize(static_cast<Eigen::Index>(uncl_sv.size()));
  for (size_t m = 0; m < uncl_vm.size(); ++m) {
    dso_.v_meas[static_cast<Eigen::Index>(m)] = uncl_vm[m];
    dso_.sigma_v[static_cast<Eigen::Index>(m)] = uncl_sv[m];
  }
  dso_.R_uncl.resize(static_cast<Eigen::Index>(dso_.uncl_meter_entries.size()),
                     static_cast<Eigen::Index>(dso_.uncl_entries.size()));
  dso_.X_uncl.resize(dso_.R_uncl.rows(), dso_.R_uncl.cols());
  for (Eigen::Index r = 0; r < dso_.R_uncl.rows(); ++r)
    for (Eigen::Index c = 0; c < dso_.R_uncl.cols(); ++c) {
      dso_.R_uncl(r, c) = sens.R()(dso_.uncl_meter_entries[static_cast<size_t>(r)],
                                   dso_.uncl_entries[static_cast<size_t>(c)]);
      dso_.X_uncl(r, c) = sens.X()(dso_.uncl_meter_entries[static_cast<size_t>(r)],
                                   dso_.uncl_entries[static_cast<size_t>(c)]);
    }

  // Aggregated impedance blocks for the cross terms.
  dso_.area_roots.resize(static_cast<size_t>(k_count));
  dso_.root_phase_sets.resize(static_cast<size_t>(k_count));
  for (const Area& area : partition.areas) {
    dso_.area_roots[static_cast<size_t>(area.id)] = area.root;
    dso_.root_phase_sets[static_cast<size_t>(area.id)] = model.node(area.root).phases;
  }
  dso_.root_blocks.assign(static_cast<size_t>(k_count * k_count),
                          Eigen::Matrix3cd::Zero());
  for (int h = 0; h < k_count; ++h)
    for (int k = 0; k < k_count; ++k)
      if (h != k)
        dso_.root_blocks[static_cast<size_t>(h * k_count + k)] =
            conjugated_path_impedance(model, dso_.area_roots[static_cast<size_t>(h)],
                                      dso_.area_roots[static_cast<size_t>(k)]);
  dso_.uncl_blocks.assign(dso_.uncl_node_ids.size() * static_cast<size_t>(k_count),
                          Eigen::Matrix3cd::Zero());
  for (size_t s = 0; s < dso_.uncl_node_ids.size(); ++s)
    for (int k = 0; k < k_count; ++k)
      dso_.uncl_blocks[s * static_cast<size_t>(k_count) + static_cast<size_t>(k)] =
          conjugated_path_impedance(model, dso_.uncl_node_ids[s],
                                    dso_.area_roots[static_cast<size_t>(k)]);

  // Step size: shared with the centralized solver so the two iterations are
  // directly comparable.
  epsilon_ = opts_.epsilon ? *opts_.epsilon
                           : estimate_constants(ms_, sens, opts_.constants)
                                 .auto_epsilon();

  // Initial state: local pseudo vectors projected onto the boxes.
  auto clamp_init = [](const Eigen::VectorXd& raw, const Eigen::VectorXd& lo,
                       const Eigen::VectorXd& hi) {
    Eigen::VectorXd out(raw.size());
    for (Eigen::Index i = 0; i < raw.size(); ++i)
      out[i] = std::clamp(raw[i], lo[i], hi[i]);
    return out;
  };
  for (AmsState& ams : ams_) {
    ams.p = clamp_init(ams.p_pseudo, ams.p_lo, ams.p_hi);
    ams.q = clamp_init(ams.q_pseudo, ams.q_lo, ams.q_hi);
  }
  dso_.p = clamp_init(dso_.p_pseudo, dso_.p_lo, dso_.p_hi);
  dso_.q = clamp_init(dso_.q_pseudo, dso_.q_lo, dso_.q_hi);

  z_ = Injections::zero(index.size());
  for (const AmsState& ams : ams_)
    for (size_t i = 0; i < ams.entries.size(); ++i) {
      z_.p[ams.entries[i]] = ams.p[static_cast<Eigen::Index>(i)];
      z_.q[ams.entries[i]] = ams.q[static_cast<Eigen::Index>(i)];
    }
  for (size_t i = 0; i < dso_.uncl_entries.size(); ++i) {
    z_.p[dso_.uncl_entries[i]] = dso_.p[static_cast<Eigen::Index>(i)];
    z_.q[dso_.uncl_entries[i]] = dso_.q[static_cast<Eigen::Index>(i)];
  }
  v_ = feedback_.evaluate(sens, z_);
  push_round_voltages();
}

void MultiAreaEstimator::push_round_voltages() {
  // Round-start synchronization: the operator's simulator output at each
  // area's meters, delivered at the barrier.  Model voltages, not raw
  // measurements, so nothing private crosses the boundary.
  for (AmsState& ams : ams_)
    for (size_t m = 0; m < ams.meter_entries.size(); ++m)
      ams.v_model[static_cast<Eigen::Index>(m)] = v_[ams.meter_entries[m]];
}

void MultiAreaEstimator::run_round() {
  const StateIndex& index = sens_->index();
  const int k_count = area_count();

  // Step 1: per-phase residual-sum uplink; the operator evaluates its own
  // meters directly.
  for (AmsState& ams : ams_) {
    const std::array<double, 3> sums = ams.nu_sums(index);
    RoundMessage msg;
    msg.direction = MessageDirection::Up;
    msg.kind = RoundMessage::Kind::NuSum;
    msg.round = round_;
    msg.area = ams.area;
    for (Phase ph : slack_phases_)
      msg.payload.push_back(sums[static_cast<size_t>(ph)]);
    transport_->send(std::move(msg));
  }
  Eigen::VectorXd uncl_nu(static_cast<Eigen::Index>(dso_.uncl_meter_entries.size()));
  for (size_t m = 0; m < dso_.uncl_meter_entries.size(); ++m) {
    const double sigma = dso_.sigma_v[static_cast<Eigen::Index>(m)];
    uncl_nu[static_cast<Eigen::Index>(m)] =
        (v_[dso_.uncl_meter_entries[m]] - dso_.v_meas[static_cast<Eigen::Index>(m)]) /
        (sigma * sigma);
  }

  // Step 2: decompose and downlink the out-of-area couplings.
  const auto nu_batch = transport_->collect(MessageDirection::Up,
                                            RoundMessage::Kind::NuSum, round_,
                                            k_count);
  std::vector<std::array<double, 3>> area_nu(static_cast<size_t>(k_count),
                                             {0.0, 0.0, 0.0});
  for (const RoundMessage& msg : nu_batch)
    for (size_t ph = 0; ph < slack_phases_.size(); ++ph)
      area_nu[static_cast<size_t>(msg.area)][static_cast<size_t>(slack_phases_[ph])] =
          msg.payload[ph];

  const CouplingTerms coupling = decompose_coupling(dso_, index, area_nu, uncl_nu);
  for (int k = 0; k < k_count; ++k) {
    RoundMessage msg;
    msg.direction = MessageDirection::Down;
    msg.kind = RoundMessage::Kind::Coupling;
    msg.round = round_;
    msg.area = k;
    for (Phase ph : ams_[static_cast<size_t>(k)].root_phases)
      msg.payload.push_back(coupling.area_alpha[static_cast<size_t>(k)][static_cast<size_t>(ph)]);
    for (Phase ph : ams_[static_cast<size_t>(k)].root_phases)
      msg.payload.push_back(coupling.area_beta[static_cast<size_t>(k)][static_cast<size_t>(ph)]);
    transport_->send(std::move(msg));
  }

  // Steps 3-4: everyone assembles couplings and takes the projected step.
  const auto down_batch = transport_->collect(MessageDirection::Down,
                                              RoundMessage::Kind::Coupling,
                                              round_, k_count);
  for (const RoundMessage& msg : down_batch) {
    AmsState& ams = ams_[static_cast<size_t>(msg.area)];
    std::array<double, 3> alpha_out = {0.0, 0.0, 0.0};
    std::array<double, 3> beta_out = {0.0, 0.0, 0.0};
    const size_t phases = ams.root_phases.size();
    for (size_t ph = 0; ph < phases; ++ph) {
      alpha_out[static_cast<size_t>(ams.root_phases[ph])] = msg.payload[ph];
      beta_out[static_cast<size_t>(ams.root_phases[ph])] = msg.payload[phases + ph];
    }
    ams.gradient_step(index, epsilon_, alpha_out, beta_out);
  }
  for (Eigen::Index i = 0; i < dso_.p.size(); ++i) {
    double gp = coupling.uncl_alpha[i];
    double gq = coupling.uncl_beta[i];
    if (dso_.has_pseudo[static_cast<size_t>(i)]) {
      gp = (dso_.p[i] - dso_.p_pseudo[i]) / (dso_.sigma_p[i] * dso_.sigma_p[i]) +
           coupling.uncl_alpha[i];
      gq = (dso_.q[i] - dso_.q_pseudo[i]) / (dso_.sigma_q[i] * dso_.sigma_q[i]) +
           coupling.uncl_beta[i];
    }
    dso_.p[i] = std::clamp(dso_.p[i] - epsilon_ * gp, dso_.p_lo[i], dso_.p_hi[i]);
    dso_.q[i] = std::clamp(dso_.q[i] - epsilon_ * gq, dso_.q_lo[i], dso_.q_hi[i]);
  }

  // Step 5: state-slice uplink, simulator refresh, barrier voltage push.
  for (AmsState& ams : ams_) {
    RoundMessage msg;
    msg.direction = MessageDirection::Up;
    msg.kind = RoundMessage::Kind::StateSlice;
    msg.round = round_;
    msg.area = ams.area;
    msg.payload.reserve(2 * ams.entries.size());
    for (Eigen::Index i = 0; i < ams.p.size(); ++i) msg.payload.push_back(ams.p[i]);
    for (Eigen::Index i = 0; i < ams.q.size(); ++i) msg.payload.push_back(ams.q[i]);
    transport_->send(std::move(msg));
  }
  const auto slice_batch = transport_->collect(MessageDirection::Up,
                                               RoundMessage::Kind::StateSlice,
                                               round_, k_count);
  for (const RoundMessage& msg : slice_batch) {
    const AmsState& ams = ams_[static_cast<size_t>(msg.area)];
    const size_t local = ams.entries.size();
    if (msg.payload.size() != 2 * local)
      throw ProtocolError("area " + std::to_string(msg.area) +
                          " state slice has wrong size");
    for (size_t i = 0; i < local; ++i) {
      z_.p[ams.entries[i]] = msg.payload[i];
      z_.q[ams.entries[i]] = msg.payload[local + i];
    }
  }
  for (size_t i = 0; i < dso_.uncl_entries.size(); ++i) {
    z_.p[dso_.uncl_entries[i]] = dso_.p[static_cast<Eigen::Index>(i)];
    z_.q[dso_.uncl_entries[i]] = dso_.q[static_cast<Eigen::Index>(i)];
  }
  v_ = feedback_.evaluate(*sens_, z_);
  push_round_voltages();

  ++round_;
  stats_.rounds = round_;
  stats_.messages = transport_->log().size();
  stats_.nu_bytes = stats_.coupling_bytes = stats_.state_bytes = 0;
  for (const RoundMessage& msg : transport_->log()) {
    switch (msg.kind) {
      case RoundMessage::Kind::NuSum: stats_.nu_bytes += msg.size_bytes(); break;
      case RoundMessage::Kind::Coupling:
        stats_.coupling_bytes += msg.size_bytes();
        break;
      case RoundMessage::Kind::StateSlice:
        stats_.state_bytes += msg.size_bytes();
        break;
    }
  }
}

MultiAreaEstimator::Result MultiAreaEstimator::run() {
  for (int s = 0; s < opts_.max_rounds; ++s) {
    const Eigen::VectorXd v_prev = v_;
    run_round();
    if ((v_ - v_prev).lpNorm<Eigen::Infinity>() < opts_.delta) {
      Result result;
      result.state = snapshot();
      result.state.converged = true;
      result.stats = stats_;
      return result;
    }
  }
  throw ProtocolError("round cap " + std::to_string(opts_.max_rounds) +
                      " exceeded without meeting the voltage stop rule");
}

EstimateState MultiAreaEstimator::snapshot() const {
  EstimateState state;
  state.z = z_;
  state.v = v_;
  state.iterations = round_;
  state.epsilon = epsilon_;
  state.objective = wls_objective(ms_, *sens_, z_);
  return state;
}

}  // namespace dsse
