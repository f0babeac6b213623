#pragma once

#include <Eigen/Dense>
#include <array>
#include <cstdint>
#include <memory>
#include <optional>
#include <vector>

#include "dsse/estimator.hpp"
#include "dsse/feeder.hpp"
#include "dsse/measurements.hpp"
#include "dsse/sensitivity.hpp"

namespace dsse {

enum class MessageDirection { Up, Down };  // Up: area manager to operator

struct RoundMessage {
  enum class Kind { NuSum, Coupling, StateSlice };
  MessageDirection direction = MessageDirection::Up;
  Kind kind = Kind::NuSum;
  int round = 0;
  int area = 0;
  std::vector<double> payload;

  std::size_t size_bytes() const { return payload.size() * sizeof(double); }
  std::uint64_t digest() const;  // FNV-1a over the payload bytes
};

const char* message_kind_name(RoundMessage::Kind kind);
const char* message_direction_name(MessageDirection dir);

// Synchronous in-process message fabric.  collect() hands back exactly the
// expected per-round batch ordered by area id and throws ProtocolError on
// missing reports or stray out-of-round messages.
class Transport {
 public:
  virtual ~Transport() = default;
  virtual void send(RoundMessage message) = 0;
  virtual std::vector<RoundMessage> collect(MessageDirection direction,
                                            RoundMessage::Kind kind, int round,
                                            int expected) = 0;
  virtual const std::vector<RoundMessage>& log() const = 0;
};

class QueueTransport final : public Transport {
 public:
  void send(RoundMessage message) override;
  std::vector<RoundMessage> collect(MessageDirection direction,
                                    RoundMessage::Kind kind, int round,
                                    int expected) override;
  const std::vector<RoundMessage>& log() const override { return log_; }

 private:
  std::vector<RoundMessage> pending_;
  std::vector<RoundMessage> log_;
};

// Area management system: owns the raw measurements of one subtree and the
// in-area sensitivity slices, nothing else.  Raw readings never leave it;
// only per-phase residual aggregates and state slices go on the wire.
struct AmsState {
  int area = 0;
  int root = 0;
  std::vector<Phase> root_phases;    // ascending
  std::vector<int> nodes;            // ids, ascending
  std::vector<int> entries;          // global state entries, ascending
  std::vector<int> meter_entries;    // global state entries, ascending
  Eigen::VectorXd v_meas, sigma_v;   // aligned with meter_entries
  Eigen::VectorXd v_model;           // model voltages pushed at round start
  // Pseudo channels and boxes aligned with `entries`.
  std::vector<std::uint8_t> has_pseudo;
  Eigen::VectorXd p_pseudo, q_pseudo, sigma_p, sigma_q;
  Eigen::VectorXd p_lo, p_hi, q_lo, q_hi;
  // In-area sensitivity slices: meter channel rows x local entry columns.
  Eigen::MatrixXd R_in, X_in;
  // Local slice of the running estimate.
  Eigen::VectorXd p, q;

  // Per-phase sums of the weighted local voltage residuals, global phase
  // indexing.
  std::array<double, 3> nu_sums(const StateIndex& index) const;
  // In-area coupling plus downlinked out-of-area coupling, then one
  // projected gradient step on the local slice.
  void gradient_step(const StateIndex& index, double epsilon,
                     const std::array<double, 3>& alpha_out,
                     const std::array<double, 3>& beta_out);
};

// Distribution system operator: aggregated impedance blocks between area
// roots and between unclustered nodes and roots, its own (unclustered)
// measurement channels with their dense sensitivity rows, and the slice of
// the estimate it updates itself.
struct DsoState {
  std::vector<int> area_roots;
  std::vector<PhaseSet> root_phase_sets;
  // Conjugated aggregated impedance between area roots, global phase
  // indexing, entry h * K + k; symmetric blocks, diagonal unused.
  std::vector<Eigen::Matrix3cd> root_blocks;
  // Ditto between each unclustered non-slack node and each area root,
  // entry slot * K + k.
  std::vector<Eigen::Matrix3cd> uncl_blocks;
  std::vector<int> uncl_node_ids;    // ascending, slack excluded
  std::vector<int> uncl_entries;     // global state entries, ascending
  std::vector<int> uncl_meter_entries;
  Eigen::VectorXd v_meas, sigma_v;   // unclustered meters (operator-owned)
  std::vector<std::uint8_t> has_pseudo;  // aligned with uncl_entries
  Eigen::VectorXd p_pseudo, q_pseudo, sigma_p, sigma_q;
  Eigen::VectorXd p_lo, p_hi, q_lo, q_hi;
  // Dense sensitivity rows: unclustered meter channels x unclustered entries.
  Eigen::MatrixXd R_uncl, X_uncl;
  // Unclustered slice of the running estimate.
  Eigen::VectorXd p, q;

  int area_count() const { return static_cast<int>(area_roots.size()); }
};

// The coupling sums split per the subtree decomposition: one out-of-area
// (alpha, beta) pair per area and phase, plus the full coupling for every
// unclustered entry.
struct CouplingTerms {
  std::vector<std::array<double, 3>> area_alpha;
  std::vector<std::array<double, 3>> area_beta;
  Eigen::VectorXd uncl_alpha;
  Eigen::VectorXd uncl_beta;
};

// Evaluates the decomposition from per-area per-phase residual sums and the
// operator's own meter residuals.  Cross-area terms ride on the aggregated
// root blocks; single-phase feeders are the one-phase special case of the
// same rotation algebra.
CouplingTerms decompose_coupling(const DsoState& dso, const StateIndex& index,
                                 const std::vector<std::array<double, 3>>& area_nu,
                                 const Eigen::VectorXd& uncl_nu);

struct ProtocolStats {
  int rounds = 0;
  std::size_t messages = 0;
  std::size_t nu_bytes = 0;
  std::size_t coupling_bytes = 0;
  std::size_t state_bytes = 0;
};

struct MultiAreaOptions {
  std::optional<double> epsilon;  // empty: M / L^2 over the full problem
  double delta = 1e-6;
  int max_rounds = 500;
  ConstantsOptions constants{};
};

// Synchronous multi-area projected-gradient estimation.  Each round is five
// steps: residual-sum uplink, coupling downlink, local coupling assembly,
// the projected gradient step everywhere, and the state-slice uplink after
// which the operator refreshes the model voltages through its simulator and
// pushes the new local meter voltages to the area managers.
class MultiAreaEstimator {
 public:
  MultiAreaEstimator(const FeederModel& model, const SensitivityModel& sens,
                     const AreaPartition& partition, const MeasurementSet& ms,
                     VoltageFeedback feedback, MultiAreaOptions opts = {});

  struct Result {
    EstimateState state;
    ProtocolStats stats;
  };

  // Runs rounds until the voltage stop rule; throws ProtocolError when the
  // round cap is exceeded without convergence.
  Result run();
  // One synchronous round; exposed so equivalence tests can run in lockstep
  // with the centralized iteration.
  void run_round();

  const Injections& z() const { return z_; }
  const Eigen::VectorXd& v() const { return v_; }
  int rounds_completed() const { return round_; }
  double epsilon() const { return epsilon_; }

  DsoState& dso() { return dso_; }
  AmsState& ams(int area) { return ams_[static_cast<size_t>(area)]; }
  int area_count() const { return static_cast<int>(ams_.size()); }
  Transport& transport() { return *transport_; }
  const ProtocolStats& stats() const { return stats_; }

  EstimateState snapshot() const;

 private:
  void push_round_voltages();

  const SensitivityModel* sens_;
  MeasurementSet ms_;
  VoltageFeedback feedback_;
  MultiAreaOptions opts_;
  std::vector<Phase> slack_phases_;
  double epsilon_ = 0.0;
  std::vector<AmsState> ams_;
  DsoState dso_;
  std::unique_ptr<Transport> transport_;
  Injections z_;
  Eigen::VectorXd v_;
  int round_ = 0;
  ProtocolStats stats_;
};

}  // namespace dsse
