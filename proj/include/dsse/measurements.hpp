#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "dsse/feeder.hpp"
#include "dsse/powerflow.hpp"

namespace dsse {

struct NoisePolicy {
  double sigma_mag = 0.01;   // relative std dev of the voltage magnitude noise
  double sigma_rel = 0.5;    // relative std dev of pseudo-measurement noise
  double p_floor = 1e-4;     // floor for sigma_p scaling, pu
  double sigma_min = 1e-12;  // keeps WLS weights finite for zero-noise runs
};

// Voltage meters sit on nodes and read every phase present there.  Placement
// is either an explicit list (optionally restricted to one phase) or a
// uniformly random fraction of the eligible nodes.
struct MeterPlacement {
  struct Entry {
    int node = 0;
    std::optional<Phase> phase;  // empty: all phases of the node
  };
  std::vector<Entry> explicit_meters;
  double fraction = 0.05;
  // Restricts random placement, e.g. to in-area nodes.  Empty: every
  // non-slack node is eligible.
  std::vector<int> eligible;

  static MeterPlacement list(std::vector<int> nodes);
  static MeterPlacement random_fraction(double fraction);
};

// One estimation problem: pseudo-measurement channels aligned with the state
// vector, voltage readings at metered entries, and the feasible boxes.
struct MeasurementSet {
  StateIndex index;
  std::vector<std::uint8_t> has_pseudo;  // per entry; zero-injection and slackless entries excluded
  Eigen::VectorXd p_pseudo, q_pseudo;    // zero where has_pseudo is false
  Eigen::VectorXd sigma_p, sigma_q;      // positive everywhere pseudo exists
  std::vector<int> meters;               // state entries, ascending
  Eigen::VectorXd v_meas, sigma_v;       // aligned with meters
  Eigen::VectorXd p_lo, p_hi, q_lo, q_hi;  // feasible boxes per entry

  int size() const { return static_cast<int>(has_pseudo.size()); }
  int meter_count() const { return static_cast<int>(meters.size()); }
  bool is_metered(int entry) const;
};

// Draws noisy pseudo-measurements and voltage readings around the nonlinear
// power flow solution of `truth`.  Deterministic for a fixed seed.
MeasurementSet synthesize(const FeederModel& model, const Injections& truth,
                          const NoisePolicy& noise, const MeterPlacement& placement,
                          std::uint64_t seed);

// As above, but reuses an existing power flow solution of `truth`.
MeasurementSet synthesize(const FeederModel& model, const Injections& truth,
                          const PowerFlowSolution& truth_flow,
                          const NoisePolicy& noise, const MeterPlacement& placement,
                          std::uint64_t seed);

// One tick of a quasi-static scenario stream.
struct Scenario {
  std::int64_t tick = 0;
  Injections truth;
  // Present when meter readings came with the data; synthesized at consume
  // time otherwise.
  std::optional<Eigen::VectorXd> v_meas;  // per state entry, NaN where unread
};

// Largest true-state step between consecutive ticks, the empirical
// counterpart of the bounded-drift constant.
double empirical_state_drift(const std::vector<Scenario>& scenarios);

struct DiurnalSpec {
  int ticks = 3600;
  double utilization_base = 0.55;  // midpoint of the daily load swing
  double utilization_swing = 0.30; // half-amplitude of the slow component
  double cloud_noise = 0.02;       // smooth per-tick perturbation
  double pv_fraction = 0.25;       // share of loads with a midday generation dip
  double pv_depth = 0.35;          // dip depth relative to the load's peak
  std::uint64_t seed = 0;
};

// Smooth per-tick scaling of the nominal loads: slow sinusoidal swing plus a
// midday generation dip on a subset of loads and low-pass noise, clamped away
// from zero so injections never change sign.
std::vector<Scenario> generate_diurnal(const FeederModel& model,
                                       const DiurnalSpec& spec);

}  // namespace dsse
