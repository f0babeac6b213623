#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <vector>

#include "dsse/feeder.hpp"
#include "dsse/measurements.hpp"
#include "dsse/sensitivity.hpp"

namespace dsse {

// Measurement channels feeding the linearized observability matrix.  Pseudo
// channels may cover active and reactive power independently, which the
// estimation-side MeasurementSet never needs but rank studies do.
struct ObservabilityChannels {
  std::vector<int> pseudo_p;  // state entries with an active pseudo channel
  std::vector<int> pseudo_q;
  std::vector<int> meters;    // state entries with a voltage reading
};

struct ObservabilityOptions {
  // Zero-injection nodes enter as exact virtual injection rows.
  bool zero_injection_rows = true;
  // Optional extra instrumentation rows, disabled in the baseline analysis.
  bool branch_flow_rows = false;
  bool slack_injection_rows = false;
  double rank_tolerance = 1e-10;  // relative to the largest singular value
};

struct ObservabilityReport {
  Eigen::MatrixXd H;            // stacked measurement matrix
  Eigen::MatrixXd incidence;    // full node-line incidence, slack row first
  Eigen::MatrixXd reduced_incidence;  // slack row removed; nonsingular on trees
  int state_dimension = 0;      // 2 x state entries
  int rank = 0;
  double index_percent = 0.0;   // rank / state_dimension x 100
  Eigen::MatrixXd null_basis;   // orthonormal basis of the unobservable space
};

ObservabilityReport analyze_observability(const FeederModel& model,
                                          const SensitivityModel& sens,
                                          const ObservabilityChannels& channels,
                                          const ObservabilityOptions& opts = {});

// Channels implied by an estimation measurement set: pseudo rows on both
// axes of every pseudo entry plus its voltage meters.
ObservabilityChannels channels_from(const MeasurementSet& ms);

struct PseudoCoverageReport {
  int trials = 0;
  int full_rank_trials = 0;
  std::vector<double> indices;
  bool all_observable() const { return trials == full_rank_trials; }
};

// Full pseudo coverage of every load entry must always yield a 100% index;
// checked on randomly generated feeders.
PseudoCoverageReport verify_full_pseudo_coverage(int trials, std::uint64_t seed,
                                                 int max_size = 30,
                                                 bool three_phase = false);

}  // namespace dsse
