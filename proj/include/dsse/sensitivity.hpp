#pragma once

#include <Eigen/Dense>
#include <complex>
#include <vector>

#include "dsse/feeder.hpp"

namespace dsse {

enum class SensitivityMode { SinglePhase, MultiPhase };

// First-order model of squared voltage magnitudes around the no-load point:
//
//   v = R p + X q + v_tilde
//
// R and X are dense over state entries.  In single-phase mode an entry is
// twice the resistance (reactance) summed over the lines shared by the two
// nodes' paths to the slack.  In multi-phase mode entries follow the
// conjugated aggregated line impedance rotated by the 120-degree phase
// operator, which reduces to the single-phase expression on the diagonal
// phase pairs.
class SensitivityModel {
 public:
  static SensitivityModel build(const FeederModel& model);
  static SensitivityModel build_single_phase(const FeederModel& model);
  static SensitivityModel build_multi_phase(const FeederModel& model);

  SensitivityMode mode() const { return mode_; }
  const Eigen::MatrixXd& R() const { return R_; }
  const Eigen::MatrixXd& X() const { return X_; }
  const Eigen::VectorXd& v_tilde() const { return v_tilde_; }
  const StateIndex& index() const { return index_; }
  int size() const { return index_.size(); }

  Eigen::VectorXd predict_voltage(const Injections& inj) const;

 private:
  SensitivityMode mode_ = SensitivityMode::SinglePhase;
  Eigen::MatrixXd R_;
  Eigen::MatrixXd X_;
  Eigen::VectorXd v_tilde_;
  StateIndex index_;
};

// Sum of line impedances over the common path of i and j, as a 3x3 matrix in
// global phase indexing.  Entries are complete for phase pairs available at
// lca(i, j); other entries are partial sums and must not be read.
Eigen::Matrix3cd path_impedance_sum(const FeederModel& model, int i, int j);

// Conjugate of the above: the aggregated impedance that drives both the
// multi-phase sensitivity entries and the inter-area coupling blocks.
Eigen::Matrix3cd conjugated_path_impedance(const FeederModel& model, int i, int j);

// exp(-i 2 pi / 3) raised to (row_phase - col_phase).
std::complex<double> phase_rotation(Phase row, Phase col);

// Sensitivity entries R(e_row, e_col), X(e_row, e_col) computed from one
// aggregated impedance block; shared by the dense build and the block-
// compressed form.
struct SensitivityPair {
  double r = 0.0;
  double x = 0.0;
};
SensitivityPair sensitivity_from_block(const Eigen::Matrix3cd& z_conj,
                                       Phase row_phase, Phase col_phase);

// Block-compressed storage for partitioned feeders: one aggregated impedance
// block per area pair and per (unclustered node, area) pair, exact dense
// slices for in-area pairs, and dense entries among unclustered nodes.  Every
// cross-area pair shares its block with the corresponding root pair, so the
// partition must be non-nested.
class CompressedSensitivity {
 public:
  static CompressedSensitivity build(const FeederModel& model,
                                     const SensitivityModel& sens,
                                     const AreaPartition& partition);

  // Reconstructed dense entries; exact match with the dense model.
  SensitivityPair entry(int row_entry, int col_entry) const;
  Eigen::MatrixXd reconstruct_R() const;
  Eigen::MatrixXd reconstruct_X() const;

  std::size_t stored_scalars() const;
  std::size_t dense_scalars() const;

 private:
  int area_count_ = 0;
  StateIndex index_;
  std::vector<int> area_of_entry_;   // -1 for unclustered entries
  std::vector<int> pos_in_region_;   // position within the region's entry list
  std::vector<int> uncl_slot_;       // unclustered node slot per entry, -1 otherwise
  std::vector<Eigen::Matrix3cd> root_blocks_;       // area_count^2, conjugated
  std::vector<Eigen::Matrix3cd> uncl_area_blocks_;  // n_uncl_nodes * area_count
  std::vector<Eigen::MatrixXd> in_area_R_;
  std::vector<Eigen::MatrixXd> in_area_X_;
  Eigen::MatrixXd uncl_R_;
  Eigen::MatrixXd uncl_X_;
};

}  // namespace dsse
