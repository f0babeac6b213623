#pragma once

#include <Eigen/Dense>
#include <complex>
#include <vector>

#include "dsse/feeder.hpp"
#include "dsse/sensitivity.hpp"

namespace dsse {

struct PowerFlowOptions {
  double tolerance = 1e-10;  // max complex power mismatch, pu
  int max_sweeps = 100;
  double collapse_voltage = 0.5;  // abort below this magnitude, pu
  double max_injection = 10.0;    // sanity bound on |s| per phase, pu
};

// Fixed point of the backward/forward current sweep on the radial feeder.
// Vectors are laid out per StateIndex entry; per-line quantities follow the
// downstream node's phase order.
struct PowerFlowSolution {
  Eigen::VectorXcd voltage;       // complex phase voltages
  Eigen::VectorXd v;              // squared magnitudes
  std::vector<Eigen::VectorXcd> branch_current;   // per line
  std::vector<Eigen::VectorXcd> branch_power;     // sending-end S per line
  std::vector<Eigen::VectorXd> branch_current_sq; // squared magnitudes per line
  int sweeps = 0;
  double mismatch = 0.0;  // max complex power residual at the returned state
};

PowerFlowSolution solve_nonlinear(const FeederModel& model, const Injections& inj,
                                  const PowerFlowOptions& opts = {});

// Linearized voltages for the same injections; v only, no angles.
Eigen::VectorXd solve_linear(const SensitivityModel& sens, const Injections& inj);

// Largest complex nodal power mismatch of a candidate solution, pu.
double power_mismatch(const FeederModel& model, const Injections& inj,
                      const PowerFlowSolution& sol);

}  // namespace dsse
