#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "dsse/measurements.hpp"
#include "dsse/powerflow.hpp"
#include "dsse/sensitivity.hpp"

namespace dsse {

// Source of the model voltages fed back into the gradient: the linearized
// model itself, or the nonlinear sweep solver playing the role of a grid
// simulator.
class VoltageFeedback {
 public:
  enum class Kind { Linear, Nonlinear };

  static VoltageFeedback linear() { return VoltageFeedback(); }
  static VoltageFeedback nonlinear(const FeederModel& model,
                                   PowerFlowOptions opts = {}) {
    VoltageFeedback fb;
    fb.kind_ = Kind::Nonlinear;
    fb.model_ = &model;
    fb.pf_opts_ = opts;
    return fb;
  }

  Kind kind() const { return kind_; }
  Eigen::VectorXd evaluate(const SensitivityModel& sens, const Injections& z) const;

 private:
  Kind kind_ = Kind::Linear;
  const FeederModel* model_ = nullptr;
  PowerFlowOptions pf_opts_;
};

// Weighted least-squares cost of Problem (pseudo channels + metered squared
// voltage magnitudes) under the linearized voltage model.
double wls_objective(const MeasurementSet& ms, const SensitivityModel& sens,
                     const Injections& z);

// Gradient of the WLS cost with the voltage residuals evaluated at
// `v_model`.  With v_model from the linear model this is the exact gradient;
// with simulator feedback it is the inexact-gradient variant.
Injections wls_gradient(const MeasurementSet& ms, const SensitivityModel& sens,
                        const Injections& z, const Eigen::VectorXd& v_model);

// Euclidean projection onto the per-entry feasible boxes.
Injections project_box(const MeasurementSet& ms, Injections z);

// Pseudo-measurement vector projected onto the boxes; the canonical start.
Injections initial_state(const MeasurementSet& ms);

struct IterationRecord {
  int iteration = 0;
  double objective = 0.0;
  double step_norm = 0.0;     // ||z_{s+1} - z_s||_2
  double voltage_delta = 0.0; // ||v_{s+1} - v_s||_inf
  double seconds = 0.0;       // wall time since solve start
};

struct EstimateState {
  Injections z;
  Eigen::VectorXd v;
  int iterations = 0;
  double objective = 0.0;
  double epsilon = 0.0;
  bool converged = false;
  std::vector<IterationRecord> trace;
};

struct ConstantsOptions {
  enum class Method { Auto, Exact, PowerIteration };
  Method method = Method::Auto;
  int exact_dimension_limit = 1500;
  double power_tolerance = 1e-8;
  int power_max_iterations = 50000;
  std::uint64_t seed = 0x5eed;
};

// Strong-monotonicity / Lipschitz constants of the WLS gradient over the
// free (pseudo-measured) entries, plus the drift and feedback-gap terms of
// the tracking bound.  Unused terms stay zero.
struct ConvergenceConstants {
  double monotonicity = 0.0;  // M
  double lipschitz = 0.0;     // L
  double drift = 0.0;         // max ||z*_{t+1} - z*_t|| between ticks
  double feedback_gap_sq = 0.0;  // max ||inexact - exact gradient||^2

  double auto_epsilon() const { return monotonicity / (lipschitz * lipschitz); }
  double epsilon_limit() const {
    return 2.0 * monotonicity / (lipschitz * lipschitz);
  }
  double contraction(double epsilon) const {
    return 1.0 + epsilon * epsilon * lipschitz * lipschitz -
           2.0 * epsilon * monotonicity;
  }
  // Asymptotic bound on ||z - z*||^2 under bounded drift and feedback gap.
  double tracking_ball_sq(double epsilon) const {
    return (drift + epsilon * epsilon * feedback_gap_sq) /
           (2.0 * epsilon * monotonicity -
            epsilon * epsilon * lipschitz * lipschitz);
  }
};

ConvergenceConstants estimate_constants(const MeasurementSet& ms,
                                        const SensitivityModel& sens,
                                        const ConstantsOptions& opts = {});

// Largest squared gap between the simulator-fed and linear-model gradients
// over random feasible states.
double estimate_feedback_gap(const MeasurementSet& ms, const SensitivityModel& sens,
                             const FeederModel& model, int samples,
                             std::uint64_t seed);

struct SolveOptions {
  std::optional<double> epsilon;  // empty: M / L^2 from estimate_constants
  double delta = 1e-6;            // stop when ||v_{s+1} - v_s||_inf < delta
  int max_iterations = 500;
  bool record_trace = true;
  ConstantsOptions constants{};
};

// Projected-gradient solve of the WLS problem.  Throws SolverError when the
// objective rises for ten consecutive iterations (diverging step size).
EstimateState solve_gradient(const MeasurementSet& ms, const SensitivityModel& sens,
                             const VoltageFeedback& feedback,
                             const SolveOptions& opts = {});

// Tightly converged reference optimum of the linear-model WLS problem.
Injections solve_reference(const MeasurementSet& ms, const SensitivityModel& sens);

// One projected-gradient step against this tick's measurements, projecting
// onto this tick's boxes: the quasi-static tracking update.
EstimateState step_realtime(const EstimateState& previous, const MeasurementSet& tick,
                            const SensitivityModel& sens,
                            const VoltageFeedback& feedback, double epsilon);

struct GaussNewtonOptions {
  int max_iterations = 50;
  double step_tolerance = 1e-9;   // stop on ||dz||_inf
  double levenberg = 0.0;         // optional diagonal damping, off by default
  double fd_step = 1e-6;          // forward-difference perturbation
  PowerFlowOptions pf{};
};

struct GaussNewtonResult {
  EstimateState state;
  double condition_number = 0.0;  // of the first normal matrix
  std::string status;             // "converged", "iteration cap", ...
};

// Classic flat-start Gauss-Newton on the nonlinear measurement model with a
// finite-difference voltage Jacobian; the baseline the gradient scheme is
// compared against.  Non-convergence is reported in the result, not thrown;
// a singular normal matrix throws SolverError.
GaussNewtonResult solve_gauss_newton(const MeasurementSet& ms,
                                     const FeederModel& model,
                                     const GaussNewtonOptions& opts = {});

}  // namespace dsse
