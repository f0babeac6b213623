#include "dsse/estimator.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>

namespace dsse {

namespace {

double seconds_since(std::chrono::steady_clock::time_point start) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - start)
      .count();
}

std::vector<int> free_entries(const MeasurementSet& ms) {
  std::vector<int> out;
  for (int k = 0; k < ms.size(); ++k)
    if (ms.has_pseudo[static_cast<size_t>(k)]) out.push_back(k);
  return out;
}

}  // namespace

Eigen::VectorXd VoltageFeedback::evaluate(const SensitivityModel& sens,
                                          const Injections& z) const {
  if (kind_ == Kind::Linear) return sens.predict_voltage(z);
  return solve_nonlinear(*model_, z, pf_opts_).v;
}

double wls_objective(const MeasurementSet& ms, const SensitivityModel& sens,
                     const Injections& z) {
  const Eigen::VectorXd v = sens.predict_voltage(z);
  double cost = 0.0;
  for (size_t m = 0; m < ms.meters.size(); ++m) {
    const double r = v[ms.meters[m]] - ms.v_meas[static_cast<Eigen::Index>(m)];
    const double s = ms.sigma_v[static_cast<Eigen::Index>(m)];
    cost += 0.5 * r * r / (s * s);
  }
  for (int k = 0; k < ms.size(); ++k) {
    if (!ms.has_pseudo[static_cast<size_t>(k)]) continue;
    const double rp = z.p[k] - ms.p_pseudo[k];
    const double rq = z.q[k] - ms.q_pseudo[k];
    cost += 0.5 * rp * rp / (ms.sigma_p[k] * ms.sigma_p[k]);
    cost += 0.5 * rq * rq / (ms.sigma_q[k] * ms.sigma_q[k]);
  }
  return cost;
}

Injections wls_gradient(const MeasurementSet& ms, const SensitivityModel& sens,
                        const Injections& z, const Eigen::VectorXd& v_model) {
  const int n = ms.size();
  // Coupling terms accumulate separately, meter-major in ascending meter
  // order, and are added to the pseudo terms at the end.  The multi-area
  // decomposition evaluates the same sums groupwise with the same ordering,
  // which keeps the two paths numerically aligned.
  Injections coupling = Injections::zero(n);
  for (size_t m = 0; m < ms.meters.size(); ++m) {
    const int j = ms.meters[m];
    const double sigma = ms.sigma_v[static_cast<Eigen::Index>(m)];
    const double nu =
        (v_model[j] - ms.v_meas[static_cast<Eigen::Index>(m)]) / (sigma * sigma);
    for (int i = 0; i < n; ++i) {
      coupling.p[i] += sens.R()(j, i) * nu;
      coupling.q[i] += sens.X()(j, i) * nu;
    }
  }
  Injections g = Injections::zero(n);
  for (int k = 0; k < n; ++k) {
    if (ms.has_pseudo[static_cast<size_t>(k)]) {
      g.p[k] = (z.p[k] - ms.p_pseudo[k]) / (ms.sigma_p[k] * ms.sigma_p[k]) +
               coupling.p[k];
      g.q[k] = (z.q[k] - ms.q_pseudo[k]) / (ms.sigma_q[k] * ms.sigma_q[k]) +
               coupling.q[k];
    } else {
      g.p[k] = coupling.p[k];
      g.q[k] = coupling.q[k];
    }
  }
  return g;
}

Injections project_box(const MeasurementSet& ms, Injections z) {
  for (int k = 0; k < ms.size(); ++k) {
    z.p[k] = std::clamp(z.p[k], ms.p_lo[k], ms.p_hi[k]);
    z.q[k] = std::clamp(z.q[k], ms.q_lo[k], ms.q_hi[k]);
  }
  return z;
}

Injections initial_state(const MeasurementSet& ms) {
  Injections z{ms.p_pseudo, ms.q_pseudo};
  return project_box(ms, std::move(z));
}

namespace {

// Hessian of the WLS cost restricted to the free entries, stacked [p; q].
struct FreeHessian {
  Eigen::MatrixXd Rm, Xm;   // meter rows x free columns
  Eigen::VectorXd wv;       // meter weights
  Eigen::VectorXd wp, wq;   // pseudo weights over free entries
  int dim() const { return 2 * static_cast<int>(wp.size()); }

  Eigen::VectorXd apply(const Eigen::VectorXd& x) const {
    const Eigen::Index f = wp.size();
    const Eigen::VectorXd xp = x.head(f);
    const Eigen::VectorXd xq = x.tail(f);
    const Eigen::VectorXd dv = wv.asDiagonal() * (Rm * xp + Xm * xq);
    Eigen::VectorXd y(2 * f);
    y.head(f) = wp.cwiseProduct(xp) + Rm.transpose() * dv;
    y.tail(f) = wq.cwiseProduct(xq) + Xm.transpose() * dv;
    return y;
  }

  Eigen::MatrixXd dense() const {
    const Eigen::Index f = wp.size();
    Eigen::MatrixXd h(2 * f, 2 * f);
    const Eigen::MatrixXd wr = wv.asDiagonal() * Rm;
    const Eigen::MatrixXd wx = wv.asDiagonal() * Xm;
    h.topLeftCorner(f, f) = Rm.transpose() * wr;
    h.topLeftCorner(f, f) += Eigen::MatrixXd(wp.asDiagonal());
    h.topRightCorner(f, f) = Rm.transpose() * wx;
    h.bottomLeftCorner(f, f) = Xm.transpose() * wr;
    h.bottomRightCorner(f, f) = Xm.transpose() * wx;
    h.bottomRightCorner(f, f) += Eigen::MatrixXd(wq.asDiagonal());
    return h;
  }
};

FreeHessian build_free_hessian(const MeasurementSet& ms,
                               const SensitivityModel& sens) {
  const std::vector<int> free = free_entries(ms);
  const Eigen::Index f = static_cast<Eigen::Index>(free.size());
  const Eigen::Index m = static_cast<Eigen::Index>(ms.meters.size());
  FreeHessian h;
  h.Rm.resize(m, f);
  h.Xm.resize(m, f);
  h.wv.resize(m);
  h.wp.resize(f);
  h.wq.resize(f);
  for (Eigen::Index r = 0; r < m; ++r) {
    const int j = ms.meters[static_cast<size_t>(r)];
    const double s = ms.sigma_v[r];
    h.wv[r] = 1.0 / (s * s);
    for (Eigen::Index c = 0; c < f; ++c) {
      h.Rm(r, c) = sens.R()(j, free[static_cast<size_t>(c)]);
      h.Xm(r, c) = sens.X()(j, free[static_cast<size_t>(c)]);
    }
  }
  for (Eigen::Index c = 0; c < f; ++c) {
    const int k = free[static_cast<size_t>(c)];
    h.wp[c] = 1.0 / (ms.sigma_p[k] * ms.sigma_p[k]);
    h.wq[c] = 1.0 / (ms.sigma_q[k] * ms.sigma_q[k]);
  }
  return h;
}

double power_iterate(const FreeHessian& h, double shift, const ConstantsOptions& opts) {
  Rng rng(opts.seed);
  const int dim = h.dim();
  Eigen::VectorXd x(dim);
  for (int k = 0; k < dim; ++k) x[k] = rng.normal();
  x.normalize();
  double lambda = 0.0;
  for (int it = 0; it < opts.power_max_iterations; ++it) {
    Eigen::VectorXd y = shift != 0.0 ? (shift * x - h.apply(x)).eval() : h.apply(x);
    const double norm = y.norm();
    if (norm == 0.0) return 0.0;
    y /= norm;
    // Rayleigh quotient of the original operator: the unshifted iteration
    // converges onto the largest eigenvalue, the shifted one onto the
    // smallest, and both report it on the H scale.
    const double next = y.dot(h.apply(y));
    const bool settled = std::abs(next - lambda) <=
                         opts.power_tolerance * std::max(1e-300, std::abs(next));
    lambda = next;
    x = y;
    if (settled && it > 2) return lambda;
  }
  throw SolverError("power iteration did not settle within " +
                    std::to_string(opts.power_max_iterations) + " iterations");
}

}  // namespace

ConvergenceConstants estimate_constants(const MeasurementSet& ms,
                                        const SensitivityModel& sens,
                                        const ConstantsOptions& opts) {
  const FreeHessian h = build_free_hessian(ms, sens);
  if (h.dim() == 0)
    throw SolverError("no free entries: every node is pinned, nothing to estimate");

  ConvergenceConstants out;
  const double floor_weight =
      std::min(h.wp.minCoeff(), h.wq.minCoeff());

  if (ms.meters.empty()) {
    // Pure pseudo problem: the Hessian is the diagonal weight matrix.
    out.monotonicity = floor_weight;
    out.lipschitz = std::max(h.wp.maxCoeff(), h.wq.maxCoeff());
    return out;
  }

  const bool exact = opts.method == ConstantsOptions::Method::Exact ||
                     (opts.method == ConstantsOptions::Method::Auto &&
                      h.dim() <= opts.exact_dimension_limit);
  if (exact) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(h.dense());
    if (eig.info() != Eigen::Success)
      throw SolverError("eigendecomposition of the WLS Hessian failed");
    out.monotonicity = std::max(eig.eigenvalues().minCoeff(), floor_weight);
    out.lipschitz = eig.eigenvalues().maxCoeff();
  } else {
    const double lmax = power_iterate(h, 0.0, opts);
    out.lipschitz = lmax * (1.0 + 1e-6);
    const double lmin = power_iterate(h, out.lipschitz * (1.0 + 1e-3), opts);
    out.monotonicity = std::max(lmin * (1.0 - 1e-6), floor_weight);
  }
  return out;
}

double estimate_feedback_gap(const MeasurementSet& ms, const SensitivityModel& sens,
                             const FeederModel& model, int samples,
                             std::uint64_t seed) {
  Rng rng(seed);
  const int n = ms.size();
  double worst = 0.0;
  for (int s = 0; s < samples; ++s) {
    Injections z = Injections::zero(n);
    for (int k = 0; k < n; ++k) {
      z.p[k] = rng.uniform(ms.p_lo[k], ms.p_hi[k]);
      z.q[k] = rng.uniform(ms.q_lo[k], ms.q_hi[k]);
    }
    const Eigen::VectorXd v_exact = sens.predict_voltage(z);
    const Eigen::VectorXd v_sim = solve_nonlinear(model, z).v;
    const Injections g_exact = wls_gradient(ms, sens, z, v_exact);
    const Injections g_sim = wls_gradient(ms, sens, z, v_sim);
    const double gap = (g_sim.p - g_exact.p).squaredNorm() +
                       (g_sim.q - g_exact.q).squaredNorm();
    worst = std::max(worst, gap);
  }
  return worst;
}

EstimateState solve_gradient(const MeasurementSet& ms, const SensitivityModel& sens,
                             const VoltageFeedback& feedback,
                             const SolveOptions& opts) {
  const auto start = std::chrono::steady_clock::now();
  double epsilon = 0.0;
  if (opts.epsilon) {
    epsilon = *opts.epsilon;
    if (epsilon <= 0.0) throw SolverError("step size must be positive");
  } else {
    epsilon = estimate_constants(ms, sens, opts.constants).auto_epsilon();
  }

  EstimateState state;
  state.epsilon = epsilon;
  state.z = initial_state(ms);
  state.v = feedback.evaluate(sens, state.z);

  double previous_objective = std::numeric_limits<double>::infinity();
  int rising = 0;
  for (int s = 0; s < opts.max_iterations; ++s) {
    const Injections g = wls_gradient(ms, sens, state.z, state.v);
    Injections next{state.z.p - epsilon * g.p, state.z.q - epsilon * g.q};
    next = project_box(ms, std::move(next));
    const Eigen::VectorXd v_next = feedback.evaluate(sens, next);

    const double step_norm = std::sqrt((next.p - state.z.p).squaredNorm() +
                                       (next.q - state.z.q).squaredNorm());
    const double voltage_delta = (v_next - state.v).lpNorm<Eigen::Infinity>();
    const double objective = wls_objective(ms, sens, next);

    state.z = std::move(next);
    state.v = v_next;
    state.iterations = s + 1;
    state.objective = objective;
    if (opts.record_trace)
      state.trace.push_back(
          {s + 1, objective, step_norm, voltage_delta, seconds_since(start)});

    if (objective > previous_objective) {
      if (++rising >= 10)
        throw SolverError("objective rose for 10 consecutive iterations; "
                          "step size " + std::to_string(epsilon) + " diverges");
    } else {
      rising = 0;
    }
    previous_objective = objective;

    if (voltage_delta < opts.delta) {
      state.converged = true;
      break;
    }
  }
  return state;
}

// Exact minimizer of the box-constrained quadratic: dense normal equations
// over the free entries with an active-set loop pinning entries that the KKT
// conditions put on their bounds.  Direct solution stays exact under the
// wildly heterogeneous channel weights that make a plain gradient reference
// impractically slow.
Injections solve_reference(const MeasurementSet& ms, const SensitivityModel& sens) {
  const std::vector<int> free = free_entries(ms);
  const Eigen::Index f = static_cast<Eigen::Index>(free.size());
  const Eigen::Index m = static_cast<Eigen::Index>(ms.meters.size());
  const int n = ms.size();
  if (f == 0) return project_box(ms, Injections::zero(n));

  // Stacked unknown x = [p_free; q_free]; everything else is pinned at zero
  // by its singleton box.
  Eigen::MatrixXd Rf(m, f), Xf(m, f);
  for (Eigen::Index row = 0; row < m; ++row)
    for (Eigen::Index col = 0; col < f; ++col) {
      Rf(row, col) = sens.R()(ms.meters[static_cast<size_t>(row)],
                              free[static_cast<size_t>(col)]);
      Xf(row, col) = sens.X()(ms.meters[static_cast<size_t>(row)],
                              free[static_cast<size_t>(col)]);
    }
  Eigen::VectorXd wv(m);
  Eigen::VectorXd rhs_v(m);
  for (Eigen::Index row = 0; row < m; ++row) {
    const double sv = ms.sigma_v[row];
    wv[row] = 1.0 / (sv * sv);
    rhs_v[row] = ms.v_meas[row] - sens.v_tilde()[ms.meters[static_cast<size_t>(row)]];
  }

  Eigen::MatrixXd A(2 * f, 2 * f);
  A.topLeftCorner(f, f) = Rf.transpose() * wv.asDiagonal() * Rf;
  A.topRightCorner(f, f) = Rf.transpose() * wv.asDiagonal() * Xf;
  A.bottomLeftCorner(f, f) = A.topRightCorner(f, f).transpose();
  A.bottomRightCorner(f, f) = Xf.transpose() * wv.asDiagonal() * Xf;
  Eigen::VectorXd b(2 * f);
  b.head(f) = Rf.transpose() * (wv.asDiagonal() * rhs_v);
  b.tail(f) = Xf.transpose() * (wv.asDiagonal() * rhs_v);
  Eigen::VectorXd lo(2 * f), hi(2 * f);
  for (Eigen::Index col = 0; col < f; ++col) {
    const int e = free[static_cast<size_t>(col)];
    const double wp = 1.0 / (ms.sigma_p[e] * ms.sigma_p[e]);
    const double wq = 1.0 / (ms.sigma_q[e] * ms.sigma_q[e]);
    A(col, col) += wp;
    A(f + col, f + col) += wq;
    b[col] += wp * ms.p_pseudo[e];
    b[f + col] += wq * ms.q_pseudo[e];
    lo[col] = ms.p_lo[e];
    hi[col] = ms.p_hi[e];
    lo[f + col] = ms.q_lo[e];
    hi[f + col] = ms.q_hi[e];
  }

  // Active-set loop: pin bound-violating entries, re-solve the reduced
  // system, release entries whose multiplier sign says the pin was wrong.
  std::vector<int> state(static_cast<size_t>(2 * f), 0);  // -1 lo, 0 free, +1 hi
  Eigen::VectorXd x = Eigen::VectorXd::Zero(2 * f);
  for (int pass = 0; pass < 200; ++pass) {
    std::vector<Eigen::Index> loose;
    for (Eigen::Index k = 0; k < 2 * f; ++k)
      if (state[static_cast<size_t>(k)] == 0) loose.push_back(k);
    Eigen::VectorXd fixed = Eigen::VectorXd::Zero(2 * f);
    for (Eigen::Index k = 0; k < 2 * f; ++k) {
      if (state[static_cast<size_t>(k)] < 0) fixed[k] = lo[k];
      if (state[static_cast<size_t>(k)] > 0) fixed[k] = hi[k];
    }
    if (!loose.empty()) {
      const Eigen::Index d = static_cast<Eigen::Index>(loose.size());
      Eigen::MatrixXd Ar(d, d);
      Eigen::VectorXd br(d);
      for (Eigen::Index i = 0; i < d; ++i) {
        br[i] = b[loose[static_cast<size_t>(i)]] -
                A.row(loose[static_cast<size_t>(i)]).dot(fixed);
        for (Eigen::Index j = 0; j < d; ++j)
          Ar(i, j) = A(loose[static_cast<size_t>(i)], loose[static_cast<size_t>(j)]);
      }
      const Eigen::VectorXd xr = Ar.ldlt().solve(br);
      x = fixed;
      for (Eigen::Index i = 0; i < d; ++i) x[loose[static_cast<size_t>(i)]] = xr[i];
    } else {
      x = fixed;
    }

    // KKT check: free entries inside their boxes, pinned entries with the
    // gradient pointing back into the bound.
    const Eigen::VectorXd grad = A * x - b;
    bool consistent = true;
    for (Eigen::Index k = 0; k < 2 * f; ++k) {
      int& s = state[static_cast<size_t>(k)];
      if (s == 0) {
        if (x[k] < lo[k] - 1e-14) {
          s = -1;
          consistent = false;
        } else if (x[k] > hi[k] + 1e-14) {
          s = 1;
          consistent = false;
        }
      } else if (s < 0 && grad[k] < -1e-12) {
        s = 0;
        consistent = false;
      } else if (s > 0 && grad[k] > 1e-12) {
        s = 0;
        consistent = false;
      }
    }
    if (consistent) break;
  }

  Injections z = Injections::zero(n);
  for (Eigen::Index col = 0; col < f; ++col) {
    const int e = free[static_cast<size_t>(col)];
    z.p[e] = std::clamp(x[col], lo[col], hi[col]);
    z.q[e] = std::clamp(x[f + col], lo[f + col], hi[f + col]);
  }
  return project_box(ms, std::move(z));
}

EstimateState step_realtime(const EstimateState& previous, const MeasurementSet& tick,
                            const SensitivityModel& sens,
                            const VoltageFeedback& feedback, double epsilon) {
  EstimateState state;
  state.epsilon = epsilon;
  const Injections g = wls_gradient(tick, sens, previous.z, previous.v);
  Injections next{previous.z.p - epsilon * g.p, previous.z.q - epsilon * g.q};
  state.z = project_box(tick, std::move(next));
  state.v = feedback.evaluate(sens, state.z);
  state.iterations = previous.iterations + 1;
  state.objective = wls_objective(tick, sens, state.z);
  state.converged = false;
  return state;
}

GaussNewtonResult solve_gauss_newton(const MeasurementSet& ms,
                                     const FeederModel& model,
                                     const GaussNewtonOptions& opts) {
  const auto start = std::chrono::steady_clock::now();
  const std::vector<int> free = free_entries(ms);
  const Eigen::Index f = static_cast<Eigen::Index>(free.size());
  const Eigen::Index m = static_cast<Eigen::Index>(ms.meters.size());
  const int n = ms.size();

  GaussNewtonResult result;
  result.state.epsilon = 0.0;

  // Stacked measurement vector [p_pseudo; q_pseudo; v_meas] and weights.
  Eigen::VectorXd y(2 * f + m);
  Eigen::VectorXd w(2 * f + m);
  for (Eigen::Index c = 0; c < f; ++c) {
    const int k = free[static_cast<size_t>(c)];
    y[c] = ms.p_pseudo[k];
    y[f + c] = ms.q_pseudo[k];
    w[c] = 1.0 / (ms.sigma_p[k] * ms.sigma_p[k]);
    w[f + c] = 1.0 / (ms.sigma_q[k] * ms.sigma_q[k]);
  }
  for (Eigen::Index r = 0; r < m; ++r) {
    y[2 * f + r] = ms.v_meas[r];
    w[2 * f + r] = 1.0 / (ms.sigma_v[r] * ms.sigma_v[r]);
  }

  // Flat start: zero injections everywhere.
  Eigen::VectorXd zf = Eigen::VectorXd::Zero(2 * f);
  auto expand = [&](const Eigen::VectorXd& packed) {
    Injections inj = Injections::zero(n);
    for (Eigen::Index c = 0; c < f; ++c) {
      inj.p[free[static_cast<size_t>(c)]] = packed[c];
      inj.q[free[static_cast<size_t>(c)]] = packed[f + c];
    }
    return inj;
  };
  auto meter_voltages = [&](const Injections& inj) {
    const PowerFlowSolution sol = solve_nonlinear(model, inj, opts.pf);
    Eigen::VectorXd vm(m);
    for (Eigen::Index r = 0; r < m; ++r)
      vm[r] = sol.v[ms.meters[static_cast<size_t>(r)]];
    return vm;
  };

  result.status = "iteration cap";
  for (int it = 0; it < opts.max_iterations; ++it) {
    Eigen::VectorXd vm;
    try {
      vm = meter_voltages(expand(zf));
    } catch (const PowerFlowError& err) {
      result.status = std::string("power flow failed: ") + err.what();
      break;
    }

    Eigen::VectorXd residual(2 * f + m);
    residual.head(f) = y.head(f) - zf.head(f);
    residual.segment(f, f) = y.segment(f, f) - zf.tail(f);
    residual.tail(m) = y.tail(m) - vm;

    // Forward-difference voltage Jacobian over the free entries.
    Eigen::MatrixXd jv(m, 2 * f);
    bool jacobian_ok = true;
    for (Eigen::Index c = 0; c < 2 * f && jacobian_ok; ++c) {
      Eigen::VectorXd bumped = zf;
      const double step = opts.fd_step * std::max(1.0, std::abs(zf[c]));
      bumped[c] += step;
      try {
        jv.col(c) = (meter_voltages(expand(bumped)) - vm) / step;
      } catch (const PowerFlowError& err) {
        result.status = std::string("power flow failed in Jacobian: ") + err.what();
        jacobian_ok = false;
      }
    }
    if (!jacobian_ok) break;

    // Normal equations of the weighted linearized problem.
    Eigen::MatrixXd a = Eigen::MatrixXd::Zero(2 * f, 2 * f);
    a.diagonal().head(f) = w.head(f);
    a.diagonal().tail(f) = w.segment(f, f);
    const Eigen::MatrixXd wjv = w.tail(m).asDiagonal() * jv;
    a += jv.transpose() * wjv;
    if (opts.levenberg > 0.0)
      a.diagonal().array() += opts.levenberg;

    if (it == 0) {
      Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(a);
      const double lo = eig.eigenvalues().minCoeff();
      const double hi = eig.eigenvalues().maxCoeff();
      result.condition_number =
          lo > 0.0 ? hi / lo : std::numeric_limits<double>::infinity();
    }

    Eigen::VectorXd rhs = Eigen::VectorXd::Zero(2 * f);
    rhs.head(f) = w.head(f).cwiseProduct(residual.head(f));
    rhs.tail(f) = w.segment(f, f).cwiseProduct(residual.segment(f, f));
    rhs += jv.transpose() * (w.tail(m).cwiseProduct(residual.tail(m)));

    const Eigen::VectorXd dz = a.ldlt().solve(rhs);
    if (!dz.allFinite())
      throw SolverError("singular normal matrix in Gauss-Newton (condition " +
                        std::to_string(result.condition_number) + ")");
    zf += dz;

    const double cost =
        0.5 * residual.cwiseProduct(w.cwiseSqrt()).squaredNorm();
    result.state.iterations = it + 1;
    result.state.trace.push_back({it + 1, cost, dz.norm(),
                                  dz.lpNorm<Eigen::Infinity>(),
                                  seconds_since(start)});
    if (dz.lpNorm<Eigen::Infinity>() < opts.step_tolerance) {
      result.state.converged = true;
      result.status = "converged";
      break;
    }
  }

  // Final state, clipped to the feasible boxes and evaluated honestly.
  Injections z = project_box(ms, expand(zf));
  result.state.z = z;
  try {
    result.state.v = solve_nonlinear(model, z, opts.pf).v;
  } catch (const PowerFlowError&) {
    result.state.v = Eigen::VectorXd::Constant(n, std::numeric_limits<double>::quiet_NaN());
    if (result.state.converged) result.status = "final power flow failed";
    result.state.converged = false;
  }
  if (!result.state.trace.empty())
    result.state.objective = result.state.trace.back().objective;
  return result;
}

}  // namespace dsse
