// Sublinear semigroup T_t f via the nonlinear Kolmogorov backward equation
//
//   dv/ds (k) = max_g (Q(g) v)(k),   v(0) = f,   T_t f = v(t),
//
// integrated with classical fixed-step RK4. The per-state argmax field is
// recorded at every grid time; it feeds the selection module. Ties in the
// max resolve to the smallest grid index, which keeps the field (and every
// downstream policy) deterministic.
#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "umarkov/errors.hpp"
#include "umarkov/models.hpp"
#include "umarkov/parallel.hpp"
#include "umarkov/statespace.hpp"

namespace umarkov {

struct SemigroupRun {
  std::vector<double> time_grid;            // 0 = s_0 < ... < s_K = t
  std::vector<StateFunction> iterates;      // iterates[j] at time_grid[j]
  std::vector<std::vector<int>> argmax_field;  // argmax per (grid time, state)
  double step_size = 0;                     // effective step actually used
  std::vector<double> error_estimate;       // step-halving residual per step

  const StateFunction& final() const { return iterates.back(); }
};

namespace detail {

// w(k) = max_g (Q(g) v)(k); argmax (optional) gets the smallest maximizer.
// States are independent, so evaluation parallelizes over disjoint slots.
inline void sup_action(const UncertainGenerator& gen, const double* v, double* w, int* argmax) {
  const std::size_t nstates = gen.n_states();
  const std::size_t m = gen.family_size();
  parallel_for(nstates, 512, [&](std::size_t lo, std::size_t hi) {
    for (std::size_t k = lo; k < hi; ++k) {
      Configuration eta = static_cast<Configuration>(k);
      double best = gen.row_action(0, eta, v);
      int best_g = 0;
      for (std::size_t g = 1; g < m; ++g) {
        double a = gen.row_action(g, eta, v);
        if (a > best) {
          best = a;
          best_g = static_cast<int>(g);
        }
      }
      w[k] = best;
      if (argmax != nullptr) argmax[k] = best_g;
    }
  });
}

struct Rk4Work {
  StateFunction k1, k2, k3, k4, stage;
  explicit Rk4Work(std::size_t n) : k1(n), k2(n), k3(n), k4(n), stage(n) {}
};

// One RK4 step of length h from y into out; records the k1-stage argmax.
inline void rk4_step(const UncertainGenerator& gen, const StateFunction& y, double h,
                     StateFunction& out, Rk4Work& wk, int* argmax) {
  const std::size_t n = y.size();
  sup_action(gen, y.data(), wk.k1.data(), argmax);
  for (std::size_t i = 0; i < n; ++i) wk.stage[i] = y[i] + 0.5 * h * wk.k1[i];
  sup_action(gen, wk.stage.data(), wk.k2.data(), nullptr);
  for (std::size_t i = 0; i < n; ++i) wk.stage[i] = y[i] + 0.5 * h * wk.k2[i];
  sup_action(gen, wk.stage.data(), wk.k3.data(), nullptr);
  for (std::size_t i = 0; i < n; ++i) wk.stage[i] = y[i] + h * wk.k3[i];
  sup_action(gen, wk.stage.data(), wk.k4.data(), nullptr);
  for (std::size_t i = 0; i < n; ++i)
    out[i] = y[i] + (h / 6.0) * (wk.k1[i] + 2.0 * wk.k2[i] + 2.0 * wk.k3[i] + wk.k4[i]);
}

// Step plan shared by every integration route: full steps of size h, then a
// shortened final step if a meaningful remainder is left (guard 1e-9
// relative, so a remainder born of rounding does not become a micro-step).
struct StepPlan {
  double h = 0;
  std::size_t n_full = 0;
  double remainder = 0;  // 0 means no partial step
  std::size_t total() const { return n_full + (remainder > 0 ? 1 : 0); }
};

inline StepPlan plan_steps(double t, double step, double max_total_rate) {
  if (!(step > 0)) throw ParameterError("step must be positive, got " + std::to_string(step));
  if (t < 0) throw ParameterError("duration must be nonnegative, got " + std::to_string(t));
  StepPlan p;
  p.h = step;
  // RK4 preserves pointwise order for this right-hand side only when the
  // step stays below 1/(2 max total rate); clamp rather than trust callers.
  if (max_total_rate > 0) p.h = std::min(p.h, 0.5 / max_total_rate);
  if (t == 0) return p;
  double q = t / p.h;
  p.n_full = static_cast<std::size_t>(std::floor(q + 1e-9));
  double rem = t - static_cast<double>(p.n_full) * p.h;
  if (rem > 1e-9 * p.h) p.remainder = rem;
  if (p.total() == 0) {  // t smaller than any full step
    p.n_full = 0;
    p.remainder = t;
  }
  return p;
}

inline void validate_input_function(const UncertainGenerator& gen, const StateFunction& f,
                                    const char* what) {
  gen.require_function(f, what);
  for (double v : f)
    if (!std::isfinite(v)) throw ParameterError(std::string(what) + " contains a non-finite entry");
}

// History-free integration; bitwise identical to evolve()'s final iterate.
inline StateFunction evolve_final(const UncertainGenerator& gen, StateFunction f, double t,
                                  double step) {
  validate_input_function(gen, f, "state function");
  StepPlan plan = plan_steps(t, step, gen.max_total_rate());
  if (t == 0) return f;
  Rk4Work wk(f.size());
  StateFunction next(f.size());
  for (std::size_t i = 0; i < plan.n_full; ++i) {
    rk4_step(gen, f, plan.h, next, wk, nullptr);
    f.swap(next);
  }
  if (plan.remainder > 0) {
    rk4_step(gen, f, plan.remainder, next, wk, nullptr);
    f.swap(next);
  }
  return f;
}

}  // namespace detail

// Conservative default: resolves the fastest total rate ten-fold, never
// coarser than 1e-3.
inline double default_step(const UncertainGenerator& gen) {
  double r = gen.max_total_rate();
  return r > 0 ? std::min(1e-3, 0.1 / r) : 1e-3;
}

inline std::pair<StateFunction, std::vector<int>> apply_generator_sup(
    const UncertainGenerator& gen, const StateFunction& v) {
  detail::validate_input_function(gen, v, "state function");
  StateFunction w(v.size());
  std::vector<int> argmax(v.size());
  detail::sup_action(gen, v.data(), w.data(), argmax.data());
  return {std::move(w), std::move(argmax)};
}

// The supremum is taken over the finite control grid only; refining the
// grid never decreases the result, so grid resolution is the caller's
// accuracy knob for models whose optimum sits between grid points.
inline SemigroupRun evolve(const UncertainGenerator& gen, const StateFunction& f, double t,
                           double step) {
  detail::validate_input_function(gen, f, "state function");
  detail::StepPlan plan = detail::plan_steps(t, step, gen.max_total_rate());

  SemigroupRun run;
  run.step_size = plan.h;
  const std::size_t n = f.size();
  if (t == 0) {
    run.time_grid = {0.0};
    run.iterates = {f};
    StateFunction w(n);
    std::vector<int> am(n);
    detail::sup_action(gen, f.data(), w.data(), am.data());
    run.argmax_field.push_back(std::move(am));
    return run;
  }

  const std::size_t steps = plan.total();
  run.time_grid.reserve(steps + 1);
  run.iterates.reserve(steps + 1);
  run.argmax_field.reserve(steps + 1);
  run.error_estimate.reserve(steps);

  run.time_grid.push_back(0.0);
  run.iterates.push_back(f);

  detail::Rk4Work wk(n);
  StateFunction next(n), half(n), half2(n);
  std::vector<int> am(n);
  for (std::size_t i = 0; i < steps; ++i) {
    bool partial = plan.remainder > 0 && i + 1 == steps;
    double h = partial ? plan.remainder : plan.h;
    const StateFunction& y = run.iterates.back();
    detail::rk4_step(gen, y, h, next, wk, am.data());
    run.argmax_field.push_back(am);
    // Step-halving residual: rerun the step as two halves and compare.
    detail::rk4_step(gen, y, 0.5 * h, half, wk, nullptr);
    detail::rk4_step(gen, half, 0.5 * h, half2, wk, nullptr);
    double err = 0;
    for (std::size_t j = 0; j < n; ++j) err = std::max(err, std::abs(next[j] - half2[j]));
    run.error_estimate.push_back(err);
    run.time_grid.push_back(partial || i + 1 == steps ? t : static_cast<double>(i + 1) * plan.h);
    run.iterates.push_back(next);
  }
  // Argmax at the terminal iterate, for a complete field over the grid.
  StateFunction w(n);
  detail::sup_action(gen, run.iterates.back().data(), w.data(), am.data());
  run.argmax_field.push_back(am);
  return run;
}

struct GapReport {
  StateFunction lhs, rhs;
  double max_abs_gap = 0;
  double tol = 0;
  bool pass = false;
};

// Semigroup law T_s T_t = T_{s+t}: composition vs direct run.
inline GapReport check_semigroup(const UncertainGenerator& gen, const StateFunction& f, double s,
                                 double t, double step, double tol) {
  GapReport rep;
  rep.tol = tol;
  StateFunction inner = detail::evolve_final(gen, f, t, step);
  rep.lhs = detail::evolve_final(gen, inner, s, step);
  rep.rhs = detail::evolve_final(gen, f, s + t, step);
  for (std::size_t k = 0; k < rep.lhs.size(); ++k)
    rep.max_abs_gap = std::max(rep.max_abs_gap, std::abs(rep.lhs[k] - rep.rhs[k]));
  rep.pass = rep.max_abs_gap <= tol;
  return rep;
}

struct MonotoneReport {
  StateFunction lower_final, upper_final;
  double max_violation = 0;  // max over states of T_t f - T_t g, clipped at 0
  double slack = 1e-10;
  bool pass = false;
};

inline MonotoneReport check_monotone(const UncertainGenerator& gen, const StateFunction& f,
                                     const StateFunction& g, double t, double step) {
  detail::validate_input_function(gen, f, "lower function");
  detail::validate_input_function(gen, g, "upper function");
  for (std::size_t k = 0; k < f.size(); ++k)
    if (f[k] > g[k])
      throw UsageError("monotonicity check requires f <= g pointwise; violated at state " +
                       std::to_string(k));
  MonotoneReport rep;
  rep.lower_final = detail::evolve_final(gen, f, t, step);
  rep.upper_final = detail::evolve_final(gen, g, t, step);
  for (std::size_t k = 0; k < f.size(); ++k)
    rep.max_violation = std::max(rep.max_violation, rep.lower_final[k] - rep.upper_final[k]);
  rep.max_violation = std::max(rep.max_violation, 0.0);
  rep.pass = rep.max_violation <= rep.slack;
  return rep;
}

struct ConstantsReport {
  double max_abs_gap = 0;
  double tol = 1e-10;
  bool pass = false;
};

inline ConstantsReport check_constants(const UncertainGenerator& gen, double c, double t,
                                       double step) {
  StateFunction f(gen.n_states(), c);
  StateFunction out = detail::evolve_final(gen, f, t, step);
  ConstantsReport rep;
  for (double v : out) rep.max_abs_gap = std::max(rep.max_abs_gap, std::abs(v - c));
  rep.pass = rep.max_abs_gap <= rep.tol;
  return rep;
}

}  // namespace umarkov
