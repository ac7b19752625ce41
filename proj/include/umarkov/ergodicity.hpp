// Stationary analysis of linear chains, the envelope sandwich, and the
// certification recipe for nonlinear spin systems: if both envelope chains
// are attractive and ergodic with the same invariant distribution, that
// distribution is the unique invariant distribution of the sublinear
// semigroup. Total variation here is TV(mu, nu) = 0.5 * sum |mu - nu|.
#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include "umarkov/errors.hpp"
#include "umarkov/models.hpp"
#include "umarkov/semigroup.hpp"
#include "umarkov/statespace.hpp"

namespace umarkov {

struct Distribution {
  std::vector<double> weights;  // nonnegative, sum 1 within 1e-10
};

inline double tv_distance(const Distribution& a, const Distribution& b) {
  if (a.weights.size() != b.weights.size())
    throw ShapeError("distributions live on different state counts");
  double s = 0;
  for (std::size_t k = 0; k < a.weights.size(); ++k) s += std::abs(a.weights[k] - b.weights[k]);
  return 0.5 * s;
}

inline void validate_distribution(const Distribution& mu, std::size_t n_states) {
  if (mu.weights.size() != n_states)
    throw ShapeError("distribution covers " + std::to_string(mu.weights.size()) +
                     " states, expected " + std::to_string(n_states));
  double sum = 0;
  for (double w : mu.weights) {
    if (w < -1e-12) throw ParameterError("distribution has a negative weight");
    sum += w;
  }
  if (std::abs(sum - 1.0) > 1e-10)
    throw ParameterError("distribution weights sum to " + std::to_string(sum));
}

namespace detail {

// Strongly connected components of the off-diagonal support digraph,
// Kosaraju's two passes; components come back sorted by smallest member.
inline std::vector<std::vector<std::size_t>> strongly_connected_components(const QMatrix& q) {
  const std::size_t n = q.n;
  std::vector<std::vector<std::size_t>> fwd(n), rev(n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j)
      if (i != j && q(i, j) > 0) {
        fwd[i].push_back(j);
        rev[j].push_back(i);
      }

  std::vector<std::size_t> order;
  order.reserve(n);
  std::vector<char> seen(n, 0);
  std::vector<std::pair<std::size_t, std::size_t>> stack;  // (node, next child)
  for (std::size_t s = 0; s < n; ++s) {
    if (seen[s]) continue;
    seen[s] = 1;
    stack.emplace_back(s, 0);
    while (!stack.empty()) {
      auto& [u, next] = stack.back();
      if (next < fwd[u].size()) {
        std::size_t v = fwd[u][next++];
        if (!seen[v]) {
          seen[v] = 1;
          stack.emplace_back(v, 0);
        }
      } else {
        order.push_back(u);
        stack.pop_back();
      }
    }
  }

  std::vector<std::vector<std::size_t>> comps;
  std::vector<char> assigned(n, 0);
  for (std::size_t idx = n; idx-- > 0;) {
    std::size_t root = order[idx];
    if (assigned[root]) continue;
    comps.emplace_back();
    std::vector<std::size_t> dfs{root};
    assigned[root] = 1;
    while (!dfs.empty()) {
      std::size_t u = dfs.back();
      dfs.pop_back();
      comps.back().push_back(u);
      for (std::size_t v : rev[u])
        if (!assigned[v]) {
          assigned[v] = 1;
          dfs.push_back(v);
        }
    }
    std::sort(comps.back().begin(), comps.back().end());
  }
  std::sort(comps.begin(), comps.end(),
            [](const auto& a, const auto& b) { return a.front() < b.front(); });
  return comps;
}

// Components with no positive rate leaving the component.
inline std::vector<std::vector<std::size_t>> closed_classes(const QMatrix& q) {
  auto comps = strongly_connected_components(q);
  std::vector<std::size_t> comp_of(q.n);
  for (std::size_t c = 0; c < comps.size(); ++c)
    for (std::size_t k : comps[c]) comp_of[k] = c;
  std::vector<std::vector<std::size_t>> closed;
  for (const auto& comp : comps) {
    bool leaks = false;
    for (std::size_t i : comp) {
      for (std::size_t j = 0; j < q.n; ++j)
        if (i != j && q(i, j) > 0 && comp_of[j] != comp_of[i]) {
          leaks = true;
          break;
        }
      if (leaks) break;
    }
    if (!leaks) closed.push_back(comp);
  }
  return closed;
}

// Dense solve by Gaussian elimination with partial pivoting; a is n x n
// row-major and is destroyed. Throws on a vanishing pivot.
inline std::vector<double> lu_solve(std::vector<double> a, std::vector<double> b, std::size_t n) {
  for (std::size_t col = 0; col < n; ++col) {
    std::size_t piv = col;
    double best = std::abs(a[col * n + col]);
    for (std::size_t r = col + 1; r < n; ++r) {
      double v = std::abs(a[r * n + col]);
      if (v > best) {
        best = v;
        piv = r;
      }
    }
    if (best < 1e-300) throw NumericalError("singular system in stationary solve");
    if (piv != col) {
      for (std::size_t j = 0; j < n; ++j) std::swap(a[col * n + j], a[piv * n + j]);
      std::swap(b[col], b[piv]);
    }
    double d = a[col * n + col];
    for (std::size_t r = col + 1; r < n; ++r) {
      double factor = a[r * n + col] / d;
      if (factor == 0) continue;
      for (std::size_t j = col; j < n; ++j) a[r * n + j] -= factor * a[col * n + j];
      b[r] -= factor * b[col];
    }
  }
  std::vector<double> x(n);
  for (std::size_t i = n; i-- > 0;) {
    double s = b[i];
    for (std::size_t j = i + 1; j < n; ++j) s -= a[i * n + j] * x[j];
    x[i] = s / a[i * n + i];
  }
  return x;
}

// Stationary distribution of one closed irreducible class: solve
// (Q_C^T + 11^T) mu = 1, the rank-one shift of mu^T Q_C = 0 with the
// normalization folded in; nonsingular for irreducible closed classes.
inline Distribution class_stationary(const QMatrix& q, const std::vector<std::size_t>& cls) {
  const std::size_t c = cls.size();
  std::vector<double> a(c * c), rhs(c, 1.0);
  for (std::size_t i = 0; i < c; ++i)
    for (std::size_t j = 0; j < c; ++j) a[i * c + j] = q(cls[j], cls[i]) + 1.0;
  std::vector<double> mu = lu_solve(std::move(a), std::move(rhs), c);

  Distribution out;
  out.weights.assign(q.n, 0.0);
  double sum = 0;
  for (std::size_t j = 0; j < c; ++j) {
    if (mu[j] < -1e-12)
      throw NumericalError("stationary solve produced weight " + std::to_string(mu[j]));
    double w = std::max(mu[j], 0.0);
    out.weights[cls[j]] = w;
    sum += w;
  }
  if (!(sum > 0)) throw NumericalError("stationary solve produced a zero vector");
  for (double& w : out.weights) w /= sum;

  double residual = 0;  // || mu^T Q ||_inf over the full space
  for (std::size_t col = 0; col < q.n; ++col) {
    double s = 0;
    for (std::size_t j = 0; j < c; ++j) s += out.weights[cls[j]] * q(cls[j], col);
    residual = std::max(residual, std::abs(s));
  }
  if (residual > 1e-10)
    throw NumericalError("stationary residual " + std::to_string(residual) + " exceeds 1e-10");
  return out;
}

}  // namespace detail

// One extreme stationary distribution per closed communicating class,
// ordered by the smallest state in the class.
inline std::vector<Distribution> stationary_distributions(const QMatrix& q) {
  if (q.n == 0 || q.a.size() != q.n * q.n) throw ShapeError("malformed generator matrix");
  std::vector<Distribution> out;
  for (const auto& cls : detail::closed_classes(q)) out.push_back(detail::class_stationary(q, cls));
  return out;
}

struct ErgodicLinearResult {
  bool ergodic = false;
  std::optional<Distribution> mu;
};

// A finite CTMC converges from every start iff it has exactly one closed
// communicating class; continuous time rules out periodicity.
inline ErgodicLinearResult is_ergodic_linear(const QMatrix& q) {
  if (q.n == 0 || q.a.size() != q.n * q.n) throw ShapeError("malformed generator matrix");
  auto closed = detail::closed_classes(q);
  ErgodicLinearResult res;
  res.ergodic = closed.size() == 1;
  if (res.ergodic) res.mu = detail::class_stationary(q, closed[0]);
  return res;
}

struct SandwichReport {
  enum class Status { ok, failed_precondition };
  Status status = Status::ok;
  bool upper_attractive = false;
  bool lower_attractive = false;
  StateFunction lower, middle, upper;   // T_lower, T (HJB), T_upper at t
  double max_lower_violation = 0;       // max(lower - middle), clipped at 0
  double max_upper_violation = 0;       // max(middle - upper), clipped at 0
  double tol = 0;
  bool pass = false;
};

// Envelope sandwich T_lower <= T <= T_upper for increasing f. Attractive
// envelopes are a precondition (the comparison argument runs through
// order preservation of the envelope chains), reported rather than thrown.
inline SandwichReport sandwich_check(const SpeedFunction& c, const StateFunction& f, double t,
                                     double step, double tol = 1e-8) {
  c.space().require_function(f, "test function");
  if (!c.space().is_increasing(f))
    throw UsageError("sandwich check requires an increasing test function");
  auto [upper_speed, lower_speed] = envelope_speeds(c);
  SandwichReport rep;
  rep.tol = tol;
  rep.upper_attractive = is_attractive(upper_speed);
  rep.lower_attractive = is_attractive(lower_speed);
  if (!rep.upper_attractive || !rep.lower_attractive) {
    rep.status = SandwichReport::Status::failed_precondition;
    return rep;
  }
  UncertainGenerator gen(c);
  rep.lower = detail::evolve_final(UncertainGenerator(lower_speed), f, t, step);
  rep.middle = detail::evolve_final(gen, f, t, step);
  rep.upper = detail::evolve_final(UncertainGenerator(upper_speed), f, t, step);
  for (std::size_t k = 0; k < f.size(); ++k) {
    rep.max_lower_violation = std::max(rep.max_lower_violation, rep.lower[k] - rep.middle[k]);
    rep.max_upper_violation = std::max(rep.max_upper_violation, rep.middle[k] - rep.upper[k]);
  }
  rep.max_lower_violation = std::max(rep.max_lower_violation, 0.0);
  rep.max_upper_violation = std::max(rep.max_upper_violation, 0.0);
  rep.pass = rep.max_lower_violation <= tol && rep.max_upper_violation <= tol;
  return rep;
}

enum class CertificationStatus { certified_ergodic, not_certified, failed_precondition };

struct ErgodicityVerdict {
  CertificationStatus status = CertificationStatus::not_certified;
  std::optional<Distribution> mu;
  struct Diagnostics {
    bool upper_attractive = false;
    bool lower_attractive = false;
    bool upper_ergodic = false;
    bool lower_ergodic = false;
    bool same_invariant = false;
  } diagnostics;
};

// Sufficient certificate: both envelope chains attractive and ergodic with
// the same invariant distribution (TV <= 1e-8). mu is reported from the
// upper chain; within tolerance the two agree whenever certification
// succeeds. Failing the certificate proves nothing (not necessary).
inline ErgodicityVerdict certify_nonlinear_ergodicity(const SpeedFunction& c) {
  auto [upper_speed, lower_speed] = envelope_speeds(c);
  ErgodicityVerdict verdict;
  auto& d = verdict.diagnostics;
  d.upper_attractive = is_attractive(upper_speed);
  d.lower_attractive = is_attractive(lower_speed);
  ErgodicLinearResult up = is_ergodic_linear(qmatrix_from_speed(upper_speed, 0));
  ErgodicLinearResult lo = is_ergodic_linear(qmatrix_from_speed(lower_speed, 0));
  d.upper_ergodic = up.ergodic;
  d.lower_ergodic = lo.ergodic;
  d.same_invariant = up.ergodic && lo.ergodic && tv_distance(*up.mu, *lo.mu) <= 1e-8;
  if (d.upper_attractive && d.lower_attractive && d.upper_ergodic && d.lower_ergodic &&
      d.same_invariant) {
    verdict.status = CertificationStatus::certified_ergodic;
    verdict.mu = std::move(up.mu);
  }
  return verdict;
}

// max lambda < 1 / max degree. Finite chains are ergodic to the all-zero
// configuration regardless (the absorbing state is reachable from
// everywhere), so this criterion is strictly stronger than needed at
// finite scale; it is the scale-free sufficient condition.
inline bool contact_criterion(const SiteGraph& graph, const ControlGrid& grid) {
  if (graph.n_sites() < 1) throw UsageError("contact criterion needs a non-empty graph");
  double max_lambda = 0;
  for (const auto& p : grid.points()) {
    if (!(p.value > 0))
      throw ParameterError("contact criterion requires lambda > 0, control '" + p.label + "'");
    max_lambda = std::max(max_lambda, p.value);
  }
  int deg = graph.max_degree();
  if (deg == 0) return true;  // no infection channel at all
  return max_lambda < 1.0 / static_cast<double>(deg);
}

struct InvarianceReport {
  double max_gap = 0;
  Configuration worst_upset = 0;
  double tol = 0;
  bool pass = false;
};

// Invariance of mu over the up-set indicator family: for each eta0, f is
// the indicator of {eta : eta >= eta0} and the check compares the mu-mean
// of T_t f against the mu-mean of f. The family is the measure-determining
// increasing test class used throughout; invariance over all increasing
// functions is checked only through it.
inline InvarianceReport invariance_check(const SpeedFunction& c, const Distribution& mu, double t,
                                         double step, double tol = 1e-6) {
  validate_distribution(mu, c.n_states());
  UncertainGenerator gen(c);
  InvarianceReport rep;
  rep.tol = tol;
  const std::uint32_t n = c.n_states();
  for (Configuration eta0 = 0; eta0 < n; ++eta0) {
    StateFunction f(n, 0.0);
    for (Configuration eta = 0; eta < n; ++eta)
      if ((eta & eta0) == eta0) f[eta] = 1.0;
    StateFunction tf = detail::evolve_final(gen, f, t, step);
    double before = 0, after = 0;
    for (Configuration k = 0; k < n; ++k) {
      before += mu.weights[k] * f[k];
      after += mu.weights[k] * tf[k];
    }
    double gap = std::abs(after - before);
    if (gap > rep.max_gap) {
      rep.max_gap = gap;
      rep.worst_upset = eta0;
    }
  }
  rep.pass = rep.max_gap <= tol;
  return rep;
}

struct ProbeRow {
  double t = 0;
  double sup_gap = 0;
};

// Sup-norm distance of T_t f from the certified invariant mean, per
// horizon. Decay is reported, never asserted; the caller judges it.
inline std::vector<ProbeRow> convergence_probe(const SpeedFunction& c, const StateFunction& f,
                                               const std::vector<double>& horizons, double step) {
  c.space().require_function(f, "test function");
  ErgodicityVerdict verdict = certify_nonlinear_ergodicity(c);
  if (verdict.status != CertificationStatus::certified_ergodic)
    throw UsageError("convergence probe requires a certified model");
  double mean = 0;
  for (std::size_t k = 0; k < f.size(); ++k) mean += verdict.mu->weights[k] * f[k];
  UncertainGenerator gen(c);
  std::vector<ProbeRow> rows;
  rows.reserve(horizons.size());
  for (double t : horizons) {
    StateFunction tf = detail::evolve_final(gen, f, t, step);
    double gap = 0;
    for (double v : tf) gap = std::max(gap, std::abs(v - mean));
    rows.push_back({t, gap});
  }
  return rows;
}

}  // namespace umarkov
