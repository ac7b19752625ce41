// Independent ground truth for the semigroup: linear backward evolution
// under a fixed Markov policy, a uniformization matrix exponential, event-
// driven simulation of the selected chain, and brute-force enumeration of
// small policy families.
#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "umarkov/errors.hpp"
#include "umarkov/models.hpp"
#include "umarkov/parallel.hpp"
#include "umarkov/rng.hpp"
#include "umarkov/semigroup.hpp"
#include "umarkov/statespace.hpp"

namespace umarkov {

// Piecewise-constant-in-time state feedback: cells partition [0, horizon],
// choice(cell, state) is a control-grid index.
struct MarkovPolicy {
  std::vector<double> cell_boundaries;    // 0 = t_0 < ... < t_K
  std::vector<std::vector<int>> choice;   // [cell][state]

  std::size_t n_cells() const { return choice.size(); }
  double horizon() const { return cell_boundaries.empty() ? 0.0 : cell_boundaries.back(); }

  // Cell index covering time s; the right boundary belongs to the next cell.
  std::size_t cell_at(double s) const {
    std::size_t j = 0;
    while (j + 1 < n_cells() && s >= cell_boundaries[j + 1]) ++j;
    return j;
  }
};

inline void validate_policy(const UncertainGenerator& gen, const MarkovPolicy& policy) {
  const auto& b = policy.cell_boundaries;
  if (b.empty()) throw UsageError("policy has no cell boundaries");
  if (b.front() != 0.0) throw UsageError("policy must start at time 0");
  for (std::size_t j = 0; j + 1 < b.size(); ++j)
    if (!(b[j] < b[j + 1])) throw UsageError("policy cell boundaries must increase strictly");
  if (policy.choice.size() != b.size() - 1)
    throw UsageError("policy has " + std::to_string(policy.choice.size()) + " choice rows for " +
                     std::to_string(b.size() - 1) + " cells");
  for (const auto& row : policy.choice) {
    if (row.size() != gen.n_states())
      throw UsageError("policy choice row covers " + std::to_string(row.size()) + " states, expected " +
                       std::to_string(gen.n_states()));
    for (int g : row)
      if (g < 0 || static_cast<std::size_t>(g) >= gen.family_size())
        throw UsageError("policy choice " + std::to_string(g) + " outside the control grid");
  }
}

namespace detail {

// Linear backward action for one cell: (Q_pol v)(k) uses row choice[k].
inline void policy_action(const UncertainGenerator& gen, const std::vector<int>& choice,
                          const double* v, double* w) {
  const std::size_t nstates = gen.n_states();
  parallel_for(nstates, 512, [&](std::size_t lo, std::size_t hi) {
    for (std::size_t k = lo; k < hi; ++k)
      w[k] = gen.row_action(static_cast<std::size_t>(choice[k]), static_cast<Configuration>(k), v);
  });
}

inline void policy_rk4_step(const UncertainGenerator& gen, const std::vector<int>& choice,
                            const StateFunction& y, double h, StateFunction& out, Rk4Work& wk) {
  const std::size_t n = y.size();
  policy_action(gen, choice, y.data(), wk.k1.data());
  for (std::size_t i = 0; i < n; ++i) wk.stage[i] = y[i] + 0.5 * h * wk.k1[i];
  policy_action(gen, choice, wk.stage.data(), wk.k2.data());
  for (std::size_t i = 0; i < n; ++i) wk.stage[i] = y[i] + 0.5 * h * wk.k2[i];
  policy_action(gen, choice, wk.stage.data(), wk.k3.data());
  for (std::size_t i = 0; i < n; ++i) wk.stage[i] = y[i] + h * wk.k3[i];
  policy_action(gen, choice, wk.stage.data(), wk.k4.data());
  for (std::size_t i = 0; i < n; ++i)
    out[i] = y[i] + (h / 6.0) * (wk.k1[i] + 2.0 * wk.k2[i] + 2.0 * wk.k3[i] + wk.k4[i]);
}

// Deterministic pairwise summation; the result depends only on the slot
// order, never on how trials were scheduled.
inline double pairwise_sum(const double* x, std::size_t n) {
  if (n <= 16) {
    double s = 0;
    for (std::size_t i = 0; i < n; ++i) s += x[i];
    return s;
  }
  std::size_t half = n / 2;
  return pairwise_sum(x, half) + pairwise_sum(x + half, n - half);
}

}  // namespace detail

// E^{policy}[f(X_horizon) | X_0 = k], by RK4 through the cells from the
// terminal one backwards. Within a cell the generator row for state k is
// the row of Q(choice(cell, k)); the step never exceeds 1e-3.
inline StateFunction exact_expectation(const UncertainGenerator& gen, const MarkovPolicy& policy,
                                       const StateFunction& f, double step = 1e-3) {
  validate_policy(gen, policy);
  detail::validate_input_function(gen, f, "terminal function");
  double h = std::min(step, 1e-3);
  StateFunction w = f;
  StateFunction next(w.size());
  detail::Rk4Work wk(w.size());
  for (std::size_t j = policy.n_cells(); j-- > 0;) {
    double d = policy.cell_boundaries[j + 1] - policy.cell_boundaries[j];
    detail::StepPlan plan = detail::plan_steps(d, h, gen.max_total_rate());
    for (std::size_t i = 0; i < plan.total(); ++i) {
      bool partial = plan.remainder > 0 && i + 1 == plan.total();
      detail::policy_rk4_step(gen, policy.choice[j], w, partial ? plan.remainder : plan.h, next, wk);
      w.swap(next);
    }
  }
  return w;
}

// exp(tQ) f by uniformization: with L >= max |q(k,k)| and P = I + Q/L,
// exp(tQ) f = e^{-Lt} sum_j (Lt)^j / j!  P^j f. The horizon is split into
// chunks with L*chunk <= 25 so the Poisson weights stay well scaled.
inline StateFunction expm_uniformization(const QMatrix& q, double t, const StateFunction& f,
                                         double tol = 1e-13) {
  if (t < 0) throw ParameterError("duration must be nonnegative");
  if (f.size() != q.n)
    throw ShapeError("function length " + std::to_string(f.size()) + " does not match matrix size " +
                     std::to_string(q.n));
  double rate = 0;
  for (std::size_t k = 0; k < q.n; ++k) rate = std::max(rate, -q(k, k));
  if (t == 0 || rate == 0) return f;

  std::size_t chunks = static_cast<std::size_t>(std::ceil(rate * t / 25.0));
  chunks = std::max<std::size_t>(chunks, 1);
  double delta = t / static_cast<double>(chunks);
  double a = rate * delta;

  StateFunction v = f, term(q.n), next(q.n), acc(q.n);
  for (std::size_t c = 0; c < chunks; ++c) {
    double vmax = 0;
    for (double x : v) vmax = std::max(vmax, std::abs(x));
    double tail_budget = tol / (static_cast<double>(chunks) * std::max(1.0, vmax));
    term = v;
    double weight = std::exp(-a), cumulative = weight;
    for (std::size_t k = 0; k < q.n; ++k) acc[k] = weight * term[k];
    std::size_t cap = static_cast<std::size_t>(a + 60.0 * std::sqrt(a + 1.0) + 60.0);
    for (std::size_t j = 1; j <= cap && 1.0 - cumulative > tail_budget; ++j) {
      for (std::size_t i = 0; i < q.n; ++i) {
        double s = term[i];
        const double* row = q.a.data() + i * q.n;
        double dot = 0;
        for (std::size_t jj = 0; jj < q.n; ++jj) dot += row[jj] * term[jj];
        next[i] = s + dot / rate;
      }
      term.swap(next);
      weight *= a / static_cast<double>(j);
      cumulative += weight;
      for (std::size_t i = 0; i < q.n; ++i) acc[i] += weight * term[i];
    }
    v = acc;
  }
  return v;
}

// Cross-check route for exact_expectation. The per-cell generator with
// state-dependent rows is itself a Q-matrix, so uniformization applies to
// any piecewise-constant policy, not only state-independent ones.
inline StateFunction exact_expectation_expm(const UncertainGenerator& gen,
                                            const MarkovPolicy& policy, const StateFunction& f,
                                            double tol = 1e-13) {
  validate_policy(gen, policy);
  detail::validate_input_function(gen, f, "terminal function");
  StateFunction w = f;
  for (std::size_t j = policy.n_cells(); j-- > 0;) {
    QMatrix q(gen.n_states());
    for (Configuration k = 0; k < gen.n_states(); ++k) {
      auto g = static_cast<std::size_t>(policy.choice[j][k]);
      double total = 0;
      for (int x = 0; x < gen.n_sites(); ++x) {
        double r = gen.speed().rate(g, x, k);
        q(k, k ^ (Configuration{1} << x)) = r;
        total += r;
      }
      q(k, k) = -total;
    }
    w = expm_uniformization(q, policy.cell_boundaries[j + 1] - policy.cell_boundaries[j], w, tol);
  }
  return w;
}

struct Trajectory {
  std::vector<double> jump_times;       // strictly increasing, <= terminal_time
  std::vector<Configuration> states;    // states[0] at time 0; one per segment
  double terminal_time = 0;

  Configuration state_at(double s) const {
    std::size_t jumps = 0;
    while (jumps < jump_times.size() && jump_times[jumps] <= s) ++jumps;
    return states[jumps];
  }
};

// Race sampling with exponential holding times. A holding draw that crosses
// the current cell boundary is discarded and re-drawn under the next cell's
// rates (exact by memorylessness). Fully determined by the seed.
inline Trajectory simulate(const UncertainGenerator& gen, const MarkovPolicy& policy,
                           Configuration eta0, std::uint64_t seed) {
  validate_policy(gen, policy);
  gen.space().require_configuration(eta0);
  Rng rng(seed);
  Trajectory traj;
  traj.terminal_time = policy.horizon();
  traj.states.push_back(eta0);

  Configuration state = eta0;
  double now = 0;
  const int n = gen.n_sites();
  for (std::size_t j = 0; j < policy.n_cells(); ++j) {
    double cell_end = policy.cell_boundaries[j + 1];
    while (true) {
      auto g = static_cast<std::size_t>(policy.choice[j][state]);
      double total = gen.speed().total_rate(g, state);
      if (total <= 0) break;  // absorbing under this cell's control
      double hold = -std::log(rng.next_unit_pos()) / total;
      if (now + hold >= cell_end) break;  // crossed; re-draw next cell
      now += hold;
      double u = rng.next_unit() * total;
      double cum = 0;
      int site = -1, last_positive = -1;
      for (int x = 0; x < n; ++x) {
        double r = gen.speed().rate(g, x, state);
        if (r > 0) last_positive = x;
        cum += r;
        if (u < cum) {
          site = x;
          break;
        }
      }
      if (site < 0) site = last_positive;  // u rounded past the last bucket
      state ^= Configuration{1} << site;
      traj.jump_times.push_back(now);
      traj.states.push_back(state);
    }
    now = cell_end;
  }
  return traj;
}

struct EstimateReport {
  double mean = 0;
  double standard_error = 0;
  std::size_t n_samples = 0;
};

// Monte Carlo estimate of E^{policy}[f(X_t) | X_0 = eta0]. Trial i runs on
// the stream seed splitmix64(seed ^ splitmix64(i)); trials fill disjoint
// slots and the reduction is pairwise, so the result is bit-identical for
// any thread count.
inline EstimateReport estimate_expectation(const UncertainGenerator& gen,
                                           const MarkovPolicy& policy, const StateFunction& f,
                                           Configuration eta0, double t, std::size_t n_samples,
                                           std::uint64_t seed) {
  validate_policy(gen, policy);
  detail::validate_input_function(gen, f, "terminal function");
  gen.space().require_configuration(eta0);
  if (n_samples < 2) throw UsageError("need at least 2 samples");
  if (t < 0 || t > policy.horizon() * (1 + 1e-12))
    throw UsageError("evaluation time " + std::to_string(t) + " outside the policy horizon");

  std::vector<double> values(n_samples);
  parallel_for(n_samples, 2048, [&](std::size_t lo, std::size_t hi) {
    for (std::size_t i = lo; i < hi; ++i) {
      Trajectory traj = simulate(gen, policy, eta0, stream_seed(seed, i));
      values[i] = f[traj.state_at(t)];
    }
  });

  EstimateReport rep;
  rep.n_samples = n_samples;
  rep.mean = detail::pairwise_sum(values.data(), n_samples) / static_cast<double>(n_samples);
  for (double& v : values) {
    double d = v - rep.mean;
    v = d * d;
  }
  double ss = detail::pairwise_sum(values.data(), n_samples);
  rep.standard_error =
      std::sqrt(ss / (static_cast<double>(n_samples) * static_cast<double>(n_samples - 1)));
  return rep;
}

struct BruteForceResult {
  StateFunction best_value;                    // per-state max over the family
  MarkovPolicy best_policy;                    // first maximizer of the summed value
  std::vector<std::uint64_t> attaining_policy; // per state: first id attaining the max
  std::uint64_t n_policies = 0;
};

namespace detail {

inline MarkovPolicy decode_policy(std::uint64_t id, std::size_t m, std::size_t k_cells,
                                  const std::vector<Configuration>& free_states,
                                  std::uint32_t n_states, double t) {
  MarkovPolicy p;
  p.cell_boundaries.resize(k_cells + 1);
  for (std::size_t j = 0; j <= k_cells; ++j)
    p.cell_boundaries[j] = t * static_cast<double>(j) / static_cast<double>(k_cells);
  p.cell_boundaries.back() = t;
  p.choice.assign(k_cells, std::vector<int>(n_states, 0));
  // Digits in base m, cell-major then free-state order.
  for (std::size_t c = 0; c < k_cells; ++c)
    for (std::size_t s = 0; s < free_states.size(); ++s) {
      p.choice[c][free_states[s]] = static_cast<int>(id % m);
      id /= m;
    }
  return p;
}

}  // namespace detail

// Exhaustive supremum over piecewise-constant policies on K equal cells.
// Choices vary only at restrict_states (all states when absent); everywhere
// else the policy uses control 0. Enumeration order is the base-m digit
// order of detail::decode_policy, ties resolve to the smallest id.
inline BruteForceResult brute_force_sup(const UncertainGenerator& gen, const StateFunction& f,
                                        double t, std::size_t k_cells,
                                        std::optional<std::vector<Configuration>> restrict_states =
                                            std::nullopt,
                                        double step = 1e-3) {
  detail::validate_input_function(gen, f, "terminal function");
  if (k_cells < 1) throw UsageError("need at least one policy cell");
  if (!(t > 0)) throw ParameterError("horizon must be positive");

  std::vector<Configuration> free_states;
  if (restrict_states.has_value()) {
    free_states = *restrict_states;
    for (Configuration k : free_states) gen.space().require_configuration(k);
  } else {
    free_states = gen.space().enumerate();
  }

  const std::size_t m = gen.family_size();
  const double budget = 1e6;
  double count = std::pow(static_cast<double>(m),
                          static_cast<double>(k_cells * free_states.size()));
  if (count > budget)
    throw SizeError("policy family of size " + std::to_string(count) +
                    " exceeds the enumeration budget of 1e6");
  const std::uint64_t n_policies = static_cast<std::uint64_t>(count + 0.5);

  const std::uint32_t nstates = gen.n_states();
  struct Partial {
    StateFunction best;
    std::vector<std::uint64_t> attaining;
    double best_total = 0;
    std::uint64_t best_total_id = 0;
    bool any = false;
  };
  unsigned budget_threads = thread_budget();
  std::size_t chunks = std::min<std::size_t>(std::max<unsigned>(budget_threads, 1),
                                             static_cast<std::size_t>(n_policies));
  std::vector<Partial> partials(chunks);

  // Chunked scan; each chunk keeps ascending-id strict-improvement maxima,
  // so the sequential merge below reproduces the full ascending scan no
  // matter how many threads ran.
  std::vector<std::thread> pool;
  std::uint64_t base = n_policies / chunks, rem = n_policies % chunks, begin = 0;
  auto work = [&](std::size_t ci, std::uint64_t lo, std::uint64_t hi) {
    Partial& part = partials[ci];
    part.best.assign(nstates, 0);
    part.attaining.assign(nstates, 0);
    for (std::uint64_t id = lo; id < hi; ++id) {
      MarkovPolicy pol = detail::decode_policy(id, m, k_cells, free_states, nstates, t);
      StateFunction val = exact_expectation(gen, pol, f, step);
      double total = detail::pairwise_sum(val.data(), val.size());
      if (!part.any) {
        part.best = val;
        std::fill(part.attaining.begin(), part.attaining.end(), id);
        part.best_total = total;
        part.best_total_id = id;
        part.any = true;
        continue;
      }
      for (std::uint32_t k = 0; k < nstates; ++k)
        if (val[k] > part.best[k]) {
          part.best[k] = val[k];
          part.attaining[k] = id;
        }
      if (total > part.best_total) {
        part.best_total = total;
        part.best_total_id = id;
      }
    }
  };
  for (std::size_t c = 0; c < chunks; ++c) {
    std::uint64_t len = base + (c < rem ? 1 : 0);
    std::uint64_t end = begin + len;
    if (c + 1 == chunks)
      work(c, begin, end);
    else
      pool.emplace_back(work, c, begin, end);
    begin = end;
  }
  for (auto& th : pool) th.join();

  BruteForceResult res;
  res.n_policies = n_policies;
  bool any = false;
  double best_total = 0;
  std::uint64_t best_total_id = 0;
  for (const Partial& part : partials) {
    if (!part.any) continue;
    if (!any) {
      res.best_value = part.best;
      res.attaining_policy = part.attaining;
      best_total = part.best_total;
      best_total_id = part.best_total_id;
      any = true;
      continue;
    }
    for (std::uint32_t k = 0; k < nstates; ++k)
      if (part.best[k] > res.best_value[k]) {
        res.best_value[k] = part.best[k];
        res.attaining_policy[k] = part.attaining[k];
      }
    if (part.best_total > best_total) {
      best_total = part.best_total;
      best_total_id = part.best_total_id;
    }
  }
  res.best_policy = detail::decode_policy(best_total_id, m, k_cells, free_states, nstates, t);
  return res;
}

}  // namespace umarkov
