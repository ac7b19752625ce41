// Greedy Markov selection from a semigroup run, and its verification: the
// selected linear chain should reproduce the sublinear value. The selected
// policy depends on the input pair (f, t); there is no single chain that
// works for every terminal function.
#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <vector>

#include "umarkov/errors.hpp"
#include "umarkov/models.hpp"
#include "umarkov/oracle.hpp"
#include "umarkov/semigroup.hpp"
#include "umarkov/statespace.hpp"

namespace umarkov {

// Time-reversal bookkeeping: the backward iterate at backward time s_j is
// the value field governing forward time t - s_j, so the argmax recorded at
// backward grid index j rules the forward cell [t - s_{j+1}, t - s_j].
// Forward cell c therefore takes argmax_field[K - 1 - c].
inline MarkovPolicy extract_policy(const SemigroupRun& run) {
  if (run.time_grid.empty() || run.iterates.empty() || run.argmax_field.empty())
    throw UsageError("cannot extract a policy from an empty run");
  const std::size_t k_cells = run.time_grid.size() - 1;
  const double t = run.time_grid.back();
  MarkovPolicy policy;
  policy.cell_boundaries.resize(k_cells + 1);
  policy.cell_boundaries[0] = 0.0;
  for (std::size_t c = 1; c < k_cells; ++c)
    policy.cell_boundaries[c] = t - run.time_grid[k_cells - c];
  policy.cell_boundaries[k_cells] = t;
  policy.choice.reserve(k_cells);
  for (std::size_t c = 0; c < k_cells; ++c)
    policy.choice.push_back(run.argmax_field[k_cells - 1 - c]);
  return policy;
}

struct SelectionReport {
  StateFunction hjb;        // semigroup value T_t f
  StateFunction selected;   // value of the extracted linear chain
  MarkovPolicy policy;
  double max_gap = 0;
  double tol = 0;
  bool pass = false;
};

// Argmax switches between grid times cost O(step) in the selected value,
// hence the default pairing tol=1e-4 with step=1e-3.
inline SelectionReport verify_selection(const UncertainGenerator& gen, const StateFunction& f,
                                        double t, double step, double tol = 1e-4) {
  SemigroupRun run = evolve(gen, f, t, step);
  SelectionReport rep;
  rep.tol = tol;
  rep.hjb = run.final();
  rep.policy = extract_policy(run);
  rep.selected = rep.policy.n_cells() == 0
                     ? f
                     : exact_expectation(gen, rep.policy, f, std::min(step, 1e-3));
  for (std::size_t k = 0; k < rep.hjb.size(); ++k)
    rep.max_gap = std::max(rep.max_gap, std::abs(rep.hjb[k] - rep.selected[k]));
  rep.pass = rep.max_gap <= tol;
  return rep;
}

}  // namespace umarkov
