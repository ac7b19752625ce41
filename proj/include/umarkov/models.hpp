// Controlled spin-flip models: speed functions (contact, Ising, tabular),
// per-control Q-matrices, the uncertain generator family, envelope speeds,
// and the attractiveness test.
#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <string>
#include <utility>
#include <vector>

#include "umarkov/errors.hpp"
#include "umarkov/statespace.hpp"

namespace umarkov {

class SiteGraph {
 public:
  SiteGraph(int n_sites, std::vector<std::pair<int, int>> edges)
      : space_(n_sites), nbrs_(static_cast<std::size_t>(n_sites)) {
    for (auto& [i, j] : edges) {
      if (i < 0 || i >= n_sites || j < 0 || j >= n_sites)
        throw SiteError("edge (" + std::to_string(i) + "," + std::to_string(j) +
                        ") outside [0, " + std::to_string(n_sites) + ")");
      if (i == j) throw ParameterError("self loop at site " + std::to_string(i));
      if (i > j) std::swap(i, j);
    }
    std::sort(edges.begin(), edges.end());
    if (std::adjacent_find(edges.begin(), edges.end()) != edges.end())
      throw ParameterError("duplicate edge");
    edges_ = std::move(edges);
    for (auto [i, j] : edges_) {
      nbrs_[static_cast<std::size_t>(i)].push_back(j);
      nbrs_[static_cast<std::size_t>(j)].push_back(i);
    }
  }

  int n_sites() const { return space_.n_sites(); }
  const StateSpace& space() const { return space_; }
  const std::vector<std::pair<int, int>>& edges() const { return edges_; }
  const std::vector<int>& neighbors(int x) const {
    if (x < 0 || x >= n_sites()) throw SiteError("site " + std::to_string(x) + " out of range");
    return nbrs_[static_cast<std::size_t>(x)];
  }
  int degree(int x) const { return static_cast<int>(neighbors(x).size()); }
  int max_degree() const {
    int d = 0;
    for (int x = 0; x < n_sites(); ++x) d = std::max(d, degree(x));
    return d;
  }

 private:
  StateSpace space_;
  std::vector<std::pair<int, int>> edges_;
  std::vector<std::vector<int>> nbrs_;
};

struct ControlPoint {
  std::string label;
  // Attached parameter (lambda for contact, beta for Ising); NaN when the
  // model is tabular or the point is a constructed envelope.
  double value = std::numeric_limits<double>::quiet_NaN();
};

class ControlGrid {
 public:
  explicit ControlGrid(std::vector<ControlPoint> points) : points_(std::move(points)) {
    if (points_.empty()) throw SizeError("control grid must be non-empty");
    for (std::size_t i = 0; i < points_.size(); ++i) {
      if (points_[i].label.empty()) throw ParameterError("control label must be non-empty");
      for (std::size_t j = i + 1; j < points_.size(); ++j)
        if (points_[i].label == points_[j].label)
          throw ParameterError("duplicate control label '" + points_[i].label + "'");
    }
  }

  static ControlGrid from_values(const std::vector<double>& values, const std::string& prefix) {
    std::vector<ControlPoint> pts;
    pts.reserve(values.size());
    for (std::size_t i = 0; i < values.size(); ++i)
      pts.push_back({prefix + std::to_string(i), values[i]});
    return ControlGrid(std::move(pts));
  }

  std::size_t size() const { return points_.size(); }
  const ControlPoint& point(std::size_t g) const {
    if (g >= points_.size())
      throw ParameterError("control index " + std::to_string(g) + " out of range");
    return points_[g];
  }
  const std::vector<ControlPoint>& points() const { return points_; }

  std::size_t index_of(const std::string& label) const {
    for (std::size_t g = 0; g < points_.size(); ++g)
      if (points_[g].label == label) return g;
    throw ParameterError("unknown control label '" + label + "'");
  }

 private:
  std::vector<ControlPoint> points_;
};

// Dense flip-rate table c(g, x, eta) >= 0. Construction happens through the
// model builders below; afterwards the object is immutable.
class SpeedFunction {
 public:
  SpeedFunction(StateSpace space, ControlGrid grid, std::vector<double> rates)
      : space_(space), grid_(std::move(grid)), rates_(std::move(rates)) {
    std::size_t want = grid_.size() * static_cast<std::size_t>(space_.n_sites()) * space_.size();
    if (rates_.size() != want)
      throw ShapeError("rate table has " + std::to_string(rates_.size()) + " entries, expected " +
                       std::to_string(want));
    for (double r : rates_) {
      if (!std::isfinite(r)) throw ParameterError("rate table contains a non-finite entry");
      if (r < 0) throw ParameterError("rate table contains a negative entry");
    }
    max_total_rate_ = 0;
    for (std::size_t g = 0; g < grid_.size(); ++g)
      for (Configuration eta = 0; eta < space_.size(); ++eta)
        max_total_rate_ = std::max(max_total_rate_, total_rate(g, eta));
  }

  const StateSpace& space() const { return space_; }
  int n_sites() const { return space_.n_sites(); }
  std::uint32_t n_states() const { return space_.size(); }
  const ControlGrid& grid() const { return grid_; }

  double rate(std::size_t g, int x, Configuration eta) const {
    return rates_[((g * static_cast<std::size_t>(space_.n_sites()) +
                    static_cast<std::size_t>(x))
                   << space_.n_sites()) +
                  eta];
  }

  double rate_checked(std::size_t g, int x, Configuration eta) const {
    if (g >= grid_.size())
      throw ParameterError("control index " + std::to_string(g) + " out of range");
    if (x < 0 || x >= space_.n_sites())
      throw SiteError("site " + std::to_string(x) + " out of range");
    space_.require_configuration(eta);
    return rate(g, x, eta);
  }

  // Total flip rate out of eta under control g; -q(eta, eta).
  double total_rate(std::size_t g, Configuration eta) const {
    double s = 0;
    for (int x = 0; x < space_.n_sites(); ++x) s += rate(g, x, eta);
    return s;
  }

  double max_total_rate() const { return max_total_rate_; }

 private:
  StateSpace space_;
  ControlGrid grid_;
  std::vector<double> rates_;  // layout [g][x][eta]
  double max_total_rate_ = 0;
};

// Dense N x N generator matrix, row-major.
struct QMatrix {
  std::size_t n = 0;
  std::vector<double> a;

  QMatrix() = default;
  explicit QMatrix(std::size_t n_) : n(n_), a(n_ * n_, 0.0) {}

  double& operator()(std::size_t i, std::size_t j) { return a[i * n + j]; }
  double operator()(std::size_t i, std::size_t j) const { return a[i * n + j]; }
};

inline double max_abs_row_sum(const QMatrix& q) {
  double worst = 0;
  for (std::size_t i = 0; i < q.n; ++i) {
    double s = 0;
    for (std::size_t j = 0; j < q.n; ++j) s += q(i, j);
    worst = std::max(worst, std::abs(s));
  }
  return worst;
}

inline double min_offdiagonal(const QMatrix& q) {
  double m = 0;
  bool first = true;
  for (std::size_t i = 0; i < q.n; ++i)
    for (std::size_t j = 0; j < q.n; ++j) {
      if (i == j) continue;
      if (first || q(i, j) < m) m = q(i, j), first = false;
    }
  return m;
}

// True iff q(k, n) = 0 whenever n differs from k in zero or >= 2 bits.
inline bool has_single_flip_sparsity(const QMatrix& q, int n_sites) {
  if (q.n != (std::size_t{1} << n_sites)) return false;
  for (std::size_t i = 0; i < q.n; ++i)
    for (std::size_t j = 0; j < q.n; ++j) {
      if (i == j) continue;
      std::uint32_t diff = static_cast<std::uint32_t>(i) ^ static_cast<std::uint32_t>(j);
      if ((diff & (diff - 1)) != 0 && q(i, j) != 0.0) return false;
    }
  return true;
}

inline SpeedFunction contact_speed(const SiteGraph& graph, const ControlGrid& grid) {
  for (const auto& p : grid.points())
    if (!(p.value > 0))
      throw ParameterError("contact model requires lambda > 0, control '" + p.label + "' has " +
                           std::to_string(p.value));
  const StateSpace& sp = graph.space();
  std::vector<double> rates(grid.size() * static_cast<std::size_t>(sp.n_sites()) * sp.size());
  std::size_t idx = 0;
  for (std::size_t g = 0; g < grid.size(); ++g) {
    double lambda = grid.point(g).value;
    for (int x = 0; x < sp.n_sites(); ++x)
      for (Configuration eta = 0; eta < sp.size(); ++eta) {
        if (site_on(eta, x)) {
          rates[idx++] = 1.0;  // recovery, control-free
        } else {
          int infected = 0;
          for (int y : graph.neighbors(x)) infected += site_on(eta, y) ? 1 : 0;
          rates[idx++] = lambda * infected;
        }
      }
  }
  return SpeedFunction(sp, grid, std::move(rates));
}

inline SpeedFunction ising_speed(const SiteGraph& graph, const ControlGrid& grid) {
  for (const auto& p : grid.points())
    if (!(p.value > 0))
      throw ParameterError("ising model requires beta > 0, control '" + p.label + "' has " +
                           std::to_string(p.value));
  const StateSpace& sp = graph.space();
  std::vector<double> rates(grid.size() * static_cast<std::size_t>(sp.n_sites()) * sp.size());
  std::size_t idx = 0;
  for (std::size_t g = 0; g < grid.size(); ++g) {
    double beta = grid.point(g).value;
    for (int x = 0; x < sp.n_sites(); ++x)
      for (Configuration eta = 0; eta < sp.size(); ++eta) {
        int sx = site_on(eta, x) ? 1 : -1;
        int align = 0;  // sum over neighbors of s(x)*s(y), each term +-1
        for (int y : graph.neighbors(x)) align += sx * (site_on(eta, y) ? 1 : -1);
        rates[idx++] = std::exp(-beta * align);
      }
  }
  return SpeedFunction(sp, grid, std::move(rates));
}

// table[g][x][state_index]; the site count is inferred from the nesting.
inline SpeedFunction tabular_speed(const ControlGrid& grid,
                                   const std::vector<std::vector<std::vector<double>>>& table) {
  if (table.size() != grid.size())
    throw ShapeError("rate table has " + std::to_string(table.size()) +
                     " control slices, grid has " + std::to_string(grid.size()));
  if (table.empty() || table[0].empty()) throw ShapeError("rate table has no site slice");
  int n_sites = static_cast<int>(table[0].size());
  StateSpace sp(n_sites);
  std::vector<double> rates;
  rates.reserve(grid.size() * static_cast<std::size_t>(n_sites) * sp.size());
  for (std::size_t g = 0; g < table.size(); ++g) {
    if (static_cast<int>(table[g].size()) != n_sites)
      throw ShapeError("control slice " + std::to_string(g) + " has " +
                       std::to_string(table[g].size()) + " site rows, expected " +
                       std::to_string(n_sites));
    for (int x = 0; x < n_sites; ++x) {
      const auto& row = table[g][static_cast<std::size_t>(x)];
      if (row.size() != sp.size())
        throw ShapeError("rate row (g=" + std::to_string(g) + ", x=" + std::to_string(x) +
                         ") has " + std::to_string(row.size()) + " states, expected " +
                         std::to_string(sp.size()));
      rates.insert(rates.end(), row.begin(), row.end());
    }
  }
  return SpeedFunction(sp, grid, std::move(rates));  // nonnegativity checked there
}

inline QMatrix qmatrix_from_speed(const SpeedFunction& c, std::size_t g) {
  if (g >= c.grid().size())
    throw ParameterError("control index " + std::to_string(g) + " out of range");
  const StateSpace& sp = c.space();
  QMatrix q(sp.size());
  for (Configuration eta = 0; eta < sp.size(); ++eta) {
    double total = 0;
    for (int x = 0; x < sp.n_sites(); ++x) {
      double r = c.rate(g, x, eta);
      q(eta, eta ^ (Configuration{1} << x)) = r;
      total += r;
    }
    q(eta, eta) = -total;
  }
  return q;
}

// Family {Q(g)} acting through the shared rate table; members are
// materialized on demand, the sparse row action is the hot path.
class UncertainGenerator {
 public:
  explicit UncertainGenerator(SpeedFunction speed) : speed_(std::move(speed)) {}

  const SpeedFunction& speed() const { return speed_; }
  const StateSpace& space() const { return speed_.space(); }
  std::size_t family_size() const { return speed_.grid().size(); }
  std::uint32_t n_states() const { return speed_.n_states(); }
  int n_sites() const { return speed_.n_sites(); }
  double max_total_rate() const { return speed_.max_total_rate(); }

  QMatrix qmatrix(std::size_t g) const { return qmatrix_from_speed(speed_, g); }

  // (Q(g) v)(eta) = sum_x c(g,x,eta) [v(eta_x) - v(eta)].
  double row_action(std::size_t g, Configuration eta, const double* v) const {
    double acc = 0;
    double veta = v[eta];
    for (int x = 0; x < speed_.n_sites(); ++x)
      acc += speed_.rate(g, x, eta) * (v[eta ^ (Configuration{1} << x)] - veta);
    return acc;
  }

  void require_function(const StateFunction& v, const char* what) const {
    speed_.space().require_function(v, what);
  }

 private:
  SpeedFunction speed_;
};

inline UncertainGenerator build_uncertain_generator(SpeedFunction c) {
  return UncertainGenerator(std::move(c));
}

// Envelopes over the control grid: the upper speed takes the sup of the
// flip-up rates (eta(x)=0) and the inf of the flip-down rates (eta(x)=1);
// the lower speed swaps the two. Both come back on a singleton grid.
inline std::pair<SpeedFunction, SpeedFunction> envelope_speeds(const SpeedFunction& c) {
  const StateSpace& sp = c.space();
  std::size_t per_grid = static_cast<std::size_t>(sp.n_sites()) * sp.size();
  std::vector<double> up(per_grid), lo(per_grid);
  std::size_t idx = 0;
  for (int x = 0; x < sp.n_sites(); ++x)
    for (Configuration eta = 0; eta < sp.size(); ++eta, ++idx) {
      double mn = c.rate(0, x, eta), mx = mn;
      for (std::size_t g = 1; g < c.grid().size(); ++g) {
        double r = c.rate(g, x, eta);
        mn = std::min(mn, r);
        mx = std::max(mx, r);
      }
      if (site_on(eta, x)) {
        up[idx] = mn;
        lo[idx] = mx;
      } else {
        up[idx] = mx;
        lo[idx] = mn;
      }
    }
  ControlGrid upper_grid({{"upper", std::numeric_limits<double>::quiet_NaN()}});
  ControlGrid lower_grid({{"lower", std::numeric_limits<double>::quiet_NaN()}});
  return {SpeedFunction(sp, upper_grid, std::move(up)),
          SpeedFunction(sp, lower_grid, std::move(lo))};
}

// Attractiveness of a linear spin system, standard orientation: along
// xi <= eta, flip-up rates (at shared 0-sites) never decrease and flip-down
// rates (at shared 1-sites) never increase. Some sources display these
// inequalities the other way around; under that reading the contact process
// would not be attractive, so only the standard orientation is supported.
// Scans covering pairs (eta, eta + one bit); transitivity closes the order.
inline bool is_attractive(const SpeedFunction& c) {
  if (c.grid().size() != 1)
    throw UsageError("is_attractive requires a singleton control grid, got " +
                     std::to_string(c.grid().size()) + " points");
  const StateSpace& sp = c.space();
  for (int x = 0; x < sp.n_sites(); ++x)
    for (Configuration eta = 0; eta < sp.size(); ++eta) {
      for (int y = 0; y < sp.n_sites(); ++y) {
        if (y == x || site_on(eta, y)) continue;
        Configuration up = eta | (Configuration{1} << y);
        if (!site_on(eta, x)) {
          if (c.rate(0, x, eta) > c.rate(0, x, up)) return false;
        } else {
          if (c.rate(0, x, eta) < c.rate(0, x, up)) return false;
        }
      }
    }
  return true;
}

// Exhaustive cross-check over all ordered pairs; small spaces only.
inline bool is_attractive_exhaustive(const SpeedFunction& c) {
  if (c.grid().size() != 1)
    throw UsageError("is_attractive_exhaustive requires a singleton control grid");
  if (c.n_sites() > 5)
    throw SizeError("exhaustive attractiveness scan capped at 5 sites, got " +
                    std::to_string(c.n_sites()));
  const StateSpace& sp = c.space();
  for (Configuration xi = 0; xi < sp.size(); ++xi)
    for (Configuration eta = 0; eta < sp.size(); ++eta) {
      if ((xi & ~eta) != 0) continue;  // not xi <= eta
      for (int x = 0; x < sp.n_sites(); ++x) {
        bool bx = site_on(xi, x), by = site_on(eta, x);
        if (bx != by) continue;
        if (!bx && c.rate(0, x, xi) > c.rate(0, x, eta)) return false;
        if (bx && c.rate(0, x, xi) < c.rate(0, x, eta)) return false;
      }
    }
  return true;
}

}  // namespace umarkov
