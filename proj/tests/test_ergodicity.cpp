#include <cmath>
#include <random>

#include <catch2/catch_amalgamated.hpp>

#include "test_util.hpp"

using namespace umarkov;
using namespace testutil;

namespace {

double stationarity_residual(const Distribution& mu, const QMatrix& q) {
  double worst = 0;
  for (std::size_t j = 0; j < q.n; ++j) {
    double s = 0;
    for (std::size_t i = 0; i < q.n; ++i) s += mu.weights[i] * q(i, j);
    worst = std::max(worst, std::abs(s));
  }
  return worst;
}

Distribution point_mass(std::size_t n, std::size_t at) {
  Distribution mu;
  mu.weights.assign(n, 0.0);
  mu.weights[at] = 1.0;
  return mu;
}

// 2-site model whose flip-up rate drops when the neighbor turns on; its own
// envelope, and not attractive.
SpeedFunction contrarian2() {
  auto rate = [](int x, Configuration eta) {
    if (site_on(eta, x)) return 1.0;
    return site_on(eta, 1 - x) ? 0.1 : 1.0;
  };
  std::vector<std::vector<double>> rows(2, std::vector<double>(4));
  for (int x = 0; x < 2; ++x)
    for (Configuration eta = 0; eta < 4; ++eta) rows[static_cast<std::size_t>(x)][eta] = rate(x, eta);
  return tabular_speed(ControlGrid({{"only", 0.0}}), {rows});
}

}  // namespace

TEST_CASE("total variation distance", "[ergodicity]") {
  Distribution a = point_mass(2, 0);
  Distribution b{{0.5, 0.5}};
  REQUIRE(tv_distance(a, b) == Catch::Approx(0.5).margin(1e-15));
  REQUIRE(tv_distance(b, a) == Catch::Approx(0.5).margin(1e-15));
  REQUIRE(tv_distance(a, a) == 0.0);
  REQUIRE(tv_distance(a, point_mass(2, 1)) == Catch::Approx(1.0).margin(1e-15));
}

TEST_CASE("distribution validation", "[ergodicity]") {
  REQUIRE_NOTHROW(validate_distribution(Distribution{{0.5, 0.5}}, 2));
  REQUIRE_THROWS_AS(validate_distribution(Distribution{{0.5, 0.5}}, 4), ShapeError);
  REQUIRE_THROWS_AS(validate_distribution(Distribution{{1.5, -0.5}}, 2), ParameterError);
  REQUIRE_THROWS_AS(validate_distribution(Distribution{{0.4, 0.4}}, 2), ParameterError);
}

TEST_CASE("closed classes by hand", "[ergodicity]") {
  // 0 -> 1 absorbing: the only closed class is {1}.
  QMatrix q(2);
  q(0, 0) = -1.0;
  q(0, 1) = 1.0;
  auto dists = stationary_distributions(q);
  REQUIRE(dists.size() == 1);
  REQUIRE(dists[0].weights == std::vector<double>{0.0, 1.0});

  // A 3-cycle is one closed class with the uniform distribution.
  QMatrix cyc(3);
  for (std::size_t i = 0; i < 3; ++i) {
    cyc(i, (i + 1) % 3) = 1.0;
    cyc(i, i) = -1.0;
  }
  auto cdists = stationary_distributions(cyc);
  REQUIRE(cdists.size() == 1);
  for (double w : cdists[0].weights) REQUIRE(w == Catch::Approx(1.0 / 3).margin(1e-12));

  // Zero generator: every state is its own closed class.
  QMatrix still(4);
  auto sdists = stationary_distributions(still);
  REQUIRE(sdists.size() == 4);
  for (std::size_t k = 0; k < 4; ++k) REQUIRE(sdists[k].weights[k] == 1.0);
}

TEST_CASE("two-state stationary distribution", "[ergodicity]") {
  UncertainGenerator two(two_state_speed(1.0, 2.0));
  QMatrix q = two.qmatrix(0);
  auto dists = stationary_distributions(q);
  REQUIRE(dists.size() == 1);
  REQUIRE(dists[0].weights[0] == Catch::Approx(2.0 / 3).margin(1e-12));
  REQUIRE(dists[0].weights[1] == Catch::Approx(1.0 / 3).margin(1e-12));
  REQUIRE(stationarity_residual(dists[0], q) <= 1e-9);

  ErgodicLinearResult lin = is_ergodic_linear(q);
  REQUIRE(lin.ergodic);
  REQUIRE(lin.mu->weights[0] == Catch::Approx(2.0 / 3).margin(1e-12));
}

TEST_CASE("stationary solutions satisfy the defining system", "[ergodicity]") {
  std::mt19937_64 rng(31);
  std::uniform_real_distribution<double> dist(0.0, 2.0);
  for (int trial = 0; trial < 10; ++trial) {
    std::vector<std::vector<double>> rows(3, std::vector<double>(8));
    for (auto& row : rows)
      for (double& r : row) r = dist(rng);
    SpeedFunction c = tabular_speed(ControlGrid({{"only", 0.0}}), {rows});
    QMatrix q = qmatrix_from_speed(c, 0);
    for (const Distribution& mu : stationary_distributions(q)) {
      REQUIRE(stationarity_residual(mu, q) <= 1e-9);
      double total = 0;
      for (double w : mu.weights) {
        REQUIRE(w >= -1e-12);
        total += w;
      }
      REQUIRE(std::abs(total - 1.0) <= 1e-10);
    }
  }
}

TEST_CASE("contact chains are ergodic to the healthy state", "[ergodicity]") {
  auto [up, lo] = envelope_speeds(contact3());
  for (const SpeedFunction* env : {&up, &lo}) {
    ErgodicLinearResult lin = is_ergodic_linear(qmatrix_from_speed(*env, 0));
    REQUIRE(lin.ergodic);
    REQUIRE(tv_distance(*lin.mu, point_mass(8, 0)) <= 1e-10);
  }
  REQUIRE_FALSE(is_ergodic_linear(QMatrix(3)).ergodic);
}

TEST_CASE("sandwich inequality", "[ergodicity]") {
  SpeedFunction c = contact3();
  StateFunction f = sum_function(3);
  for (double t : {0.5, 1.0}) {
    SandwichReport rep = sandwich_check(c, f, t, 1e-3);
    REQUIRE(rep.status == SandwichReport::Status::ok);
    REQUIRE(rep.upper_attractive);
    REQUIRE(rep.lower_attractive);
    REQUIRE(rep.pass);
    REQUIRE(rep.max_lower_violation <= 1e-8);
    REQUIRE(rep.max_upper_violation <= 1e-8);
  }

  // Up-set indicators are the increasing test family.
  for (Configuration eta0 = 0; eta0 < 8; ++eta0) {
    SandwichReport rep = sandwich_check(c, upset_indicator(3, eta0), 1.0, 1e-3);
    REQUIRE(rep.pass);
  }

  // Constants: all three sides equal the constant.
  SandwichReport flat = sandwich_check(c, StateFunction(8, 3.0), 1.0, 1e-3);
  REQUIRE(flat.pass);
  for (Configuration k = 0; k < 8; ++k) {
    REQUIRE(flat.lower[k] == Catch::Approx(3.0).margin(1e-10));
    REQUIRE(flat.upper[k] == Catch::Approx(3.0).margin(1e-10));
  }

  StateFunction decreasing(8);
  for (Configuration k = 0; k < 8; ++k) decreasing[k] = -sum_function(3)[k];
  REQUIRE_THROWS_AS(sandwich_check(c, decreasing, 1.0, 1e-3), UsageError);
}

TEST_CASE("sandwich on a singleton grid: all three coincide", "[ergodicity]") {
  SpeedFunction c = contact_speed(path_graph(3), lambda_grid({0.25}));
  SandwichReport rep = sandwich_check(c, sum_function(3), 1.0, 1e-3);
  REQUIRE(rep.status == SandwichReport::Status::ok);
  REQUIRE(rep.pass);
  REQUIRE(max_abs_diff(rep.lower, rep.upper) <= 1e-8);
  REQUIRE(max_abs_diff(rep.lower, rep.middle) <= 1e-8);
}

TEST_CASE("sandwich precondition failure is reported, not thrown", "[ergodicity]") {
  SandwichReport rep = sandwich_check(contrarian2(), sum_function(2), 1.0, 1e-3);
  REQUIRE(rep.status == SandwichReport::Status::failed_precondition);
  REQUIRE_FALSE(rep.upper_attractive);
  REQUIRE_FALSE(rep.pass);
}

TEST_CASE("nonlinear ergodicity certificate on the contact family", "[ergodicity]") {
  ErgodicityVerdict verdict = certify_nonlinear_ergodicity(contact3());
  REQUIRE(verdict.status == CertificationStatus::certified_ergodic);
  REQUIRE(verdict.diagnostics.upper_attractive);
  REQUIRE(verdict.diagnostics.lower_attractive);
  REQUIRE(verdict.diagnostics.upper_ergodic);
  REQUIRE(verdict.diagnostics.lower_ergodic);
  REQUIRE(verdict.diagnostics.same_invariant);
  REQUIRE(verdict.mu.has_value());
  REQUIRE(tv_distance(*verdict.mu, point_mass(8, 0)) <= 1e-8);
}

TEST_CASE("certificate reduces to the linear test on singleton grids", "[ergodicity]") {
  SpeedFunction irreducible = two_state_speed(1.0, 2.0);
  ErgodicityVerdict v1 = certify_nonlinear_ergodicity(irreducible);
  REQUIRE(v1.status == CertificationStatus::certified_ergodic);
  REQUIRE(v1.mu->weights[0] == Catch::Approx(2.0 / 3).margin(1e-10));

  SpeedFunction frozen = tabular_speed(ControlGrid({{"z", 0.0}}), {{{0.0, 0.0}}});
  ErgodicityVerdict v2 = certify_nonlinear_ergodicity(frozen);
  REQUIRE(v2.status == CertificationStatus::not_certified);
  REQUIRE_FALSE(v2.diagnostics.upper_ergodic);
  REQUIRE_FALSE(v2.mu.has_value());
}

TEST_CASE("certificate diagnostics isolate the failing leg", "[ergodicity]") {
  // Ising envelopes mix sup and inf rates; their invariant laws differ.
  ErgodicityVerdict ising =
      certify_nonlinear_ergodicity(ising_speed(complete_graph(2), beta_grid({0.2, 0.5})));
  REQUIRE(ising.status == CertificationStatus::not_certified);
  REQUIRE(ising.diagnostics.upper_attractive);
  REQUIRE(ising.diagnostics.lower_attractive);
  REQUIRE(ising.diagnostics.upper_ergodic);
  REQUIRE(ising.diagnostics.lower_ergodic);
  REQUIRE_FALSE(ising.diagnostics.same_invariant);

  ErgodicityVerdict bad = certify_nonlinear_ergodicity(contrarian2());
  REQUIRE(bad.status == CertificationStatus::not_certified);
  REQUIRE_FALSE(bad.diagnostics.upper_attractive);
}

TEST_CASE("contact criterion", "[ergodicity]") {
  REQUIRE(contact_criterion(path_graph(3), lambda_grid({0.1, 0.4})));
  REQUIRE_FALSE(contact_criterion(path_graph(3), lambda_grid({0.6})));
  REQUIRE_FALSE(contact_criterion(path_graph(3), lambda_grid({0.5})));  // strict
  REQUIRE(contact_criterion(SiteGraph(1, {}), lambda_grid({5.0})));     // no edges
  REQUIRE_THROWS_AS(contact_criterion(path_graph(2), ControlGrid({{"bad", 0.0}})),
                    ParameterError);
}

TEST_CASE("criterion models certify across small paths and cycles", "[ergodicity]") {
  std::vector<SiteGraph> graphs;
  for (int n = 2; n <= 5; ++n) graphs.push_back(path_graph(n));
  for (int n = 3; n <= 5; ++n) graphs.push_back(cycle_graph(n));
  for (const SiteGraph& g : graphs) {
    double d = g.max_degree();
    for (ControlGrid grid : {lambda_grid({0.8 / d}), lambda_grid({0.3 / d, 0.8 / d})}) {
      REQUIRE(contact_criterion(g, grid));
      ErgodicityVerdict verdict = certify_nonlinear_ergodicity(contact_speed(g, grid));
      REQUIRE(verdict.status == CertificationStatus::certified_ergodic);
      REQUIRE(tv_distance(*verdict.mu, point_mass(g.space().size(), 0)) <= 1e-8);
    }
  }
}

TEST_CASE("invariance of the certified distribution", "[ergodicity]") {
  SpeedFunction c = contact3();
  Distribution uniform{std::vector<double>(8, 1.0 / 8)};

  InvarianceReport frozen = invariance_check(c, uniform, 0.0, 1e-3);
  REQUIRE(frozen.max_gap == 0.0);

  ErgodicityVerdict verdict = certify_nonlinear_ergodicity(c);
  for (double t : {0.5, 1.0, 2.0}) {
    InvarianceReport rep = invariance_check(c, *verdict.mu, t, 1e-3);
    REQUIRE(rep.pass);
    REQUIRE(rep.max_gap <= 1e-6);
  }

  // The uniform law is not invariant for this model.
  InvarianceReport off = invariance_check(c, uniform, 1.0, 1e-3);
  REQUIRE_FALSE(off.pass);
  REQUIRE(off.max_gap > 1e-3);

  // Linear stationarity on a singleton grid.
  SpeedFunction two = two_state_speed(1.0, 2.0);
  Distribution mu{{2.0 / 3, 1.0 / 3}};
  InvarianceReport lin = invariance_check(two, mu, 1.0, 1e-3);
  REQUIRE(lin.pass);
}

TEST_CASE("convergence probe", "[ergodicity]") {
  SpeedFunction c = contact3();
  auto rows = convergence_probe(c, sum_function(3), {1.0, 5.0}, 1e-3);
  REQUIRE(rows.size() == 2);
  REQUIRE(rows[0].t == 1.0);
  REQUIRE(rows[0].sup_gap >= rows[1].sup_gap);
  REQUIRE(rows[1].sup_gap >= 0.0);

  auto flat = convergence_probe(c, StateFunction(8, 2.0), {1.0, 5.0}, 1e-3);
  for (const ProbeRow& row : flat) REQUIRE(row.sup_gap <= 1e-9);

  REQUIRE_THROWS_AS(
      convergence_probe(ising_speed(complete_graph(2), beta_grid({0.2, 0.5})), sum_function(2),
                        {1.0}, 1e-3),
      UsageError);
}
