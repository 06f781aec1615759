#include <catch2/catch_amalgamated.hpp>

#include <Eigen/Dense>
#include <cmath>
#include <cstdint>
#include <vector>

#include "cate/simulation.hpp"
#include "oracles.hpp"

using cate::Error;
using cate::ErrorKind;
using cate::Estimand;
using cate::Method;

namespace {

auto kind_is(ErrorKind k) {
  return Catch::Matchers::Predicate<Error>(
      [k](const Error& e) { return e.kind() == k; });
}

cate::PotentialTable make_pop(double rho, std::uint64_t seed, std::size_t n) {
  cate::DgpParams params;
  params.n = n;
  params.rho = rho;
  params.seed = seed;
  return cate::generate_population(params);
}

bool same_table(const cate::PotentialTable& a, const cate::PotentialTable& b) {
  return a.y0 == b.y0 && a.y1 == b.y1 && a.d0 == b.d0 && a.d1 == b.d1 &&
         a.x == b.x;
}

bool same_record(const cate::ReplicationRecord& a, const cate::ReplicationRecord& b) {
  auto eq = [](double u, double v) {
    return (std::isnan(u) && std::isnan(v)) || u == v;
  };
  return a.rep == b.rep && a.method == b.method && a.estimand == b.estimand &&
         eq(a.point, b.point) && eq(a.ci_lo, b.ci_lo) && eq(a.ci_hi, b.ci_hi) &&
         a.failed == b.failed;
}

}  // namespace

TEST_CASE("population generation is a pure function of the seed") {
  const auto a = make_pop(0.5, 99, 200);
  const auto b = make_pop(0.5, 99, 200);
  const auto c = make_pop(0.5, 100, 200);
  REQUIRE(same_table(a, b));
  REQUIRE_FALSE(same_table(a, c));
}

TEST_CASE("generator rejects impossible parameters") {
  cate::DgpParams params;
  params.rho = 2.0;
  REQUIRE_THROWS_MATCHES(cate::generate_population(params), Error,
                         kind_is(ErrorKind::InvalidCovariance));
  params.rho = -2.5;
  REQUIRE_THROWS_MATCHES(cate::generate_population(params), Error,
                         kind_is(ErrorKind::InvalidCovariance));
  params.rho = 0.0;
  params.n = 1;
  REQUIRE_THROWS_MATCHES(cate::generate_population(params), Error,
                         kind_is(ErrorKind::LengthMismatch));
}

TEST_CASE("generated tables satisfy the structural assumptions") {
  const auto pop = make_pop(0.8, 7, 5000);
  REQUIRE(cate::validate_potential_table(pop) == 0);
  for (std::size_t i = 0; i < pop.n(); ++i) {
    REQUIRE(pop.d1[i] >= pop.d0[i]);
    if (pop.d0[i] == pop.d1[i]) REQUIRE(pop.y0[i] == pop.y1[i]);
  }
}

TEST_CASE("stratum shares follow the uptake thresholds") {
  // uptake flips at x1 = 0.5 (control) and x1 = -1.5 (treated); x1 has sd
  // sqrt(2), so the shares are plain normal probabilities
  const auto pop = make_pop(0.0, 4242, 150000);
  const cate::TrueEstimands t = cate::true_estimands(pop);
  const double inv_sd = 1.0 / std::sqrt(2.0);
  const double p_always = 1.0 - oracle::normal_cdf_erfc(0.5 * inv_sd);
  const double p_never = oracle::normal_cdf_erfc(-1.5 * inv_sd);
  const double p_complier = 1.0 - p_always - p_never;
  REQUIRE(t.strata_props[0] == Catch::Approx(p_complier).margin(0.006));
  REQUIRE(t.strata_props[1] == Catch::Approx(p_always).margin(0.006));
  REQUIRE(t.strata_props[2] == Catch::Approx(p_never).margin(0.006));
  REQUIRE(t.strata_props[3] == 0.0);
  REQUIRE(t.strata_props[0] + t.strata_props[1] + t.strata_props[2] +
              t.strata_props[3] ==
          Catch::Approx(1.0).margin(1e-12));
}

TEST_CASE("covariate moments match the requested covariance") {
  const auto pop = make_pop(1.0, 314, 150000);
  const auto n = static_cast<double>(pop.n());
  const Eigen::VectorXd m = pop.x.colwise().mean();
  const Eigen::MatrixXd centered = pop.x.rowwise() - m.transpose();
  const Eigen::MatrixXd cov = centered.transpose() * centered / (n - 1.0);
  REQUIRE(cov(0, 0) == Catch::Approx(2.0).margin(0.06));
  REQUIRE(cov(1, 1) == Catch::Approx(2.0).margin(0.06));
  REQUIRE(cov(0, 1) == Catch::Approx(1.0).margin(0.05));
}

TEST_CASE("population truths are coherent") {
  const auto pop = make_pop(0.0, 77, 2000);
  const cate::TrueEstimands t = cate::true_estimands(pop);
  REQUIRE(t.tau == Catch::Approx(t.tau_y / t.tau_d).margin(1e-12));
  REQUIRE(t.tau_g + t.tau_h == Catch::Approx(t.tau_y).margin(1e-12));
  REQUIRE(t.tau > 0.05);
  REQUIRE(t.tau < 0.30);
  REQUIRE(t.tau_m.has_value());
}

TEST_CASE("one replication reports every method in a fixed order") {
  const auto pop = make_pop(0.0, 55, 400);
  cate::RngStream rng(55, 3);
  const std::vector<Method> methods{Method::Wald, Method::Ils, Method::Ob,
                                    Method::Cob};
  const std::vector<Estimand> estimands{Estimand::Cate, Estimand::Mcate};
  const auto recs = cate::run_replication(pop, 160, rng, methods, estimands);
  REQUIRE(recs.size() == 8);
  for (std::size_t k = 0; k < recs.size(); ++k) {
    REQUIRE(recs[k].method == methods[k % 4]);
    REQUIRE(recs[k].estimand == estimands[k / 4]);
    REQUIRE_FALSE(recs[k].failed);
    REQUIRE(recs[k].ci_lo <= recs[k].point);
    REQUIRE(recs[k].point <= recs[k].ci_hi);
  }
}

TEST_CASE("worker count never changes the simulation output") {
  const auto pop = make_pop(1.0, 88, 200);
  cate::McOptions mc;
  mc.reps = 30;
  mc.estimands = {Estimand::Cate, Estimand::Mcate};

  mc.threads = 1;
  const cate::McResult one = cate::monte_carlo(pop, 100, 2026, mc);
  mc.threads = 3;
  const cate::McResult three = cate::monte_carlo(pop, 100, 2026, mc);

  REQUIRE(one.records.size() == three.records.size());
  for (std::size_t i = 0; i < one.records.size(); ++i)
    REQUIRE(same_record(one.records[i], three.records[i]));
  REQUIRE(one.summaries.size() == three.summaries.size());
  for (std::size_t i = 0; i < one.summaries.size(); ++i) {
    REQUIRE(one.summaries[i].rmse == three.summaries[i].rmse);
    REQUIRE(one.summaries[i].cp == three.summaries[i].cp);
    REQUIRE(one.summaries[i].n_failed == three.summaries[i].n_failed);
  }
}

TEST_CASE("replication streams are indexed, not sequential") {
  // the tail of a long run is the same as a short run started at its offset
  const auto pop = make_pop(0.0, 21, 150);
  cate::McOptions mc;
  mc.reps = 20;
  const cate::McResult full = cate::monte_carlo(pop, 60, 515, mc);
  mc.reps = 10;
  mc.stream_base = 10;
  const cate::McResult tail = cate::monte_carlo(pop, 60, 515, mc);

  const std::size_t per_rep = 4;
  for (std::size_t r = 0; r < 10; ++r) {
    for (std::size_t k = 0; k < per_rep; ++k) {
      const auto& a = full.records[(10 + r) * per_rep + k];
      const auto& b = tail.records[r * per_rep + k];
      REQUIRE(((std::isnan(a.point) && std::isnan(b.point)) || a.point == b.point));
      REQUIRE(a.failed == b.failed);
    }
  }
}

TEST_CASE("summary moments satisfy the error decomposition") {
  const auto pop = make_pop(0.5, 33, 300);
  cate::McOptions mc;
  mc.reps = 60;
  mc.estimands = {Estimand::Cate, Estimand::Mcate};
  const cate::McResult res = cate::monte_carlo(pop, 150, 909, mc);
  const cate::TrueEstimands t = cate::true_estimands(pop);

  for (const cate::McSummaryRow& row : res.summaries) {
    REQUIRE(row.n_completed + row.n_failed == 60);
    REQUIRE(row.n_completed > 1);
    const auto c = static_cast<double>(row.n_completed);
    REQUIRE(row.rmse * row.rmse ==
            Catch::Approx(row.bias * row.bias + (c - 1.0) / c * row.sd * row.sd)
                .margin(1e-10));
    const double truth = row.estimand == Estimand::Cate ? t.tau : *t.tau_m;
    REQUIRE(row.truth == Catch::Approx(truth).margin(1e-14));
    if (row.method == Method::Wald) {
      REQUIRE(row.rmse_ratio == 1.0);
      REQUIRE(row.length_ratio == 1.0);
    }
  }
}

TEST_CASE("ratio-scale simulation refuses a population with no h-effect") {
  cate::PotentialTable pop;
  pop.d0 = {0, 0, 0, 0};
  pop.d1 = {1, 1, 0, 0};
  pop.y0 = {0, 0, 0, 0};
  pop.y1 = {1, 1, 0, 0};
  pop.x = Eigen::MatrixXd(4, 0);
  cate::McOptions mc;
  mc.reps = 5;
  mc.methods = {Method::Wald};
  mc.estimands = {Estimand::Mcate};
  REQUIRE_THROWS_MATCHES(cate::monte_carlo(pop, 2, 1, mc), Error,
                         kind_is(ErrorKind::ZeroDenominator));
}

TEST_CASE("replayed populations preserve the observed cells") {
  const auto src = make_pop(0.8, 61, 300);
  cate::RngStream rng(61, 5);
  const cate::ValidatedSample s =
      cate::observe(src, cate::complete_randomization(300, 120, rng));

  const cate::ReplayResult rep = cate::replay_synthetic_population(s, 404);
  REQUIRE(rep.pop.n() == 300);
  REQUIRE(rep.pop.x == s.x);
  for (Eigen::Index i = 0; i < 300; ++i) {
    const auto u = static_cast<std::size_t>(i);
    if (s.z(i) == 1.0) {
      REQUIRE(rep.pop.d1[u] == static_cast<std::uint8_t>(s.d(i)));
      REQUIRE(rep.pop.y1[u] == static_cast<std::uint8_t>(s.y(i)));
    } else {
      REQUIRE(rep.pop.d0[u] == static_cast<std::uint8_t>(s.d(i)));
      REQUIRE(rep.pop.y0[u] == static_cast<std::uint8_t>(s.y(i)));
    }
    REQUIRE(rep.pop.d1[u] >= rep.pop.d0[u]);
    if (rep.pop.d0[u] == rep.pop.d1[u]) REQUIRE(rep.pop.y0[u] == rep.pop.y1[u]);
  }

  const cate::ReplayResult again = cate::replay_synthetic_population(s, 404);
  REQUIRE(same_table(rep.pop, again.pop));
  const cate::ReplayResult other = cate::replay_synthetic_population(s, 405);
  REQUIRE_FALSE(same_table(rep.pop, other.pop));
}

TEST_CASE("replaying a perfectly compliant sample yields only compliers") {
  const auto s = oracle::make_sample({1, 0, 1, 0, 1, 0, 1, 0, 1, 0},
                                     {1, 0, 1, 0, 1, 0, 1, 0, 1, 0},
                                     {1, 0, 0, 1, 1, 1, 0, 0, 1, 0});
  const cate::ReplayResult rep = cate::replay_synthetic_population(s, 11);
  REQUIRE(rep.truths.strata_props[0] == 1.0);
  REQUIRE(rep.truths.strata_props[1] == 0.0);
  REQUIRE(rep.truths.strata_props[2] == 0.0);
  REQUIRE(rep.truths.strata_props[3] == 0.0);
}

TEST_CASE("replay surfaces separated arm models") {
  // treated outcomes are a hard threshold in the covariate
  const std::size_t n = 40;
  std::vector<int> z(n), d(n), y(n);
  Eigen::MatrixXd x(static_cast<Eigen::Index>(n), 1);
  cate::RngStream rng(606, 0);
  for (std::size_t i = 0; i < n; ++i) {
    z[i] = i < n / 2 ? 1 : 0;
    x(static_cast<Eigen::Index>(i), 0) = -2.0 + 4.0 * static_cast<double>(i % 20) / 19.0;
    d[i] = z[i];
    y[i] = z[i] == 1 ? (x(static_cast<Eigen::Index>(i), 0) > 0.3 ? 1 : 0)
                     : (rng.uniform01() < 0.5 ? 1 : 0);
  }
  const auto s = oracle::make_sample(z, d, y, x);

  cate::EstimatorOptions strict;
  strict.strict = true;
  REQUIRE_THROWS_MATCHES(cate::replay_synthetic_population(s, 1, strict), Error,
                         kind_is(ErrorKind::SeparationDetected));

  const cate::ReplayResult lenient = cate::replay_synthetic_population(s, 1);
  REQUIRE(cate::has_warning(lenient.warnings, cate::WarningKind::Separation));
  REQUIRE(cate::validate_potential_table(lenient.pop) == 0);
}
