#include <catch2/catch_amalgamated.hpp>

#include "ds3/kernel_decay.hpp"
#include "ds3/spectral.hpp"
#include "oracles.hpp"

using namespace ds3;

namespace {

// desk geometry for the decay law: long axial box against the x1-image
// cancellation, transverse room for the largest ring plus image margin
DecayExperimentSpec desk_spec(const std::string& op) {
  DecayExperimentSpec spec;
  spec.op = op;
  spec.grid = GridSpec(112, 96, 96, 28.0, 32.0, 32.0);
  spec.gamma1 = 1.0;
  spec.gamma2 = 2.5;
  spec.ring_width = 1.0;
  spec.x1_extent = 0.75;
  spec.R_values = {1.5, 2.0, 3.0, 4.0};
  return spec;
}

}  // namespace

TEST_CASE("decay spec validation", "[decay]") {
  DecayExperimentSpec spec = desk_spec("E1");
  REQUIRE_NOTHROW(spec.validate());

  SECTION("operator tag") {
    spec.op = "E2";
    REQUIRE_THROWS_AS(spec.validate(), config_error);
  }
  SECTION("identical or crossed supports") {
    spec.gamma2 = spec.gamma1;
    REQUIRE_THROWS_AS(spec.validate(), config_error);
    spec.gamma2 = 0.5;
    REQUIRE_THROWS_AS(spec.validate(), config_error);
  }
  SECTION("too few separations") {
    spec.R_values = {1.5, 2.0, 3.0};
    REQUIRE_THROWS_AS(spec.validate(), config_error);
  }
  SECTION("separations must increase") {
    spec.R_values = {1.5, 2.0, 2.0, 3.0};
    REQUIRE_THROWS_AS(spec.validate(), config_error);
  }
  SECTION("largest ring must fit the box") {
    spec.R_values = {1.5, 2.0, 3.0, 5.0};
    REQUIRE_THROWS_AS(spec.validate(), config_error);
  }
  SECTION("support gap must be resolved on the grid") {
    spec.gamma2 = 1.05;
    spec.R_values = {1.0, 2.0, 3.0, 4.0};
    REQUIRE_THROWS_AS(spec.validate(), config_error);
  }
  SECTION("axial extent must fit the box") {
    spec.x1_extent = 15.0;
    REQUIRE_THROWS_AS(spec.validate(), config_error);
  }
}

TEST_CASE("separated bumps are normalized and disjoint", "[decay]") {
  GridSpec g(48, 64, 64, 14.0, 24.0, 24.0);
  double R = 2.0;
  ComplexField gin = decay_inner_bump(g, R, 1.0, 0.75);
  ComplexField fout = decay_outer_ring(g, R, 2.5, 1.0, 0.75);

  CompensatedSum l1g, l1f;
  for (auto& z : gin.v) l1g.add(std::abs(z));
  for (auto& z : fout.v) l1f.add(std::abs(z));
  CHECK(l1g.value() * g.cell_volume() == Catch::Approx(1.0).epsilon(1e-12));
  CHECK(l1f.value() * g.cell_volume() == Catch::Approx(1.0).epsilon(1e-12));

  // supports: g inside |xbar| <= gamma1 R, f outside gamma2 R, no overlap
  double worst_g = 0.0, worst_f = 0.0, worst_prod = 0.0;
  std::size_t idx = 0;
  for (int i1 = 0; i1 < g.n1; ++i1)
    for (int i2 = 0; i2 < g.n2; ++i2) {
      double x2 = g.coord(1, i2);
      for (int i3 = 0; i3 < g.n3; ++i3, ++idx) {
        double r = std::sqrt(sq(x2) + sq(g.coord(2, i3)));
        if (r > 1.0 * R) worst_g = std::max(worst_g, std::abs(gin.v[idx]));
        if (r < 2.5 * R) worst_f = std::max(worst_f, std::abs(fout.v[idx]));
        worst_prod = std::max(worst_prod,
                              std::abs(gin.v[idx]) * std::abs(fout.v[idx]));
      }
    }
  CHECK(worst_g == 0.0);
  CHECK(worst_f == 0.0);
  CHECK(worst_prod == 0.0);
}

TEST_CASE("pairings are bilinear to machine precision", "[decay]") {
  GridSpec g(48, 64, 64, 14.0, 24.0, 24.0);
  ComplexField gin = decay_inner_bump(g, 2.0, 1.0, 0.75);
  ComplexField fout = decay_outer_ring(g, 2.0, 2.5, 1.0, 0.75);

  double base = decay_pairing(fout, gin, "E1");
  REQUIRE(base != 0.0);

  // doubling one factor doubles the pairing exactly: scaling by a power of
  // two commutes through every linear operation bit for bit
  ComplexField f2 = fout;
  for (auto& z : f2.v) z *= 2.0;
  CHECK(decay_pairing(f2, gin, "E1") == 2.0 * base);
  ComplexField g2 = gin;
  for (auto& z : g2.v) z *= 2.0;
  CHECK(decay_pairing(fout, g2, "E1") == 2.0 * base);

  // additivity up to roundoff reassociation
  ComplexField sum = fout;
  for (std::size_t i = 0; i < sum.v.size(); ++i) sum.v[i] += gin.v[i];
  double lhs = decay_pairing(sum, gin, "E1");
  double rhs = base + decay_pairing(gin, gin, "E1");
  CHECK(lhs == Catch::Approx(rhs).epsilon(1e-12));

  // symmetry of the real pairing: symbol is real, operator self-adjoint
  ComplexField ef = e1_apply(fout);
  ComplexField eg = e1_apply(gin);
  double scale = std::abs(pairing(ef, gin));
  CHECK(std::abs(pairing(ef, gin) - pairing(fout, eg)) <= 1e-12 * scale);
}

TEST_CASE("log-log fit behaves on synthetic data", "[decay]") {
  DecayFit fit;
  for (double R : {1.0, 2.0, 4.0, 8.0, 16.0})
    fit.points.push_back({R, 5.0 * std::pow(R, -3.0), false});
  fit_loglog(fit);
  CHECK(fit.slope == Catch::Approx(-3.0).margin(1e-12));
  CHECK(fit.intercept == Catch::Approx(std::log(5.0)).margin(1e-12));
  CHECK(fit.n_used == 5);
  CHECK(fit.slope_ci < 1e-10);

  SECTION("excluded points drop out of the fit") {
    fit.points[4].excluded = true;
    fit.points[4].value = 1e-300;
    fit_loglog(fit);
    CHECK(fit.n_used == 4);
    CHECK(fit.slope == Catch::Approx(-3.0).margin(1e-12));
  }
  SECTION("too few surviving points is an error") {
    for (std::size_t i = 3; i < fit.points.size(); ++i)
      fit.points[i].excluded = true;
    REQUIRE_THROWS_AS(fit_loglog(fit), numeric_error);
  }
}

TEST_CASE("kernel decay law for both operators", "[decay][slow]") {
  for (const std::string& op : {std::string("E1"), std::string("E1sq")}) {
    DecayFit fit = pairing_decay_experiment(desk_spec(op));
    INFO("operator " << op << " slope " << fit.slope << " ci " << fit.slope_ci);
    CHECK(fit.n_used == 4);
    CHECK(fit.slope > -3.3);
    CHECK(fit.slope < -2.7);
    for (std::size_t i = 0; i < fit.points.size(); ++i) {
      CHECK(fit.points[i].value > 1e-10);
      CHECK_FALSE(fit.points[i].excluded);
      if (i > 0) CHECK(fit.points[i].value < fit.points[i - 1].value);
    }
  }
}

TEST_CASE("strauss samples are cylindrical and refinement stable",
          "[strauss]") {
  GridSpec g64 = GridSpec::cubic(64, 16.0);
  GridSpec g96 = GridSpec::cubic(96, 16.0);

  CounterRng rng(9, 0);
  CounterRng draw = rng.substream(std::uint64_t(0));
  ComplexField u = strauss_sample(g64, draw, {});
  // the construction is a function of (x1, |xbar|) only, so lattice points
  // in the same transverse radius class carry identical values
  auto cyl = is_cylindrical(u, 1e-12);
  CHECK(cyl.ok);

  // the same draw on a finer grid samples the same continuum field
  auto a = strauss_check(12, 4.0, g64, CounterRng(9, 0));
  auto b = strauss_check(12, 4.0, g96, CounterRng(9, 0));
  REQUIRE(a.max_ratio > 0.0);
  CHECK(b.max_ratio / a.max_ratio == Catch::Approx(1.0).margin(0.05));
}

TEST_CASE("strauss ratio is zero for data inside the cutoff", "[strauss]") {
  GridSpec g = GridSpec::cubic(32, 16.0);
  ComplexField u = ComplexField::sample(g, [](double a, double b, double c) {
    double r2 = b * b + c * c;
    return r2 < 4.0 ? std::exp(-a * a - r2) * sq(4.0 - r2) : 0.0;
  });
  double tail = lp_norm(u, 4.0, Region::cylinder_outside, 4.0);
  CHECK(tail == 0.0);
  CHECK(sq(sq(tail)) * 4.0 / h1dot_sq(u) == 0.0);
}

TEST_CASE("strauss probe windows", "[strauss][slow]") {
  GridSpec g64 = GridSpec::cubic(64, 16.0);
  auto base = strauss_check(200, 3.5, g64, CounterRng(9, 0));
  auto doubled = strauss_check(200, 7.0, g64, CounterRng(9, 0));
  REQUIRE(base.samples == 200);
  REQUIRE(std::isfinite(base.max_ratio));
  REQUIRE(base.max_ratio > 0.0);
  double factor = doubled.max_ratio / base.max_ratio;
  INFO("doubling factor " << factor);
  CHECK(factor > 0.3);
  CHECK(factor < 0.8);
}

TEST_CASE("strauss input validation", "[strauss]") {
  GridSpec g = GridSpec::cubic(32, 16.0);
  CHECK_THROWS_AS(strauss_check(0, 4.0, g, CounterRng(1, 0)), config_error);
  CHECK_THROWS_AS(strauss_check(5, -1.0, g, CounterRng(1, 0)), config_error);
  CHECK_THROWS_AS(strauss_check(5, 14.0, g, CounterRng(1, 0)), config_error);
  StraussOptions opt;
  opt.q_max = 50.0;
  CHECK_THROWS_AS(strauss_check(5, 4.0, g, CounterRng(1, 0), opt),
                  config_error);
}

TEST_CASE("operator is an L2 contraction on random data", "[l2bound]") {
  GridSpec g = GridSpec::cubic(32, 16.0);
  for (const std::string& op : {std::string("E1"), std::string("E1sq")}) {
    auto rep = l2_boundedness_probe(op, 100, g, CounterRng(11, 0));
    INFO("operator " << op << " max ratio " << rep.max_ratio);
    CHECK(rep.max_ratio <= 1.0 + 1e-12);
    CHECK(rep.max_ratio > 0.1);
  }
  CHECK_THROWS_AS(l2_boundedness_probe("bad", 5, g, CounterRng(1, 0)),
                  config_error);
}

TEST_CASE("spectral packets pin the operator norm endpoints", "[l2bound]") {
  GridSpec g = GridSpec::cubic(48, 16.0);
  // packet riding the xi1 axis: symbol near its supremum 1
  ComplexField axial = spectral_packet(g, 8.0, 0.8, 0.15);
  CHECK(l2_ratio("E1", axial) > 0.999);
  CHECK(l2_ratio("E1sq", axial) > 0.998);
  // slab at xi1 = 0: symbol vanishes
  ComplexField slab = spectral_packet(g, 0.0, 0.05, 3.0);
  CHECK(l2_ratio("E1", slab) < 1e-6);
  CHECK(l2_ratio("E1sq", slab) < 1e-6);
}
