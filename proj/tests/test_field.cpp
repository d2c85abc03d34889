#include <doctest.h>

#include "fixtures.hpp"
#include "rfedit/field.hpp"
#include "rfedit/rng.hpp"

using namespace rfedit;
using namespace rfedit::testing;

TEST_CASE("standard normal prompt: velocity vanishes at the symmetric midpoint") {
  // single component N(0,1): v = (b-a) x / (a^2+b^2), zero at a = b
  const GmmField f = standard_field(1);
  for (double x : {-2.0, -0.3, 0.0, 1.7}) {
    CHECK(std::abs(f.velocity(vec({x}), 0.5, Prompt::conditional(0))[0]) < 1e-14);
  }
  // and matches the closed scalar form elsewhere
  for (double t : {0.1, 0.3, 0.8, 0.95}) {
    const double a = 1 - t, b = t;
    const double expect = (b - a) * 1.3 / (a * a + b * b);
    CHECK(f.velocity(vec({1.3}), t, Prompt::conditional(0))[0] ==
          doctest::Approx(expect).epsilon(1e-12));
  }
}

TEST_CASE("standard normal prompt: velocity approaches x near t = 1") {
  const GmmField f = standard_field(1);
  const double x = 0.8;
  const double v = f.velocity(vec({x}), kTMax, Prompt::conditional(0))[0];
  const double a = 1 - kTMax, b = kTMax;
  CHECK(v == doctest::Approx((b - a) * x / (a * a + b * b)).epsilon(1e-12));
  CHECK(std::abs(v - x) < 0.05);
  CHECK_THROWS_AS(f.velocity(vec({x}), 1.0, Prompt::conditional(0)), DomainError);
  CHECK_THROWS_AS(f.velocity(vec({x}), 0.0, Prompt::conditional(0)), DomainError);
}

TEST_CASE("posterior identities") {
  const GmmField f = mixture_field(2);
  const Prompt p = Prompt::conditional(0);
  RngStream rng(7);
  for (int i = 0; i < 20; ++i) {
    const double t = rng.uniform(kTMin, kTMax);
    const Vec x = 2.0 * rng.gaussian(2);
    const ScheduleCoeffs c = f.schedule().eval(t);
    const Posterior post = f.posterior(x, t, p);

    // a E[x0|x] + b E[eps|x] reassembles x
    CHECK((c.a * post.x0_mean + c.b * post.eps_mean - x).norm() < 1e-12);

    double r_sum = 0.0;
    for (double r : post.responsibilities) r_sum += r;
    CHECK(std::abs(r_sum - 1.0) < 1e-12);
  }
}

TEST_CASE("near-dirac component pins the posterior mean") {
  Mixture dirac;
  const Vec mu = vec({1.5, -2.0});
  dirac.components.push_back({1.0, mu, Vec::Constant(2, kSigmaMinSq)});
  const GmmField f(Schedule::rectified_flow(), {dirac});
  const double t = 0.5;
  const Vec x = f.schedule().eval(t).a * mu + vec({0.01, -0.02});
  CHECK((f.posterior_x0(x, t, Prompt::conditional(0)) - mu).norm() < 1e-4);
}

TEST_CASE("responsibilities are equivariant under component permutation") {
  const int dim = 2;
  Mixture m = three_component(dim);
  Mixture rotated;
  rotated.components = {m.components[2], m.components[0], m.components[1]};
  const GmmField f1(Schedule::rectified_flow(), {m});
  const GmmField f2(Schedule::rectified_flow(), {rotated});

  const Vec x = vec({0.4, -1.1});
  const auto r1 = f1.posterior(x, 0.6, Prompt::conditional(0)).responsibilities;
  const auto r2 = f2.posterior(x, 0.6, Prompt::conditional(0)).responsibilities;
  CHECK(r1[2] == doctest::Approx(r2[0]).epsilon(1e-14));
  CHECK(r1[0] == doctest::Approx(r2[1]).epsilon(1e-14));
  CHECK(r1[1] == doctest::Approx(r2[2]).epsilon(1e-14));
  CHECK((f1.velocity(x, 0.6, Prompt::conditional(0)) -
         f2.velocity(x, 0.6, Prompt::conditional(0)))
            .norm() < 1e-13);
}

TEST_CASE("cfg is affine in the guidance scale") {
  const GmmField f = translation_field(2);
  const Prompt p = Prompt::conditional(1);
  const Vec x = vec({0.7, -0.4});
  const double t = 0.45;
  const Vec v_null = f.velocity(x, t, Prompt::unconditional());
  const Vec v_p = f.velocity(x, t, p);
  for (double w : {0.0, 0.5, 1.0, 2.0, 6.0, 16.5}) {
    const Vec expect = v_null + w * (v_p - v_null);
    CHECK((f.cfg_velocity(x, t, p, w) - expect).norm() < 1e-12);
  }
  CHECK((f.cfg_velocity(x, t, p, 1.0) - v_p).norm() == 0.0);
  CHECK((f.cfg_velocity(x, t, p, 0.0) - v_null).norm() < 1e-15);
  // w = 2 hits 2 v_p - v_null componentwise
  CHECK((f.cfg_velocity(x, t, p, 2.0) - (2.0 * v_p - v_null)).norm() < 1e-12);
  CHECK_THROWS_AS(f.cfg_velocity(x, t, p, -1.0), ConfigError);

  // guiding the null prompt is a no-op (warns, result unchanged)
  CHECK((f.cfg_velocity(x, t, Prompt::unconditional(), 6.0) - v_null).norm() == 0.0);
}

TEST_CASE("eps view inverts the velocity view") {
  const GmmField f = mixture_field(2);
  const Prompt p = Prompt::conditional(0);
  RngStream rng(3);
  for (int i = 0; i < 25; ++i) {
    const double t = rng.uniform(kTMin, kTMax);
    const Vec x = 2.0 * rng.gaussian(2);
    const ScheduleCoeffs c = f.schedule().eval(t);
    const Vec v = f.velocity(x, t, p);
    const Vec eps = eps_from_velocity(c, v, x);
    CHECK((velocity_from_eps(c, eps, x) - v).norm() < 1e-12);
    // the eps view of the exact field is the posterior noise mean
    CHECK((eps - f.posterior_eps(x, t, p)).norm() < 1e-12);
  }
}

TEST_CASE("eps view recovers the pair noise on an exact data pair") {
  // field that is exact on (x0*, eps*): a near-dirac component at x0*
  const Vec x0_star = vec({0.9, -0.5});
  const Vec eps_star = vec({0.3, 1.1});
  Mixture dirac;
  dirac.components.push_back({1.0, x0_star, Vec::Constant(2, kSigmaMinSq)});
  const GmmField f(Schedule::rectified_flow(), {dirac});

  const double t = 0.6;
  const ScheduleCoeffs c = f.schedule().eval(t);
  const Vec x_t = c.a * x0_star + c.b * eps_star;
  const Vec v = f.velocity(x_t, t, Prompt::conditional(0));
  // rf: b_dot a - a_dot b = 1, so eps = (1-t) v + x
  const Vec eps = eps_from_velocity(c, v, x_t);
  CHECK((eps - ((1 - t) * v + x_t)).norm() < 1e-12);
  CHECK((eps - eps_star).norm() < 1e-4);
}

TEST_CASE("negative eps view over b matches the finite-difference score") {
  const GmmField f = standard_field(1);
  const GmmField g(Schedule::rectified_flow(), {single_gaussian(vec({1.2}), 0.8)});
  const Prompt p = Prompt::conditional(0);
  const double h = 1e-4;

  for (const GmmField* field : {&f, &g}) {
    for (double t : {0.2, 0.5, 0.9}) {
      for (double xval : {-1.0, 0.3, 2.2}) {
        const Vec x = vec({xval});
        const ScheduleCoeffs c = field->schedule().eval(t);
        const double fd_score = (field->log_marginal(vec({xval + h}), t, p) -
                                 field->log_marginal(vec({xval - h}), t, p)) /
                                (2 * h);
        const double from_eps = -field->posterior_eps(x, t, p)[0] / c.b;
        CHECK(from_eps == doctest::Approx(fd_score).epsilon(1e-4));
        CHECK(field->score(x, t, p)[0] == doctest::Approx(fd_score).epsilon(1e-6));
      }
    }
  }
}

TEST_CASE("velocity jacobian matches finite differences on a mixture") {
  const GmmField f = mixture_field(2);
  const Prompt p = Prompt::conditional(0);
  const double h = 1e-6;
  RngStream rng(11);
  for (int probe = 0; probe < 5; ++probe) {
    const double t = rng.uniform(0.2, 0.9);
    const Vec x = 1.5 * rng.gaussian(2);
    const Mat jac = f.velocity_jacobian(x, t, p);
    for (int j = 0; j < 2; ++j) {
      Vec xp = x, xm = x;
      xp[j] += h;
      xm[j] -= h;
      const Vec col = (f.velocity(xp, t, p) - f.velocity(xm, t, p)) / (2 * h);
      CHECK((jac.col(j) - col).norm() < 1e-6);
    }
  }
}

TEST_CASE("unconditional mixture is the equal-weight union") {
  const GmmField f = translation_field(2, 3.0);
  const Mixture& null_mix = f.mixture(Prompt::unconditional());
  REQUIRE(null_mix.components.size() == 2);
  CHECK(null_mix.components[0].weight == doctest::Approx(0.5));
  CHECK(null_mix.components[1].weight == doctest::Approx(0.5));
  CHECK(null_mix.components[1].mean[0] == doctest::Approx(3.0));
}

TEST_CASE("field input validation") {
  const GmmField f = translation_field(2);
  const Prompt p = Prompt::conditional(0);
  CHECK_THROWS_AS(f.velocity(vec({1.0}), 0.5, p), ShapeError);
  CHECK_THROWS_AS(f.velocity(vec({1.0, 2.0}), 0.5, Prompt::conditional(7)), ConfigError);
  CHECK_THROWS_AS(Prompt::conditional(-1), ConfigError);

  Mixture bad = single_gaussian(vec({0.0}));
  bad.components[0].weight = 0.7;
  CHECK_THROWS_AS(GmmField(Schedule::rectified_flow(), {bad}), ConfigError);
}

TEST_CASE("velocity is coordinate-permutation equivariant") {
  const GmmField f = mixture_field(3);
  const Prompt p = Prompt::conditional(0);
  const std::array<int, 3> perm = {2, 0, 1};

  Mixture permuted;
  for (const auto& c : f.mixture(p).components) {
    MixtureComponent pc = c;
    for (int i = 0; i < 3; ++i) {
      pc.mean[i] = c.mean[perm[i]];
      pc.var[i] = c.var[perm[i]];
    }
    permuted.components.push_back(pc);
  }
  const GmmField fp(Schedule::rectified_flow(), {permuted});

  const Vec x = vec({0.2, -0.9, 1.4});
  Vec xp(3);
  for (int i = 0; i < 3; ++i) xp[i] = x[perm[i]];
  const Vec v = f.velocity(x, 0.55, p);
  const Vec vp = fp.velocity(xp, 0.55, p);
  for (int i = 0; i < 3; ++i) CHECK(vp[i] == doctest::Approx(v[perm[i]]).epsilon(1e-13));
}
