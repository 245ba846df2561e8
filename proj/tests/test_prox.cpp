#include <doctest.h>

#include <cmath>

#include "lq/prox.hpp"
#include "lq/rng.hpp"

using namespace lq;

namespace {

// Independent oracle: plain bisection of v + lam_mu*q*v^(q-1) = a on [eta, a].
// Deliberately shares nothing with the library's Newton path.
double bisect_root(double a, double lam_mu, double q) {
    const double c = lam_mu * q;
    const double eta = std::pow(2.0 * lam_mu * (1.0 - q), 1.0 / (2.0 - q));
    double lo = eta, hi = a;
    for (int it = 0; it < 500; ++it) {
        const double mid = 0.5 * (lo + hi);
        const double g = mid + c * std::pow(mid, q - 1.0) - a;
        (g > 0.0 ? hi : lo) = mid;
    }
    return 0.5 * (lo + hi);
}

double soft_threshold(double z, double t) {
    const double a = std::abs(z) - t;
    return (a > 0.0) ? ((z > 0.0) ? a : -a) : 0.0;
}

}  // namespace

TEST_CASE("threshold formulas tau and eta") {
    const ProxParams p = make_prox_params(1.0, 0.5, 0.5);  // lam_mu = 0.5
    CHECK(p.lam_mu == doctest::Approx(0.5).epsilon(1e-15));

    const ProxParams unit = make_prox_params(1.0, 1.0, 0.5);
    CHECK(unit.tau == doctest::Approx(1.5).epsilon(1e-15));
    CHECK(unit.eta == doctest::Approx(1.0).epsilon(1e-15));

    const ProxParams zero = make_prox_params(0.0, 1.0, 0.5);
    CHECK(zero.tau == 0.0);
    CHECK(zero.eta == 0.0);

    // q -> 1 limit: tau approaches the soft threshold lam_mu within 1%.
    const ProxParams soft = make_prox_params(1.0, 1.0, 0.999);
    CHECK(std::abs(soft.tau - 1.0) <= 0.01);
}

TEST_CASE("threshold consistency on random parameter pairs") {
    Rng rng(20240601);
    for (int trial = 0; trial < 10000; ++trial) {
        const double lam_mu = std::pow(10.0, -3.0 + 4.0 * rng.uniform01());
        const double q = 0.01 + 0.98 * rng.uniform01();
        const ProxParams p = make_prox_params(lam_mu, 1.0, q);
        const double eta_ref = std::pow(2.0 * lam_mu * (1.0 - q), 1.0 / (2.0 - q));
        const double tau_ref = (2.0 - q) / (2.0 - 2.0 * q) * eta_ref;
        CHECK(p.tau > p.eta);
        CHECK(p.eta > 0.0);
        CHECK(std::abs(p.eta - eta_ref) <= 1e-12 * eta_ref);
        CHECK(std::abs(p.tau - tau_ref) <= 1e-12 * tau_ref);
    }
}

TEST_CASE("make_prox_params rejects bad arguments") {
    CHECK_THROWS_AS(make_prox_params(1.0, 1.0, 0.0), std::invalid_argument);
    CHECK_THROWS_AS(make_prox_params(1.0, 1.0, 1.0), std::invalid_argument);
    CHECK_THROWS_AS(make_prox_params(1.0, 1.0, -0.2), std::invalid_argument);
    CHECK_THROWS_AS(make_prox_params(1.0, 1.0, 1.5), std::invalid_argument);
    CHECK_THROWS_AS(make_prox_params(1.0, 0.0, 0.5), std::invalid_argument);
    CHECK_THROWS_AS(make_prox_params(1.0, -1.0, 0.5), std::invalid_argument);
    CHECK_THROWS_AS(make_prox_params(-1.0, 1.0, 0.5), std::invalid_argument);
}

TEST_CASE("prox_scalar on the worked examples") {
    const ProxParams p = make_prox_params(1.0, 1.0, 0.5);

    const ProxValue at_zero = prox_scalar(0.0, p);
    CHECK(at_zero.count == 1);
    CHECK(at_zero.branch[0] == 0.0);

    // Frozen via the bisection oracle: root of v + 0.5 v^{-1/2} = 2.
    const ProxValue above = prox_scalar(2.0, p);
    CHECK(above.count == 1);
    CHECK(above.branch[0] == doctest::Approx(1.6053779404796).epsilon(1e-10));
    CHECK(std::abs(above.branch[0] - 1.6058) < 1e-3);

    // Exactly at tau: both branches, the nonzero one equals eta = 1.
    const ProxValue at_tau = prox_scalar(1.5, p);
    CHECK(at_tau.count == 2);
    CHECK(at_tau.branch[0] == 0.0);
    CHECK(at_tau.branch[1] == doctest::Approx(1.0).epsilon(1e-12));

    CHECK_THROWS_AS(prox_scalar(std::numeric_limits<double>::quiet_NaN(), p),
                    std::invalid_argument);
    CHECK_THROWS_AS(prox_scalar(std::numeric_limits<double>::infinity(), p),
                    std::invalid_argument);
}

TEST_CASE("prox_scalar root, range, and symmetry properties") {
    Rng rng(77001);
    for (int trial = 0; trial < 2000; ++trial) {
        const double lam_mu = std::pow(10.0, -2.0 + 3.0 * rng.uniform01());
        const double q = 0.05 + 0.9 * rng.uniform01();
        const double z = (rng.uniform01() - 0.5) * 40.0;
        const ProxParams p = make_prox_params(lam_mu, 1.0, q);
        const ProxValue v = prox_scalar(z, p);
        for (int b = 0; b < v.count; ++b) {
            const double out = v.branch[b];
            if (out == 0.0) continue;
            CHECK(std::abs(out) >= p.eta - 1e-12);
            const double resid =
                out + p.lam_mu * p.q * ((out > 0.0) ? 1.0 : -1.0) *
                          std::pow(std::abs(out), p.q - 1.0) -
                z;
            CHECK(std::abs(resid) <= 1e-9 * std::max(1.0, std::abs(z)));
        }
        // Odd symmetry holds branchwise and exactly.
        const ProxValue neg = prox_scalar(-z, p);
        REQUIRE(neg.count == v.count);
        for (int b = 0; b < v.count; ++b) CHECK(neg.branch[b] == -v.branch[b]);
    }
}

TEST_CASE("prox_scalar agrees with the grid oracle") {
    Rng rng(501);
    for (int trial = 0; trial < 100; ++trial) {
        const double lam_mu = std::pow(10.0, -2.0 + 3.0 * rng.uniform01());
        const double q = 0.05 + 0.9 * rng.uniform01();
        const ProxParams p = make_prox_params(lam_mu, 1.0, q);
        double z = (rng.uniform01() - 0.5) * 40.0;
        if (std::abs(std::abs(z) - p.tau) < 1e-6) z += 1e-3;
        const double expect = prox_oracle(z, p, 20000);
        const ProxValue got = prox_scalar(z, p);
        CHECK(std::abs(got.value() - expect) <= 1e-6 * std::max(1.0, std::abs(z)));
    }
}

TEST_CASE("fixed-point scheme matches the closed forms and the oracle") {
    const ProxParams p = make_prox_params(1.0, 1.0, 0.5);
    const double v = prox_scalar_fixed_point(2.0, p, 1e-12, 10000);
    CHECK(v == doctest::Approx(half_threshold(2.0, p).value()).epsilon(1e-10));
    CHECK(v == doctest::Approx(1.6053779404796).epsilon(1e-10));

    // Boundary root: z = tau gives eta.
    CHECK(prox_scalar_fixed_point(1.5, p, 1e-13, 10000) == doctest::Approx(1.0).epsilon(1e-11));

    // General q, frozen via the bisection oracle: v + 0.3 v^{-0.7} = 10.
    const ProxParams p3 = make_prox_params(1.0, 1.0, 0.3);
    const double v3 = prox_scalar_fixed_point(10.0, p3, 1e-13, 10000);
    CHECK(v3 == doctest::Approx(9.93988896836469).epsilon(1e-12));
    CHECK(v3 == doctest::Approx(bisect_root(10.0, 1.0, 0.3)).epsilon(1e-11));

    CHECK_THROWS_AS(prox_scalar_fixed_point(0.5, p, 1e-12, 1000), std::invalid_argument);
    CHECK_THROWS_AS(prox_scalar_fixed_point(2.0, p, 1e-15, 2), std::runtime_error);
    CHECK(prox_scalar_fixed_point(-2.0, p, 1e-12, 10000) ==
          doctest::Approx(-1.6053779404796).epsilon(1e-10));
}

TEST_CASE("half thresholding closed form") {
    const ProxParams p = make_prox_params(1.0, 1.0, 0.5);
    CHECK(half_threshold(2.0, p).value() == doctest::Approx(1.6053779404796).epsilon(1e-12));
    CHECK(half_threshold(1.0, p).value() == 0.0);  // below tau = 1.5
    CHECK(half_threshold(-2.0, p).value() ==
          doctest::Approx(-1.6053779404796).epsilon(1e-12));
    const ProxValue at_tau = half_threshold(1.5, p);
    CHECK(at_tau.count == 2);
    CHECK(at_tau.branch[1] == doctest::Approx(1.0).epsilon(1e-12));

    const ProxParams wrong = make_prox_params(1.0, 1.0, 0.4);
    CHECK_THROWS_AS(half_threshold(1.0, wrong), std::invalid_argument);
}

TEST_CASE("two-thirds thresholding closed form") {
    const ProxParams p = make_prox_params(0.5, 1.0, 2.0 / 3.0);  // lam_mu = 0.5
    CHECK(p.tau == doctest::Approx(0.877382675301662).epsilon(1e-13));
    CHECK(p.eta == doctest::Approx(0.438691337650831).epsilon(1e-13));

    CHECK(two_thirds_threshold(0.5, p).value() == 0.0);  // below tau
    // Frozen via the bisection oracle: v + (1/3) v^{-1/3} = 2.
    const double v = two_thirds_threshold(2.0, p).value();
    CHECK(v == doctest::Approx(1.72189428264132).epsilon(1e-12));
    const double resid = v + (1.0 / 3.0) * std::pow(v, -1.0 / 3.0) - 2.0;
    CHECK(std::abs(resid) <= 1e-12);
    CHECK(two_thirds_threshold(-2.0, p).value() == -v);

    const ProxParams wrong = make_prox_params(0.5, 1.0, 0.5);
    CHECK_THROWS_AS(two_thirds_threshold(1.0, wrong), std::invalid_argument);
}

TEST_CASE("closed forms agree with the fixed-point path on random inputs") {
    Rng rng(9302);
    for (int trial = 0; trial < 300; ++trial) {
        const double lam_mu = std::pow(10.0, -2.0 + 3.0 * rng.uniform01());
        const double scale = std::max(1.0, 4.0 * lam_mu);
        for (double q : {0.5, 2.0 / 3.0}) {
            const ProxParams p = make_prox_params(lam_mu, 1.0, q);
            const double z = p.tau + rng.uniform01() * 20.0 * scale;
            const double closed = (q == 0.5) ? half_threshold(z, p).value()
                                             : two_thirds_threshold(z, p).value();
            const double iterated = prox_scalar_fixed_point(z, p, 1e-14, 100000);
            CHECK(std::abs(closed - iterated) <= 1e-10 * std::max(1.0, std::abs(z)));
        }
    }
}

TEST_CASE("soft-threshold limit at q near one") {
    Rng rng(4410);
    for (int trial = 0; trial < 300; ++trial) {
        const double lam_mu = 0.01 + 2.0 * rng.uniform01();
        const ProxParams p = make_prox_params(lam_mu, 1.0, 0.999);
        double z = (rng.uniform01() - 0.5) * 40.0;
        if (std::abs(z) > 0.9 * p.tau && std::abs(z) < 1.1 * p.tau) continue;
        const double got = prox_scalar(z, p).value();
        const double soft = soft_threshold(z, p.lam_mu);
        CHECK(std::abs(got - soft) <= 1e-2 * std::max(1.0, std::abs(z)));
    }
}

TEST_CASE("tie-break selection at and away from the threshold") {
    const ProxParams p = make_prox_params(1.0, 1.0, 0.5);
    CHECK(tie_break(1.5, 0.0, p) == 0.0);
    CHECK(tie_break(1.5, 0.7, p) == doctest::Approx(1.0).epsilon(1e-15));
    CHECK(tie_break(-1.5, 0.7, p) == doctest::Approx(-1.0).epsilon(1e-15));
    CHECK(tie_break(2.0, 0.0, p) == doctest::Approx(1.6053779404796).epsilon(1e-10));
    CHECK(tie_break(2.0, 123.0, p) == tie_break(2.0, 0.0, p));
    CHECK(tie_break(0.3, 5.0, p) == 0.0);
}

TEST_CASE("grid oracle basics") {
    const ProxParams p = make_prox_params(1.0, 1.0, 0.5);
    CHECK(prox_oracle(0.0, p, 2000) == 0.0);
    CHECK_THROWS_AS(prox_oracle(1.0, p, 999), std::invalid_argument);
    // Just below tau the origin wins over every interior candidate.
    CHECK(prox_oracle(1.4999, p, 100000) == 0.0);
    // Just above tau the nonzero branch wins.
    const double above = prox_oracle(1.5001, p, 100000);
    CHECK(above == doctest::Approx(prox_scalar(1.5001, p).value()).epsilon(1e-6));
}

TEST_CASE("prox invariants hold at parameter extremes") {
    const double lam_grid[] = {1e-8, 1e-4, 1.0, 1e2, 1e4};
    const double q_grid[] = {0.01, 0.05, 0.5, 2.0 / 3.0, 0.95, 0.99};
    for (double lam : lam_grid) {
        for (double q : q_grid) {
            const ProxParams p = make_prox_params(lam, 1.0, q);
            REQUIRE(std::isfinite(p.tau));
            REQUIRE(p.tau > p.eta);
            const double far = 1e6 * std::max(p.tau, 1.0);
            const double inputs[] = {0.0,         p.tau * (1.0 - 1e-9), p.tau,
                                     p.tau * (1.0 + 1e-9), p.tau + 1.0, far};
            for (double magnitude : inputs) {
                for (double sign : {1.0, -1.0}) {
                    const double z = sign * magnitude;
                    const ProxValue v = prox_scalar(z, p);
                    REQUIRE(v.count >= 1);
                    REQUIRE(v.count <= 2);
                    for (int b = 0; b < v.count; ++b) {
                        const double out = v.branch[b];
                        REQUIRE(std::isfinite(out));
                        if (out == 0.0) continue;
                        CHECK(std::abs(out) >= p.eta - 1e-12 * std::max(1.0, p.eta));
                        const double resid = out +
                                             p.lam_mu * q * ((out > 0.0) ? 1.0 : -1.0) *
                                                 std::pow(std::abs(out), q - 1.0) -
                                             z;
                        CHECK(std::abs(resid) <= 1e-9 * std::max(1.0, std::abs(z)));
                    }
                    CHECK(std::isfinite(tie_break(z, 0.7, p)));
                    CHECK(std::isfinite(tie_break(z, 0.0, p)));
                }
            }
        }
    }
}

TEST_CASE("lam_mu = 0 reduces every operator to the identity") {
    const ProxParams p = make_prox_params(0.0, 1.0, 0.5);
    CHECK(prox_scalar(3.25, p).value() == 3.25);
    CHECK(tie_break(-0.75, 0.0, p) == -0.75);
    CHECK(half_threshold(3.25, p).value() == 3.25);
    CHECK(prox_scalar_fixed_point(3.25, p, 1e-12, 10) == 3.25);
}
