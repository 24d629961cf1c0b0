#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>

#include "clv/errors.hpp"
#include "clv/pnbd.hpp"
#include "clv/pnbd_dynamic.hpp"

using namespace clv;

namespace {

CovariatePath constant_path(int n_intervals, double value, double offset = 0.0) {
    CovariatePath path;
    path.interval_length = 1.0;
    path.offset = offset;
    path.values_trans.assign(n_intervals, {value});
    path.values_life.assign(n_intervals, {value});
    return path;
}

CovariatePath seasonal_path(int n_intervals, int period = 8, double offset = 0.0) {
    CovariatePath path;
    path.interval_length = 1.0;
    path.offset = offset;
    for (int k = 0; k < n_intervals; ++k) {
        const double v = (k % period) < period / 2 ? 1.0 : 0.0;
        path.values_trans.push_back({v});
        path.values_life.push_back({v});
    }
    return path;
}

DynCustomer make_customer(double x, double t_x, double big_t, CovariatePath path,
                          std::vector<double> times, const std::vector<double>& gamma_probe) {
    DynCustomer c;
    c.id = "c";
    c.x = x;
    c.t_x = t_x;
    c.big_t = big_t;
    c.path = std::move(path);
    c.times.t = std::move(times);
    const std::size_t dim = gamma_probe.size();
    c.sum_cov_at_times.assign(dim, 0.0);
    for (double tj : c.times.t) {
        const int k = c.path.interval_of(std::min(tj, c.path.coverage_end() - 1e-12));
        for (std::size_t d = 0; d < dim; ++d)
            c.sum_cov_at_times[d] += c.path.values_trans[k][d];
    }
    return c;
}

}  // namespace

TEST_CASE("capital_lambda basics") {
    CovariatePath path = constant_path(20, 0.0);
    CHECK(capital_lambda(path, {0.7}, 2.0, 9.5) == doctest::Approx(7.5).epsilon(1e-14));
    CHECK(capital_lambda(path, {0.7}, 4.0, 4.0) == 0.0);

    CovariatePath ones = constant_path(20, 1.0);
    CHECK(capital_lambda(ones, {std::log(2.0)}, 1.0, 5.0) ==
          doctest::Approx(8.0).epsilon(1e-12));
    CHECK(capital_m(ones, {std::log(2.0)}, 6.0) == doctest::Approx(12.0).epsilon(1e-12));
    CHECK(capital_m(ones, {0.3}, 0.0) == 0.0);
    CHECK_THROWS_AS(capital_lambda(path, {0.7}, -1.0, 5.0), CoverageError);
    CHECK_THROWS_AS(capital_lambda(path, {0.7}, 5.0, 25.0), CoverageError);
}

TEST_CASE("capital_lambda interval additivity") {
    CovariatePath path = seasonal_path(40);
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> unif(0.0, 40.0);
    for (int i = 0; i < 100; ++i) {
        double a = unif(rng), b = unif(rng), c = unif(rng);
        if (a > b) std::swap(a, b);
        if (b > c) std::swap(b, c);
        if (a > b) std::swap(a, b);
        const double whole = capital_lambda(path, {0.8}, a, c);
        const double split = capital_lambda(path, {0.8}, a, b) +
                             capital_lambda(path, {0.8}, b, c);
        CHECK(whole == doctest::Approx(split).epsilon(1e-12));
    }
}

TEST_CASE("conditional likelihood matches fine-grid death integration") {
    PnbdParams p{1.2, 6.0, 0.9, 11.0, {0.6}, {-0.4}, {}};
    CovariatePath path = seasonal_path(40);
    DynCustomer c = make_customer(2, 10.3, 26.0, path, {4.2, 10.3}, p.gamma_trans);

    const double lam0 = 0.23, mu0 = 0.12;
    const double closed = pnbd_dynamic_conditional_loglik(p, c, lam0, mu0);

    // brute force: alive term + step-1e-4 midpoint integration of the death term
    auto phi = [&](double u) {
        const int k = path.interval_of(std::min(u, path.coverage_end() - 1e-12));
        return std::exp(p.gamma_trans[0] * path.values_trans[k][0]);
    };
    auto psi = [&](double u) {
        const int k = path.interval_of(std::min(u, path.coverage_end() - 1e-12));
        return std::exp(p.gamma_life[0] * path.values_life[k][0]);
    };
    const double log_p = std::log(phi(4.2)) + std::log(phi(10.3));
    const double lam_t = capital_lambda(path, p.gamma_trans, 0.0, c.big_t);
    const double mu_t = capital_m(path, p.gamma_life, c.big_t);
    double death = 0.0;
    const double h = 1e-4;
    const int n_steps = static_cast<int>((c.big_t - c.t_x) / h);
    for (int i = 0; i < n_steps; ++i) {
        const double w = c.t_x + (i + 0.5) * h;
        death += h * mu0 * psi(w) *
                 std::exp(-lam0 * capital_lambda(path, p.gamma_trans, 0.0, w) -
                          mu0 * capital_m(path, p.gamma_life, w));
    }
    const double alive = std::exp(-lam0 * lam_t - mu0 * mu_t);
    const double брute = c.x * std::log(lam0) + log_p + std::log(alive + death);
    CHECK(closed == doctest::Approx(брute).epsilon(1e-7));
}

TEST_CASE("zero coefficients nest the standard model") {
    PnbdParams p{1.3, 7.0, 0.8, 12.0, {0.0}, {0.0}, {}};
    CovariatePath path = seasonal_path(40);
    DynCustomer c = make_customer(3, 18.0, 30.0, path, {5.0, 11.0, 18.0}, p.gamma_trans);
    CustomerSummary cs;
    cs.customer_id = "c";
    cs.x = 3;
    cs.t_x = 18.0;
    cs.big_t = 30.0;
    const double dyn = pnbd_dynamic_loglik_customer(p, cs, path, {{5.0, 11.0, 18.0}});
    const double standard = pnbd_loglik_at(1.3, 7.0, 0.8, 12.0, 3.0, 18.0, 30.0);
    CHECK(dyn == doctest::Approx(standard).epsilon(1e-6));
}

TEST_CASE("constant covariates equal the static-covariate likelihood") {
    PnbdParams p{1.1, 5.0, 1.2, 9.0, {0.45}, {-0.3}, {}};
    CovariatePath path = constant_path(40, 1.0);
    DynCustomer c = make_customer(2, 12.0, 26.0, path, {6.0, 12.0}, p.gamma_trans);
    CustomerSummary cs;
    cs.customer_id = "c";
    cs.x = 2;
    cs.t_x = 12.0;
    cs.big_t = 26.0;
    const double dyn = pnbd_dynamic_loglik_customer(p, cs, path, {{6.0, 12.0}});
    // static mapping: alpha_i = alpha e^{-gamma x}; identical covariate value 1
    // Note the static form scales the heterogeneity scale; the dynamic form
    // scales the intensity. These coincide for time-invariant covariates.
    const double stat = pnbd_loglik_customer(p, cs, {1.0}, {1.0});
    CHECK(dyn == doctest::Approx(stat).epsilon(1e-6));
}

TEST_CASE("discretization invariance under interval subdivision") {
    PnbdParams p{1.0, 4.0, 1.0, 8.0, {0.5}, {0.2}, {}};
    CovariatePath coarse = seasonal_path(30);
    CovariatePath fine;
    fine.interval_length = 0.5;
    fine.offset = 0.0;
    for (const auto& v : coarse.values_trans) {
        fine.values_trans.push_back(v);
        fine.values_trans.push_back(v);
    }
    for (const auto& v : coarse.values_life) {
        fine.values_life.push_back(v);
        fine.values_life.push_back(v);
    }
    DynCustomer c1 = make_customer(2, 9.0, 22.0, coarse, {3.5, 9.0}, p.gamma_trans);
    DynCustomer c2 = make_customer(2, 9.0, 22.0, fine, {3.5, 9.0}, p.gamma_trans);
    const double a = pnbd_dynamic_loglik_customer_at(p, c1, 96);
    const double b = pnbd_dynamic_loglik_customer_at(p, c2, 96);
    CHECK(a == doctest::Approx(b).epsilon(1e-10));
}

TEST_CASE("quadrature order stabilizes") {
    PnbdParams p{0.9, 3.0, 1.1, 6.0, {0.7}, {0.4}, {}};
    CovariatePath path = seasonal_path(40);
    DynCustomer c = make_customer(4, 20.0, 35.0, path, {3.0, 8.0, 14.0, 20.0},
                                  p.gamma_trans);
    const double l64 = pnbd_dynamic_loglik_customer_at(p, c, 64);
    const double l128 = pnbd_dynamic_loglik_customer_at(p, c, 128);
    CHECK(std::fabs(l128 - l64) / std::max(1.0, std::fabs(l128)) < 1e-6);
}

TEST_CASE("dect: zero horizon, nesting, coverage error") {
    PnbdParams p0{1.2, 14.0, 0.8, 18.0, {0.0}, {0.0}, {}};
    CovariatePath path = seasonal_path(80);
    DynCustomer c = make_customer(3, 30.0, 52.0, path, {11.0, 21.0, 30.0}, p0.gamma_trans);

    CHECK(pnbd_dynamic_dect(p0, c, 0.0) == 0.0);

    // zero coefficients: DECT(delta = 0) equals the standard CET
    CustomerSummary cs;
    cs.customer_id = "c";
    cs.x = 3;
    cs.t_x = 30.0;
    cs.big_t = 52.0;
    PnbdParams std_p{1.2, 14.0, 0.8, 18.0, {}, {}, {}};
    const double cet = pnbd_cet(std_p, cs, 20.0);
    const double dect = pnbd_dynamic_dect(p0, c, 20.0, 0.0, 128);
    CHECK(dect == doctest::Approx(cet).epsilon(1e-5));

    // discounting reduces the count
    const double dect_disc = pnbd_dynamic_dect(p0, c, 20.0, 0.05, 128);
    CHECK(dect_disc < dect);

    CHECK_THROWS_AS(pnbd_dynamic_dect(p0, c, 60.0), CoverageError);
}

TEST_CASE("dynamic palive nests the standard model") {
    PnbdParams p0{1.2, 14.0, 0.8, 18.0, {0.0}, {0.0}, {}};
    CovariatePath path = seasonal_path(60);
    DynCustomer c = make_customer(3, 30.0, 52.0, path, {11.0, 21.0, 30.0}, p0.gamma_trans);
    CustomerSummary cs;
    cs.customer_id = "c";
    cs.x = 3;
    cs.t_x = 30.0;
    cs.big_t = 52.0;
    PnbdParams std_p{1.2, 14.0, 0.8, 18.0, {}, {}, {}};
    CHECK(pnbd_dynamic_palive(p0, c, 128) ==
          doctest::Approx(pnbd_palive(std_p, cs)).epsilon(1e-6));
}

TEST_CASE("unconditional expectation nests and accumulates") {
    PnbdParams p0{1.4, 10.0, 0.7, 20.0, {0.0}, {0.0}, {}};
    CovariatePath path = seasonal_path(60);
    const double direct = pnbd_dynamic_expected_transactions(p0, path, 0.0, 52.0);
    PnbdParams std_p{1.4, 10.0, 0.7, 20.0, {}, {}, {}};
    CHECK(direct == doctest::Approx(pnbd_unconditional_expectation(std_p, 52.0))
                        .epsilon(1e-10));
    // additivity over windows
    const double split = pnbd_dynamic_expected_transactions(p0, path, 0.0, 17.0) +
                         pnbd_dynamic_expected_transactions(p0, path, 17.0, 52.0);
    CHECK(direct == doctest::Approx(split).epsilon(1e-12));
}

TEST_CASE("seasonal covariates shift expected purchases into high season") {
    PnbdParams p{1.4, 10.0, 0.7, 20.0, {0.8}, {0.0}, {}};
    CovariatePath path = seasonal_path(16, 16);  // one long on/off block
    const double high = pnbd_dynamic_expected_transactions(p, path, 0.0, 8.0);
    const double low = pnbd_dynamic_expected_transactions(p, path, 8.0, 16.0);
    CHECK(high > low);
}
