#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>

#include "clv/errors.hpp"
#include "clv/pnbd.hpp"
#include "oracles.hpp"

using namespace clv;

namespace {

CustomerSummary make_summary(int x, double t_x, double big_t) {
    CustomerSummary cs;
    cs.customer_id = "c";
    cs.x = x;
    cs.t_x = t_x;
    cs.big_t = big_t;
    return cs;
}

ClvDataset tiny_dataset() {
    // three in-period customers against a fixed 40-week window
    std::vector<TransactionRecord> recs;
    auto day = [](int d) { return static_cast<Timestamp>(d) * kSecondsPerDay; };
    recs.push_back({"a", day(0), {}});
    recs.push_back({"a", day(70), {}});
    recs.push_back({"a", day(140), {}});
    recs.push_back({"b", day(0), {}});
    recs.push_back({"c", day(7), {}});
    recs.push_back({"c", day(77), {}});
    IngestOptions opt;
    opt.time_unit = TimeUnit{TimeUnit::Kind::week};
    opt.estimation_split = 40.0;
    opt.data_end = day(40 * 7 + 10);
    return ingest(recs, opt);
}

}  // namespace

TEST_CASE("loglik matches frozen high-precision value") {
    // params and purchase summary fixed; reference from 35-digit arithmetic
    PnbdParams p{1.449, 48.6361, 0.5613, 46.8844, {}, {}, {}};
    const double ll = pnbd_loglik_customer(p, make_summary(4, 60.0, 104.0));
    CHECK(ll == doctest::Approx(-17.934808092842951).epsilon(1e-12));
}

TEST_CASE("loglik agrees with the quadrature oracle across random tuples") {
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    for (int i = 0; i < 60; ++i) {
        const double r = 0.3 + 2.7 * unif(rng);
        const double a = 0.3 + 119.7 * unif(rng);
        const double s = 0.3 + 2.7 * unif(rng);
        const double b = 0.3 + 119.7 * unif(rng);
        const double big_t = 10.0 + 190.0 * unif(rng);
        const int x = static_cast<int>(30 * unif(rng) * unif(rng));
        const double t_x = (x == 0) ? 0.0 : big_t * unif(rng);
        const double closed = pnbd_loglik_at(r, a, s, b, x, t_x, big_t);
        const double quad = oracle::pnbd_loglik_quadrature(r, a, s, b, x, t_x, big_t);
        CHECK(std::fabs(closed - quad) < 1e-8 * std::max(1.0, std::fabs(quad)));
    }
}

TEST_CASE("zero repeater reduces to the two-term expression") {
    const double r = 0.8, a = 12.0, s = 1.3, b = 9.0, big_t = 78.0;
    const double closed = pnbd_loglik_at(r, a, s, b, 0.0, 0.0, big_t);
    const double quad = oracle::pnbd_loglik_quadrature(r, a, s, b, 0.0, 0.0, big_t);
    CHECK(closed == doctest::Approx(quad).epsilon(1e-8));
}

TEST_CASE("alpha equals beta is branch-free and continuous") {
    const double r = 1.2, s = 0.7, v = 20.0;
    // z = 0: A1 = (alpha + t_x)^{-(r+s+x)}, mix closed without 2F1
    const double ll = pnbd_loglik_at(r, v, s, v, 3.0, 15.0, 52.0);
    const double rsx = r + s + 3.0;
    const double a1 = -rsx * std::log(v + 15.0);
    const double a2 = -rsx * std::log(v + 52.0);
    const double expect = std::lgamma(r + 3.0) - std::lgamma(r) + r * std::log(v) +
                          s * std::log(v) +
                          std::log(s / rsx * std::exp(a1 - a2) + (r + 3.0) / rsx) + a2;
    CHECK(ll == doctest::Approx(expect).epsilon(1e-12));

    const double up = pnbd_loglik_at(r, v + 1e-9, s, v, 3.0, 15.0, 52.0);
    const double dn = pnbd_loglik_at(r, v - 1e-9, s, v, 3.0, 15.0, 52.0);
    CHECK(std::fabs(up - dn) < 1e-6);
}

TEST_CASE("covariates scale the rate parameters") {
    PnbdParams p{1.0, 10.0, 1.0, 8.0, {0.5, -0.2}, {0.3}, {}};
    const auto cs = make_summary(2, 8.0, 40.0);
    const std::vector<double> xt{1.0, 2.0}, xl{1.0};
    const double ll = pnbd_loglik_customer(p, cs, xt, xl);
    const double expect = pnbd_loglik_at(1.0, 10.0 * std::exp(-0.1), 1.0,
                                         8.0 * std::exp(-0.3), 2.0, 8.0, 40.0);
    CHECK(ll == doctest::Approx(expect).epsilon(1e-14));

    // zero coefficients nest the standard model exactly
    PnbdParams p0 = p;
    p0.gamma_trans = {0.0, 0.0};
    p0.gamma_life = {0.0};
    CHECK(pnbd_loglik_customer(p0, cs, xt, xl) ==
          pnbd_loglik_at(1.0, 10.0, 1.0, 8.0, 2.0, 8.0, 40.0));
}

TEST_CASE("total loglik: correlation at m = 0 is bitwise identical") {
    ClvDataset ds = tiny_dataset();
    PnbdParams p{1.0, 2.0, 1.0, 3.0, {}, {}, {}};
    ModelOptions base;
    const double plain = pnbd_loglik_total(p, ds, base);
    PnbdParams pc = p;
    pc.m = 0.0;
    ModelOptions corr;
    corr.use_correlation = true;
    CHECK(pnbd_loglik_total(pc, ds, corr) == plain);
}

TEST_CASE("total loglik: regularization penalty arithmetic") {
    ClvDataset ds = tiny_dataset();
    CovariateTable life, trans;
    life.mode = trans.mode = CovariateTable::Mode::static_cov;
    life.names = trans.names = {"g1", "g2"};
    for (const auto& s : ds.summaries) {
        life.static_rows[s.customer_id] = {0.0, 0.0};
        trans.static_rows[s.customer_id] = {0.0, 0.0};
    }
    ds = attach_covariates(ds, life, trans);
    PnbdParams p{1.0, 2.0, 1.0, 3.0, {0.5, 0.5}, {0.5, 0.5}, {}};
    ModelOptions no_reg;
    ModelOptions reg;
    reg.reg_lambdas = {{0.1, 0.1}};
    const double without = pnbd_loglik_total(p, ds, no_reg);
    const double with_reg = pnbd_loglik_total(p, ds, reg);
    CHECK(without - with_reg == doctest::Approx(0.1).epsilon(1e-12));
}

TEST_CASE("zero-coefficient static model equals standard model exactly") {
    ClvDataset ds = tiny_dataset();
    PnbdParams p{1.3, 4.0, 0.9, 5.0, {}, {}, {}};
    ModelOptions opts;
    const double standard = pnbd_loglik_total(p, ds, opts);

    CovariateTable life, trans;
    life.mode = trans.mode = CovariateTable::Mode::static_cov;
    life.names = trans.names = {"z"};
    std::mt19937_64 rng(3);
    for (const auto& s : ds.summaries) {
        life.static_rows[s.customer_id] = {std::uniform_real_distribution<>(-2, 2)(rng)};
        trans.static_rows[s.customer_id] = {std::uniform_real_distribution<>(-2, 2)(rng)};
    }
    ClvDataset with_cov = attach_covariates(ds, life, trans);
    PnbdParams pz = p;
    pz.gamma_trans = {0.0};
    pz.gamma_life = {0.0};
    CHECK(pnbd_loglik_total(pz, with_cov, opts) == standard);
}

TEST_CASE("sarmanov correlation coefficient") {
    PnbdParams p{1.0, 1.0, 1.0, 1.0, {}, {}, 1.0};
    CHECK(sarmanov_correlation(p) == doctest::Approx(0.0625).epsilon(1e-14));
    p.m = 0.0;
    CHECK(sarmanov_correlation(p) == 0.0);
    // sign follows m
    std::mt19937_64 rng(9);
    std::uniform_real_distribution<double> unif(0.1, 5.0);
    for (int i = 0; i < 50; ++i) {
        PnbdParams q{unif(rng), unif(rng), unif(rng), unif(rng), {}, {}, {}};
        const double m = std::uniform_real_distribution<double>(-2.0, 2.0)(rng);
        q.m = m;
        const double pm = sarmanov_correlation(q);
        if (m > 0) CHECK(pm > 0);
        if (m < 0) CHECK(pm < 0);
        CHECK(std::fabs(pm) <= 1.0);
    }
    PnbdParams none{1, 1, 1, 1, {}, {}, {}};
    CHECK_THROWS_AS(sarmanov_correlation(none), CapabilityError);
}

TEST_CASE("sarmanov four-corner likelihood equals direct quadrature") {
    const double r = 1.1, a = 4.0, s = 0.8, b = 6.0;
    const double x = 2.0, t_x = 10.0, big_t = 40.0;
    // frozen reference from 40-digit arithmetic at m = 0.6
    PnbdParams p{r, a, s, b, {}, {}, 0.6};
    CustomerSummary cs = make_summary(2, 10.0, 40.0);
    ClvDataset ds;
    ds.time_unit = TimeUnit{TimeUnit::Kind::week};
    ds.summaries = {cs};
    ds.estimation_length = 40.0;
    ModelOptions opts;
    opts.use_correlation = true;
    CHECK(pnbd_loglik_total(p, ds, opts) ==
          doctest::Approx(-8.22053597349318404).epsilon(1e-12));

    for (double m : {-0.4, -0.1, 0.0, 0.3, 0.9}) {
        p.m = m;
        const double four = pnbd_loglik_total(p, ds, opts);
        const double quad =
            oracle::pnbd_loglik_sarmanov_quadrature(r, a, s, b, m, x, t_x, big_t);
        CHECK(four == doctest::Approx(quad).epsilon(1e-6));
    }
}

TEST_CASE("infeasible sarmanov parameter yields -inf") {
    ClvDataset ds = tiny_dataset();
    const double r = 1.0, a = 0.2, s = 1.0, b = 0.2;
    // pick m so that the first customer's combined likelihood is exactly -L00
    const auto& cs = ds.summaries.front();
    const double l00 = std::exp(pnbd_loglik_at(r, a, s, b, cs.x, cs.t_x, cs.big_t));
    const double l10 = std::exp(pnbd_loglik_at(r, a + 1, s, b, cs.x, cs.t_x, cs.big_t));
    const double l01 = std::exp(pnbd_loglik_at(r, a, s, b + 1, cs.x, cs.t_x, cs.big_t));
    const double l11 = std::exp(pnbd_loglik_at(r, a + 1, s, b + 1, cs.x, cs.t_x, cs.big_t));
    const double k = std::pow(a / (1 + a), r) * std::pow(b / (1 + b), s);
    const double dd = l11 - l10 - l01 + l00;
    REQUIRE(dd != 0.0);
    PnbdParams p{r, a, s, b, {}, {}, -2.0 * l00 / (k * dd)};
    ModelOptions opts;
    opts.use_correlation = true;
    CHECK(pnbd_loglik_total(p, ds, opts) == -std::numeric_limits<double>::infinity());
}

TEST_CASE("palive matches quadrature and frozen value") {
    PnbdParams p{1.449, 48.6361, 0.5613, 46.8844, {}, {}, {}};
    const auto cs = make_summary(4, 60.0, 104.0);
    CHECK(pnbd_palive(p, cs) == doctest::Approx(0.61056360785089094).epsilon(1e-10));
    std::mt19937_64 rng(23);
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    for (int i = 0; i < 20; ++i) {
        const double r = 0.4 + 2 * unif(rng), a = 1 + 60 * unif(rng);
        const double s = 0.4 + 2 * unif(rng), b = 1 + 60 * unif(rng);
        const double big_t = 20 + 120 * unif(rng);
        const int x = static_cast<int>(12 * unif(rng));
        const double t_x = (x == 0) ? 0.0 : big_t * unif(rng);
        PnbdParams q{r, a, s, b, {}, {}, {}};
        const double closed = pnbd_palive(q, make_summary(x, t_x, big_t));
        const double quad = oracle::palive_quadrature(r, a, s, b, x, t_x, big_t);
        CHECK(closed == doctest::Approx(quad).epsilon(1e-8));
    }
}

TEST_CASE("palive decreases as the silent gap grows") {
    PnbdParams p{1.0, 10.0, 1.0, 10.0, {}, {}, {}};
    double prev = 1.1;
    for (double big_t : {20.0, 30.0, 45.0, 70.0, 100.0}) {
        const double v = pnbd_palive(p, make_summary(5, 18.0, big_t));
        CHECK(v < prev);
        CHECK(v >= 0.0);
        CHECK(v <= 1.0);
        prev = v;
    }
}

TEST_CASE("cet: zero horizon, oracle agreement, monotone in horizon") {
    PnbdParams p{1.449, 48.6361, 0.5613, 46.8844, {}, {}, {}};
    const auto cs = make_summary(4, 60.0, 104.0);
    CHECK(pnbd_cet(p, cs, 0.0) == 0.0);
    CHECK(pnbd_cet(p, cs, 26.0) == doctest::Approx(0.54152314166909078).epsilon(1e-10));
    CHECK_THROWS_AS(pnbd_cet(p, cs, -1.0), DomainError);
    double prev = 0.0;
    for (double h : {5.0, 10.0, 20.0, 40.0}) {
        const double v = pnbd_cet(p, cs, h);
        CHECK(v > prev);
        prev = v;
    }
    std::mt19937_64 rng(31);
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    for (int i = 0; i < 15; ++i) {
        const double r = 0.4 + 2 * unif(rng), a = 1 + 40 * unif(rng);
        const double s = 0.4 + 2 * unif(rng), b = 1 + 40 * unif(rng);
        const double big_t = 20 + 100 * unif(rng);
        const int x = static_cast<int>(8 * unif(rng));
        const double t_x = (x == 0) ? 0.0 : big_t * unif(rng);
        const double h = 1.0 + 80.0 * unif(rng);
        PnbdParams q{r, a, s, b, {}, {}, {}};
        const double closed = pnbd_cet(q, make_summary(x, t_x, big_t), h);
        const double quad = oracle::cet_quadrature(r, a, s, b, x, t_x, big_t, h);
        CHECK(closed == doctest::Approx(quad).epsilon(1e-6));
    }
}

TEST_CASE("dert: frozen value, oracle agreement, discount dominance") {
    PnbdParams p{1.449, 48.6361, 0.5613, 46.8844, {}, {}, {}};
    const auto cs = make_summary(4, 60.0, 104.0);
    const double delta = std::log(1.10) / 52.0;
    CHECK(pnbd_dert(p, cs, delta) == doctest::Approx(6.2740327866718853).epsilon(1e-10));
    CHECK_THROWS_AS(pnbd_dert(p, cs, 0.0), DomainError);
    CHECK_THROWS_AS(pnbd_dert(p, cs, -0.5), DomainError);
    CHECK(pnbd_dert(p, cs, 10.0) < 1e-3 * pnbd_dert(p, cs, 0.001));

    std::mt19937_64 rng(41);
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    for (int i = 0; i < 15; ++i) {
        const double r = 0.4 + 2 * unif(rng), a = 1 + 40 * unif(rng);
        const double s = 0.4 + 2.4 * unif(rng), b = 1 + 40 * unif(rng);
        const double big_t = 20 + 100 * unif(rng);
        const int x = static_cast<int>(8 * unif(rng));
        const double t_x = (x == 0) ? 0.0 : big_t * unif(rng);
        const double d = 0.0005 + 0.05 * unif(rng);
        PnbdParams q{r, a, s, b, {}, {}, {}};
        const double closed = pnbd_dert(q, make_summary(x, t_x, big_t), d);
        const double numeric = oracle::dert_truncated_integral(r, a, s, b, x, t_x, big_t, d);
        CHECK(closed == doctest::Approx(numeric).epsilon(1e-6));
    }
}

TEST_CASE("unconditional expectation: zero, s = 1 limit, closed form") {
    PnbdParams p{1.449, 48.6361, 0.5613, 46.8844, {}, {}, {}};
    CHECK(pnbd_unconditional_expectation(p, 0.0) == 0.0);
    CHECK(pnbd_unconditional_expectation(p, 52.0) ==
          doctest::Approx(1.2332779172502817).epsilon(1e-12));

    PnbdParams p1{1.2, 8.0, 1.0, 20.0, {}, {}, {}};
    const double exact = 1.2 / 8.0 * 20.0 * std::log(1.0 + 52.0 / 20.0);
    CHECK(pnbd_unconditional_expectation(p1, 52.0) == doctest::Approx(exact).epsilon(1e-9));
    PnbdParams up = p1, dn = p1;
    up.s = 1.0 + 1e-6;
    dn.s = 1.0 - 1e-6;
    CHECK(pnbd_unconditional_expectation(up, 52.0) ==
          doctest::Approx(pnbd_unconditional_expectation(dn, 52.0)).epsilon(1e-5));
}

TEST_CASE("pmf: frozen references, normalization, NBD limit") {
    PnbdParams p{1.449, 48.6361, 0.5613, 46.8844, {}, {}, {}};
    CHECK(pnbd_pmf(p, 52.0, 0) == doctest::Approx(0.44893112590328512).epsilon(1e-10));
    CHECK(pnbd_pmf(p, 52.0, 1) == doctest::Approx(0.24388757570434991).epsilon(1e-10));
    CHECK(pnbd_pmf(p, 52.0, 3) == doctest::Approx(0.076609463472525486).epsilon(1e-10));

    {
        // apparel-scale parameters: mass beyond 200 repeat purchases is nil
        PnbdParams q{1.449, 48.6361, 0.5613, 46.8844, {}, {}, {}};
        const auto row = pnbd_pmf_row(q, 104.0, 200);
        double total = 0.0;
        for (double v : row) total += v;
        CHECK(total == doctest::Approx(1.0).epsilon(1e-6));
    }
    {
        // high purchase rate (r/alpha = 2 per unit): support reaches past 200
        PnbdParams q{1.0, 0.5, 1.0, 0.5, {}, {}, {}};
        const auto row = pnbd_pmf_row(q, 104.0, 2000);
        double total = 0.0;
        for (double v : row) total += v;
        CHECK(total == doctest::Approx(1.0).epsilon(1e-6));
    }

    // s -> infinity with beta/s fixed: attrition vanishes, PMF approaches the
    // plain NBD counting distribution
    PnbdParams nb{1.3, 6.0, 1e4, 1e4 * 1e4, {}, {}, {}};
    const double t = 104.0;
    for (int k : {0, 1, 4, 9}) {
        const double nbd = std::exp(std::lgamma(1.3 + k) - std::lgamma(1.3) -
                                    std::lgamma(k + 1.0) + 1.3 * std::log(6.0 / (6.0 + t)) +
                                    k * std::log(t / (6.0 + t)));
        CHECK(pnbd_pmf(nb, t, k) == doctest::Approx(nbd).epsilon(1e-3));
    }
}

TEST_CASE("loglik_total is -inf for nonpositive parameters") {
    ClvDataset ds = tiny_dataset();
    ModelOptions opts;
    PnbdParams p{-1.0, 1.0, 1.0, 1.0, {}, {}, {}};
    CHECK(pnbd_loglik_total(p, ds, opts) == -std::numeric_limits<double>::infinity());
}
