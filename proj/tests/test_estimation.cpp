#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>

#include "clv/errors.hpp"
#include "clv/estimation.hpp"
#include "clv/simulation.hpp"

using namespace clv;

namespace {

MleProblem quadratic_problem() {
    // maximize -(theta - 3)^2 over one positive parameter
    MleProblem prob;
    prob.free_params = {{"theta", Transform::log_positive, 1.0}};
    prob.to_natural = [](const std::vector<double>& t) {
        return std::vector<double>{std::exp(t[0])};
    };
    prob.to_theta = [](const std::vector<double>& n) {
        return std::vector<double>{std::log(n[0])};
    };
    prob.loglik_natural = [](const std::vector<double>& n) {
        return -(n[0] - 3.0) * (n[0] - 3.0);
    };
    return prob;
}

}  // namespace

TEST_CASE("quadratic objective reaches the optimum with KKT flags") {
    for (auto method :
         {OptimizerConfig::Method::quasi_newton, OptimizerConfig::Method::nelder_mead}) {
        OptimizerConfig cfg;
        cfg.method = method;
        FitResult fr = fit_generic(quadratic_problem(), cfg, method, 100);
        CHECK(fr.params[0] == doctest::Approx(3.0).epsilon(1e-6));
        CHECK(fr.converged);
        CHECK(fr.kkt1);
        CHECK(fr.kkt2);
        CHECK(fr.loglik == doctest::Approx(0.0).epsilon(1e-8));
    }
}

TEST_CASE("multidimensional quadratic hessian") {
    // loglik = -1/2 x' A x with A = [[2, 0.5], [0.5, 1]]
    auto ll = [](const std::vector<double>& x) {
        return -0.5 * (2.0 * x[0] * x[0] + x[1] * x[1] + 1.0 * x[0] * x[1]);
    };
    Matrix h = hessian_at(ll, {0.4, -1.2});
    CHECK(h(0, 0) == doctest::Approx(-2.0).epsilon(1e-4));
    CHECK(h(1, 1) == doctest::Approx(-1.0).epsilon(1e-4));
    CHECK(h(0, 1) == doctest::Approx(-0.5).epsilon(1e-4));
    CHECK(h(1, 0) == h(0, 1));

    // step-halving stability: entries move very little under the spec step
    Matrix h2 = hessian_at(ll, {0.4000001, -1.2000001});
    for (std::size_t i = 0; i < 2; ++i)
        for (std::size_t j = 0; j < 2; ++j)
            CHECK(std::fabs(h2(i, j) - h(i, j)) < 1e-3 * std::fabs(h(i, j)));
}

TEST_CASE("parameter recovery on simulated data") {
    SimScenario sc;
    sc.n_customers = 4000;
    sc.params = PnbdParams{1.0, 0.5, 1.0, 0.5, {}, {}, {}};
    sc.estimation_length = 104.0;
    sc.holdout_length = 0.0;
    sc.seed = 20240501;
    SimResult sim = simulate_pnbd(sc);
    OptimizerConfig cfg;
    FitResult fr = fit_pnbd(sim.dataset, {}, cfg);
    CHECK(fr.converged);
    CHECK(fr.kkt1);
    CHECK(fr.kkt2);
    for (const auto& [name, truth] :
         std::vector<std::pair<std::string, double>>{{"r", 1.0}, {"alpha", 0.5}, {"s", 1.0},
                                                     {"beta", 0.5}}) {
        CHECK(std::fabs(fr.param(name) - truth) / truth < 0.15);
    }
    // refit from the fitted point changes the likelihood only at tolerance level
    OptimizerConfig cfg2;
    cfg2.start_values = fr.params;
    FitResult fr2 = fit_pnbd(sim.dataset, {}, cfg2);
    CHECK(std::fabs(fr2.loglik - fr.loglik) < 1e-6 * (1.0 + std::fabs(fr.loglik)));

    // AIC/BIC recomputed from (k, n, LL) match stored values exactly
    const double k = static_cast<double>(fr.param_names.size());
    CHECK(fr.aic == 2.0 * k - 2.0 * fr.loglik);
    CHECK(fr.bic == k * std::log(static_cast<double>(fr.n_customers)) - 2.0 * fr.loglik);

    // vcov is the inverse of the negative hessian
    REQUIRE(fr.vcov.has_value());
    REQUIRE(fr.hessian.has_value());
    const std::size_t n = fr.vcov->n;
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) {
            double prod = 0.0;
            for (std::size_t l = 0; l < n; ++l)
                prod += (*fr.vcov)(i, l) * -(*fr.hessian)(l, j);
            CHECK(prod == doctest::Approx(i == j ? 1.0 : 0.0).epsilon(1e-6));
        }
}

TEST_CASE("gradient of the total loglik is consistent across finite-difference steps") {
    SimScenario sc;
    sc.n_customers = 500;
    sc.params = PnbdParams{1.0, 2.0, 0.8, 4.0, {}, {}, {}};
    sc.estimation_length = 52.0;
    sc.seed = 7;
    SimResult sim = simulate_pnbd(sc);
    const auto cells = pnbd_compile_cells(sim.dataset);
    ModelOptions opts;
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> unif(0.5, 2.0);
    for (int trial = 0; trial < 5; ++trial) {
        std::vector<double> nat{unif(rng), 2.0 * unif(rng), unif(rng), 3.0 * unif(rng)};
        auto f = [&](const std::vector<double>& v) {
            return pnbd_loglik_cells({v[0], v[1], v[2], v[3], {}, {}, {}}, cells, opts);
        };
        for (std::size_t i = 0; i < nat.size(); ++i) {
            auto grad_step = [&](double h) {
                auto up = nat, dn = nat;
                up[i] += h;
                dn[i] -= h;
                return (f(up) - f(dn)) / (2.0 * h);
            };
            const double g1 = grad_step(1e-4 * (1.0 + nat[i]));
            const double g2 = grad_step(5e-5 * (1.0 + nat[i]));
            CHECK(std::fabs(g1 - g2) <= 1e-5 * std::max(1.0, std::fabs(g2)));
        }
    }
}

TEST_CASE("regularization shrinks coefficients monotonically") {
    SimScenario sc;
    sc.n_customers = 1500;
    sc.params = PnbdParams{1.0, 1.2, 0.9, 2.0, {0.8}, {0.5}, {}};
    sc.estimation_length = 78.0;
    sc.seed = 99;
    sc.static_covariate = true;
    SimResult sim = simulate_pnbd(sc);
    double prev_norm = 1e9;
    for (double lambda : {0.0, 10.0, 100.0}) {
        ModelOptions opts;
        if (lambda > 0.0) opts.reg_lambdas = {{lambda, lambda}};
        OptimizerConfig cfg;
        cfg.compute_hessian = false;
        FitResult fr = fit_pnbd(sim.dataset, opts, cfg);
        double norm = 0.0;
        for (std::size_t i = 0; i < fr.param_names.size(); ++i)
            if (fr.param_names[i].rfind("life.", 0) == 0 ||
                fr.param_names[i].rfind("trans.", 0) == 0)
                norm += fr.params[i] * fr.params[i];
        CHECK(norm < prev_norm + 1e-12);
        prev_norm = norm;
    }
}

TEST_CASE("constrained fit exposes a single shared coefficient") {
    SimScenario sc;
    sc.n_customers = 800;
    sc.params = PnbdParams{1.0, 1.2, 0.9, 2.0, {0.4}, {0.4}, {}};
    sc.estimation_length = 52.0;
    sc.seed = 17;
    sc.static_covariate = true;
    SimResult sim = simulate_pnbd(sc);
    ModelOptions opts;
    opts.constrained_names = {"x1"};
    OptimizerConfig cfg;
    FitResult fr = fit_pnbd(sim.dataset, opts, cfg);
    CHECK(fr.has_param("constr.x1"));
    CHECK_FALSE(fr.has_param("life.x1"));
    CHECK_FALSE(fr.has_param("trans.x1"));
    const std::string text = summary_text(fr);
    CHECK(text.find("Constraint covs TRUE") != std::string::npos);
    CHECK(text.find("constr.x1") != std::string::npos);

    // constraining an unknown covariate fails
    ModelOptions bad;
    bad.constrained_names = {"nope"};
    CHECK_THROWS_AS(fit_pnbd(sim.dataset, bad, cfg), InputError);
}

TEST_CASE("summary text marks base parameters NA") {
    SimScenario sc;
    sc.n_customers = 600;
    sc.params = PnbdParams{1.0, 1.0, 1.0, 1.0, {}, {}, {}};
    sc.estimation_length = 52.0;
    sc.seed = 3;
    SimResult sim = simulate_pnbd(sc);
    OptimizerConfig cfg;
    FitResult fr = fit_pnbd(sim.dataset, {}, cfg);
    const std::string text = summary_text(fr);
    // the r row carries an SE but NA inference columns
    const auto pos = text.find("\nr ");
    REQUIRE(pos != std::string::npos);
    const std::string row = text.substr(pos + 1, text.find('\n', pos + 1) - pos - 1);
    CHECK(row.find("NA") != std::string::npos);
}

TEST_CASE("lr test arithmetic") {
    FitResult constrained, unconstrained;
    constrained.param_names = {"a", "b"};
    constrained.loglik = -11776.0;
    unconstrained.param_names = {"a", "b", "c"};
    unconstrained.loglik = -11763.0;
    LrTestResult lr = lr_test(constrained, unconstrained);
    CHECK(lr.chisq == doctest::Approx(26.0).epsilon(1e-12));
    CHECK(lr.df == 1);
    CHECK(lr.p_value == doctest::Approx(3.4e-7).epsilon(0.05));

    // identical fits: chisq 0, p 1
    LrTestResult same = lr_test(constrained, [&] {
        FitResult u = constrained;
        u.param_names = {"a", "b", "c"};
        return u;
    }());
    CHECK(same.chisq == 0.0);
    CHECK(same.p_value == 1.0);

    // df 2 at the 5% critical value
    FitResult c2 = constrained;
    FitResult u2 = constrained;
    u2.param_names = {"a", "b", "c", "d"};
    u2.loglik = constrained.loglik + 5.99 / 2.0;
    LrTestResult lr2 = lr_test(c2, u2);
    CHECK(lr2.df == 2);
    CHECK(lr2.p_value == doctest::Approx(0.05003662709).epsilon(1e-6));

    // nesting violations
    FitResult worse = unconstrained;
    worse.loglik = constrained.loglik - 5.0;
    CHECK_THROWS_AS(lr_test(constrained, worse), InputError);
    CHECK_THROWS_AS(lr_test(unconstrained, constrained), InputError);
}

TEST_CASE("fit result json round trip") {
    SimScenario sc;
    sc.n_customers = 400;
    sc.params = PnbdParams{1.0, 1.0, 1.0, 1.0, {}, {}, {}};
    sc.estimation_length = 52.0;
    sc.seed = 11;
    SimResult sim = simulate_pnbd(sc);
    OptimizerConfig cfg;
    FitResult fr = fit_pnbd(sim.dataset, {}, cfg);
    const std::string json = fit_to_json(fr);
    FitResult back = fit_from_json(json);
    CHECK(back.family == fr.family);
    CHECK(back.params == fr.params);
    CHECK(back.loglik == fr.loglik);
    CHECK(back.kkt1 == fr.kkt1);
    CHECK(back.kkt2 == fr.kkt2);
    CHECK(back.estimation_end == fr.estimation_end);
    REQUIRE(back.vcov.has_value());
    CHECK(back.vcov->a == fr.vcov->a);
    // serialization is deterministic
    CHECK(fit_to_json(back) == json);
}

TEST_CASE("infeasible start values raise a start-value error") {
    MleProblem prob = quadratic_problem();
    prob.loglik_natural = [](const std::vector<double>&) {
        return -std::numeric_limits<double>::infinity();
    };
    OptimizerConfig cfg;
    CHECK_THROWS_AS(fit_generic(prob, cfg, OptimizerConfig::Method::quasi_newton, 10),
                    DomainError);
}
