#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "clv/bootstrap.hpp"
#include "clv/errors.hpp"
#include "clv/simulation.hpp"

using namespace clv;

namespace {

SimResult small_sim(std::uint64_t seed, std::size_t n = 600) {
    SimScenario sc;
    sc.n_customers = n;
    sc.params = PnbdParams{1.0, 0.5, 1.0, 0.5, {}, {}, {}};
    sc.estimation_length = 52.0;
    sc.holdout_length = 13.0;
    sc.seed = seed;
    return simulate_pnbd(sc);
}

}  // namespace

TEST_CASE("quantile definition: linear interpolation between order statistics") {
    std::vector<double> v;
    for (int i = 1; i <= 100; ++i) v.push_back(i);
    CHECK(sample_quantile(v, 0.05) == doctest::Approx(5.95).epsilon(1e-12));
    CHECK(sample_quantile(v, 0.95) == doctest::Approx(95.05).epsilon(1e-12));
    CHECK(sample_quantile({7.0, 7.0, 7.0}, 0.5) == 7.0);
}

TEST_CASE("ci table basics") {
    std::vector<std::vector<double>> constant(5, std::vector<double>{2.5, -1.0});
    auto rows = ci_table(constant, {0.05, 0.95});
    REQUIRE(rows.size() == 2);
    CHECK(rows[0].lower == 2.5);
    CHECK(rows[0].upper == 2.5);
    CHECK(rows[1].lower == -1.0);
    CHECK_THROWS_AS(ci_table({{1.0}}, {0.05, 0.95}), InputError);
    CHECK_THROWS_AS(ci_table(constant, {0.95, 0.05}), InputError);
}

TEST_CASE("identity resample reproduces the original fit") {
    SimResult sim = small_sim(41);
    OptimizerConfig cfg;
    cfg.compute_hessian = false;
    FitResult fit = fit_pnbd(sim.dataset, {}, cfg);

    BootstrapSpec spec;
    spec.num_boots = 1;
    spec.seed = 1;
    spec.sampler = [](const std::vector<std::string>& ids, std::uint64_t) { return ids; };
    auto outcome = bootstrap_apply(fit, sim.dataset, spec,
                                   [](const FitResult& fr, const ClvDataset&) {
                                       return std::vector<double>{fr.loglik};
                                   });
    CHECK(outcome.n_failed == 0);
    REQUIRE(outcome.outputs.size() == 1);
    CHECK(std::fabs(outcome.outputs[0][0] - fit.loglik) <
          1e-6 * (1.0 + std::fabs(fit.loglik)));
}

TEST_CASE("resampled datasets preserve the original periods and inputs") {
    SimResult sim = small_sim(43, 200);
    OptimizerConfig cfg;
    cfg.compute_hessian = false;
    FitResult fit = fit_pnbd(sim.dataset, {}, cfg);

    BootstrapSpec spec;
    spec.num_boots = 8;
    spec.seed = 99;
    auto outcome = bootstrap_apply(
        fit, sim.dataset, spec, [&](const FitResult&, const ClvDataset& bds) {
            // period preservation is exact
            if (bds.estimation_end != sim.dataset.estimation_end)
                throw std::runtime_error("estimation end moved");
            if (bds.estimation_start != sim.dataset.estimation_start)
                throw std::runtime_error("estimation start moved");
            if (bds.holdout_end != sim.dataset.holdout_end)
                throw std::runtime_error("holdout end moved");
            if (bds.summaries.size() != sim.dataset.summaries.size())
                throw std::runtime_error("sample size changed");
            // per-customer inputs identical to the source ids
            for (const auto& s : bds.summaries) {
                const std::string src_id = s.customer_id.substr(0, s.customer_id.find("#b"));
                const auto& src = sim.dataset.summary_for(src_id);
                if (s.x != src.x || s.t_x != src.t_x || s.big_t != src.big_t)
                    throw std::runtime_error("inputs changed");
            }
            return std::vector<double>{1.0};
        });
    CHECK(outcome.n_failed == 0);
    CHECK(outcome.outputs.size() == 8);
}

TEST_CASE("bootstrap parameter intervals bracket the point estimate") {
    SimResult sim = small_sim(47);
    OptimizerConfig cfg;
    cfg.compute_hessian = false;
    FitResult fit = fit_pnbd(sim.dataset, {}, cfg);

    BootstrapSpec spec;
    spec.num_boots = 30;
    spec.seed = 7;
    auto outcome = bootstrap_apply(fit, sim.dataset, spec,
                                   [](const FitResult& fr, const ClvDataset&) {
                                       return fr.params;
                                   });
    CHECK(outcome.n_failed + static_cast<int>(outcome.outputs.size()) == 30);
    REQUIRE(outcome.outputs.size() >= 25);
    auto rows = ci_table(outcome.outputs, {0.05, 0.95});
    REQUIRE(rows.size() == fit.params.size());
    for (std::size_t i = 0; i < rows.size(); ++i) {
        CHECK(rows[i].lower <= rows[i].upper);
        // the point estimate usually falls inside its own 90% interval
        CHECK(rows[i].lower < fit.params[i] * 1.5);
        CHECK(rows[i].upper > fit.params[i] * 0.5);
    }
}

TEST_CASE("seeded determinism of the bootstrap") {
    SimResult sim = small_sim(53, 300);
    OptimizerConfig cfg;
    cfg.compute_hessian = false;
    FitResult fit = fit_pnbd(sim.dataset, {}, cfg);
    BootstrapSpec spec;
    spec.num_boots = 4;
    spec.seed = 11;
    auto f = [](const FitResult& fr, const ClvDataset&) { return fr.params; };
    auto a = bootstrap_apply(fit, sim.dataset, spec, f);
    auto b = bootstrap_apply(fit, sim.dataset, spec, f);
    REQUIRE(a.outputs.size() == b.outputs.size());
    for (std::size_t i = 0; i < a.outputs.size(); ++i) CHECK(a.outputs[i] == b.outputs[i]);
}
