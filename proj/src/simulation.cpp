#include "clv/simulation.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include <json.hpp>

#include "clv/errors.hpp"
#include "clv/special_functions.hpp"
#include "clv/util.hpp"

namespace clv {

namespace {

// explicit samplers so simulated bytes do not depend on the standard library
struct Rng {
    std::mt19937_64 engine;

    explicit Rng(std::uint64_t seed) : engine(seed) {}

    double uniform() {  // in [0, 1)
        return (engine() >> 11) * 0x1.0p-53;
    }

    double exponential(double rate) { return -std::log1p(-uniform()) / rate; }

    double normal() {
        // polar method
        for (;;) {
            const double u = 2.0 * uniform() - 1.0;
            const double v = 2.0 * uniform() - 1.0;
            const double s = u * u + v * v;
            if (s > 0.0 && s < 1.0) return u * std::sqrt(-2.0 * std::log(s) / s);
        }
    }

    // Marsaglia-Tsang; rate parameterization (mean shape/rate)
    double gamma(double shape, double rate) {
        if (shape < 1.0) {
            const double u = uniform();
            return gamma(shape + 1.0, rate) * std::pow(u, 1.0 / shape);
        }
        const double d = shape - 1.0 / 3.0;
        const double c = 1.0 / std::sqrt(9.0 * d);
        for (;;) {
            double x, v;
            do {
                x = normal();
                v = 1.0 + c * x;
            } while (v <= 0.0);
            v = v * v * v;
            const double u = uniform();
            if (u < 1.0 - 0.0331 * x * x * x * x) return d * v / rate;
            if (std::log(u) < 0.5 * x * x + d * (1.0 - v + std::log(v))) return d * v / rate;
        }
    }
};

double season_value(int interval, int period) {
    return (interval % period) < period / 2 ? 1.0 : 0.0;
}

}  // namespace

SimResult simulate_pnbd(const SimScenario& sc) {
    if (sc.n_customers == 0) throw InputError("scenario needs at least one customer");
    if (!(sc.estimation_length > 0.0)) throw InputError("estimation length must be positive");
    if (!sc.params.positive()) throw DomainError("scenario parameters must be positive");
    if (sc.static_covariate && sc.dynamic_covariate)
        throw InputError("choose either a static or a dynamic scenario covariate");
    const bool has_cov = sc.static_covariate || sc.dynamic_covariate;
    if (has_cov &&
        (sc.params.gamma_trans.size() != 1 || sc.params.gamma_life.size() != 1))
        throw InputError("scenario covariate needs one coefficient per process");
    if (!has_cov && (!sc.params.gamma_trans.empty() || !sc.params.gamma_life.empty()))
        throw InputError("coefficients given but no scenario covariate enabled");

    const double total_len = sc.estimation_length + sc.holdout_length;
    const double spu = sc.time_unit.seconds_per_unit();
    const PnbdParams& p = sc.params;

    // Sarmanov feasibility is a property of the parameter point; reject the
    // scenario outright when the density is not a density.
    double mk = 0.0, accept_bound = 1.0;
    double c_lambda = 0.0, c_mu = 0.0;
    if (p.m && *p.m != 0.0) {
        c_lambda = std::expm1(p.r * std::log1p(1.0 / p.alpha));
        c_mu = std::expm1(p.s * std::log1p(1.0 / p.beta));
        const double k = std::exp(p.r * (std::log(p.alpha) - std::log1p(p.alpha)) +
                                  p.s * (std::log(p.beta) - std::log1p(p.beta)));
        mk = *p.m * k;
        const double worst =
            (*p.m > 0.0) ? -std::max(c_lambda, c_mu) : std::max(c_lambda * c_mu, 1.0);
        if (1.0 + mk * worst < 0.0)
            throw DomainError("Sarmanov parameter m makes the joint density negative");
        accept_bound = 1.0 + std::fabs(mk) * std::max(c_lambda, 1.0) * std::max(c_mu, 1.0);
    }

    SimResult out;
    out.log.reserve(sc.n_customers * 4);
    out.truth.resize(sc.n_customers);

    std::vector<std::vector<TransactionRecord>> per_customer(sc.n_customers);
    std::vector<double> cov_value(sc.n_customers, 0.0);

    parallel_for(sc.n_customers, [&](std::size_t i) {
        Rng rng(mix64(sc.seed ^ mix64(static_cast<std::uint64_t>(i) + 0x51ULL)));
        // latent rates; Sarmanov by rejection against the independent proposal
        double lam0, mu0;
        for (;;) {
            lam0 = rng.gamma(p.r, p.alpha);
            mu0 = rng.gamma(p.s, p.beta);
            if (mk == 0.0) break;
            const double dl = std::exp(p.r * std::log1p(1.0 / p.alpha) - lam0) - 1.0;
            const double dm = std::exp(p.s * std::log1p(1.0 / p.beta) - mu0) - 1.0;
            const double density_ratio = 1.0 + mk * dl * dm;
            if (rng.uniform() * accept_bound <= density_ratio) break;
        }
        double cov = 0.0;
        if (sc.static_covariate) cov = rng.uniform() < 0.5 ? 1.0 : 0.0;
        cov_value[i] = cov;

        // per-customer realized rates; dynamic paths modulate per interval
        auto phi_at = [&](double t) {
            if (sc.dynamic_covariate)
                return std::exp(p.gamma_trans[0] *
                                season_value(static_cast<int>(std::floor(t)), sc.season_period));
            if (sc.static_covariate) return std::exp(p.gamma_trans[0] * cov);
            return 1.0;
        };
        auto psi_at = [&](double t) {
            if (sc.dynamic_covariate)
                return std::exp(p.gamma_life[0] *
                                season_value(static_cast<int>(std::floor(t)), sc.season_period));
            if (sc.static_covariate) return std::exp(p.gamma_life[0] * cov);
            return 1.0;
        };
        // death time by inversion of the cumulative hazard mu0 * M(t);
        // piecewise-constant rates make the inversion exact
        auto invert_cum = [&](auto rate_at, double target, double start) {
            double t = start;
            double acc = 0.0;
            for (;;) {
                const double seg_end = std::floor(t) + 1.0;
                const double rate = rate_at(t);
                const double seg = (seg_end - t) * rate;
                if (acc + seg >= target) return t + (target - acc) / rate;
                acc += seg;
                t = seg_end;
                if (t > total_len + 1e4) return t;  // far beyond observation
            }
        };
        double omega;
        if (sc.dynamic_covariate) {
            omega = invert_cum(psi_at, rng.exponential(1.0) / mu0, 0.0);
        } else {
            omega = rng.exponential(mu0 * psi_at(0.0));
        }

        // transactions: first purchase at clock zero, then a Poisson process
        // with intensity lam0 * phi(t) until min(omega, total_len)
        const double horizon = std::min(omega, total_len);
        std::vector<double> times{0.0};
        double t = 0.0;
        if (sc.dynamic_covariate) {
            for (;;) {
                t = invert_cum(phi_at, rng.exponential(1.0) / lam0, t);
                if (t >= horizon) break;
                times.push_back(t);
            }
        } else {
            const double rate = lam0 * phi_at(0.0);
            for (;;) {
                t += rng.exponential(rate);
                if (t >= horizon) break;
                times.push_back(t);
            }
        }

        auto& recs = per_customer[i];
        recs.reserve(times.size());
        const std::string id = "c" + std::to_string(i + 1);
        for (double tu : times) {
            // second resolution keeps the embedded unit time essentially exact
            const Timestamp ts =
                sc.start_date + static_cast<Timestamp>(std::llround(tu * spu));
            recs.push_back({id, ts, {}});
        }
        out.truth[i] = {id, lam0, mu0, omega, omega > sc.estimation_length, cov};
    });

    for (auto& recs : per_customer)
        for (auto& r : recs) out.log.push_back(std::move(r));

    if (sc.gg) out.log = simulate_gg_spends(out.log, *sc.gg, mix64(sc.seed ^ 0xabcdef12345ULL));

    IngestOptions opt;
    opt.time_unit = sc.time_unit;
    opt.second_resolution = true;
    if (sc.holdout_length > 0.0) opt.estimation_split = sc.estimation_length;
    opt.data_end = sc.start_date +
                   static_cast<Timestamp>(std::llround(total_len * spu));
    ClvDataset ds = ingest(out.log, opt);

    if (sc.static_covariate) {
        std::vector<std::string> ids;
        std::vector<std::vector<std::string>> cols(1);
        for (std::size_t i = 0; i < sc.n_customers; ++i) {
            ids.push_back(out.truth[i].id);
            cols[0].push_back(cov_value[i] > 0.5 ? "1" : "0");
        }
        auto table = CovariateTable::from_columns(CovariateTable::Mode::static_cov, {"x1"},
                                                  ids, {}, cols);
        ds = attach_covariates(ds, table, table);
    } else if (sc.dynamic_covariate) {
        std::vector<std::string> ids;
        std::vector<Timestamp> dates;
        std::vector<std::vector<std::string>> cols(1);
        const int n_int = static_cast<int>(std::ceil(total_len)) + 1;
        for (std::size_t i = 0; i < sc.n_customers; ++i) {
            for (int k = 0; k < n_int; ++k) {
                ids.push_back(out.truth[i].id);
                dates.push_back(sc.start_date +
                                static_cast<Timestamp>(std::llround(k * spu)));
                cols[0].push_back(season_value(k, sc.season_period) > 0.5 ? "1" : "0");
            }
        }
        auto table = CovariateTable::from_columns(CovariateTable::Mode::dynamic_cov,
                                                  {"season"}, ids, dates, cols);
        ds = attach_covariates(ds, table, table);
    }
    out.dataset = std::move(ds);
    return out;
}

std::vector<TransactionRecord> simulate_gg_spends(const std::vector<TransactionRecord>& log,
                                                  const GgParams& gg, std::uint64_t seed) {
    if (!gg.positive()) throw DomainError("gamma-gamma parameters must be positive");
    std::vector<TransactionRecord> out = log;
    // group indices per customer so each gets one latent nu
    std::map<std::string, std::vector<std::size_t>> by_customer;
    for (std::size_t i = 0; i < out.size(); ++i)
        by_customer[out[i].customer_id].push_back(i);
    std::size_t cidx = 0;
    for (auto& [id, rows] : by_customer) {
        Rng rng(mix64(seed ^ mix64(cidx + 0x77ULL)));
        const double nu = rng.gamma(gg.q, gg.gamma);
        for (std::size_t idx : rows) out[idx].price = rng.gamma(gg.p, nu);
        ++cidx;
    }
    return out;
}

namespace {

struct PosteriorGrid {
    std::vector<double> lam, mu, weight, alive_prob;
    double ess = 0.0;
};

// posterior over (lambda, mu) and the conditional alive probability, built on
// the recency-scaled product grid
PosteriorGrid standard_posterior(const PnbdParams& p, double alpha_i, double beta_i, double x,
                                 double t_x, double big_t, int order) {
    PosteriorGrid grid;
    const QuadratureRule ru = gauss_laguerre_generalized(order, p.r + x - 1.0);
    const QuadratureRule rv = gauss_laguerre_generalized(order, p.s - 1.0);
    const double su = alpha_i + t_x;
    const double sv = beta_i + t_x;
    const double delta_t = big_t - t_x;
    std::vector<double> logw;
    logw.reserve(static_cast<std::size_t>(order) * order);
    grid.lam.reserve(logw.capacity());
    grid.mu.reserve(logw.capacity());
    grid.alive_prob.reserve(logw.capacity());
    for (int i = 0; i < order; ++i) {
        const double lam = ru.nodes[i] / su;
        for (int j = 0; j < order; ++j) {
            const double mu = rv.nodes[j] / sv;
            const double sum = lam + mu;
            const double e = std::exp(-sum * delta_t);
            const double h = (mu + lam * e) / sum;
            grid.lam.push_back(lam);
            grid.mu.push_back(mu);
            // alive component of the conditional likelihood is lam^x e^{-sum T},
            // i.e. a share of sum * e / (mu + lam e) of the whole bracket
            grid.alive_prob.push_back(sum * e / (mu + lam * e));
            logw.push_back(ru.log_weights[i] + rv.log_weights[j] + std::log(h));
        }
    }
    const double norm = log_sum_exp(logw);
    grid.weight.resize(logw.size());
    double sq = 0.0;
    for (std::size_t k = 0; k < logw.size(); ++k) {
        grid.weight[k] = std::exp(logw[k] - norm);
        sq += grid.weight[k] * grid.weight[k];
    }
    grid.ess = 1.0 / sq;
    return grid;
}

std::size_t sample_index(const std::vector<double>& weights, double u) {
    double acc = 0.0;
    for (std::size_t i = 0; i < weights.size(); ++i) {
        acc += weights[i];
        if (u <= acc) return i;
    }
    return weights.size() - 1;
}

}  // namespace

ContinuationResult continue_paths(const PnbdParams& p, const CustomerSummary& cs,
                                  double horizon, int n_paths, double discount_rate,
                                  std::uint64_t seed, const std::vector<double>& cov_trans,
                                  const std::vector<double>& cov_life) {
    if (n_paths < 1000) throw InputError("continuation needs at least 1000 paths");
    if (horizon < 0.0) throw DomainError("horizon must be nonnegative");
    const double alpha_i = p.alpha * covariate_scale(p.gamma_trans, cov_trans);
    const double beta_i = p.beta * covariate_scale(p.gamma_life, cov_life);
    if (p.m && *p.m != 0.0)
        throw CapabilityError("Monte Carlo continuation covers the uncorrelated model");

    const PosteriorGrid grid =
        standard_posterior(p, alpha_i, beta_i, cs.x, cs.t_x, cs.big_t, 96);

    ContinuationResult res;
    res.ess = grid.ess;
    res.degenerate = grid.ess < 50.0;
    if (horizon == 0.0) return res;

    double sum_c = 0.0, sum_c2 = 0.0, sum_d = 0.0, sum_d2 = 0.0;
    Rng rng(mix64(seed ^ 0x5eedULL));
    for (int path = 0; path < n_paths; ++path) {
        const std::size_t idx = sample_index(grid.weight, rng.uniform());
        double count = 0.0, disc = 0.0;
        if (rng.uniform() < grid.alive_prob[idx]) {
            const double lam = grid.lam[idx];
            const double mu = grid.mu[idx];
            const double life = rng.exponential(mu);
            const double end = std::min(life, horizon);
            double t = rng.exponential(lam);
            while (t < end) {
                count += 1.0;
                disc += std::exp(-discount_rate * t);
                t += rng.exponential(lam);
            }
        }
        sum_c += count;
        sum_c2 += count * count;
        sum_d += disc;
        sum_d2 += disc * disc;
    }
    const double n = static_cast<double>(n_paths);
    res.mean_count = sum_c / n;
    res.se_count = std::sqrt(std::max(0.0, sum_c2 / n - res.mean_count * res.mean_count) / n);
    res.mean_discounted = sum_d / n;
    res.se_discounted =
        std::sqrt(std::max(0.0, sum_d2 / n - res.mean_discounted * res.mean_discounted) / n);
    return res;
}

ContinuationResult continue_paths_dynamic(const PnbdParams& p, const DynCustomer& c,
                                          double horizon, int n_paths, double discount_rate,
                                          std::uint64_t seed) {
    if (n_paths < 1000) throw InputError("continuation needs at least 1000 paths");
    if (c.path.coverage_end() < c.big_t + horizon - 1e-9)
        throw CoverageError("covariate path does not cover the continuation horizon");

    // posterior over the grid (reuse the likelihood machinery)
    const int order = 96;
    struct Node {
        double lam, mu, w, alive;
    };
    std::vector<Node> nodes;
    {
        const QuadratureRule ru = gauss_laguerre_generalized(order, p.r + c.x - 1.0);
        const QuadratureRule rv = gauss_laguerre_generalized(order, p.s - 1.0);
        const double lam_tx = capital_lambda(c.path, p.gamma_trans, 0.0, c.t_x);
        const double mu_tx = capital_m(c.path, p.gamma_life, c.t_x);
        const double lam_T = capital_lambda(c.path, p.gamma_trans, 0.0, c.big_t);
        const double mu_T = capital_m(c.path, p.gamma_life, c.big_t);
        const double su = p.alpha + lam_tx;
        const double sv = p.beta + mu_tx;
        double log_p = 0.0;
        for (std::size_t d = 0; d < p.gamma_trans.size(); ++d)
            log_p += p.gamma_trans[d] * c.sum_cov_at_times[d];
        std::vector<double> logw;
        for (int i = 0; i < order; ++i) {
            const double lam0 = ru.nodes[i] / su;
            for (int j = 0; j < order; ++j) {
                const double mu0 = rv.nodes[j] / sv;
                // log(bracket) after factoring lambda^x P e^{-lam Ltx - mu Mtx}
                const double log_bracket =
                    pnbd_dynamic_conditional_loglik(p, c, lam0, mu0) - log_p -
                    (c.x * std::log(lam0) - lam0 * lam_tx - mu0 * mu_tx);
                const double log_alive_rest =
                    -lam0 * (lam_T - lam_tx) - mu0 * (mu_T - mu_tx);
                logw.push_back(ru.log_weights[i] + rv.log_weights[j] + log_bracket);
                nodes.push_back({lam0, mu0, 0.0, std::exp(log_alive_rest - log_bracket)});
            }
        }
        const double norm = log_sum_exp(logw);
        for (std::size_t k = 0; k < nodes.size(); ++k)
            nodes[k].w = std::exp(logw[k] - norm);
    }

    ContinuationResult res;
    double sq = 0.0;
    for (const auto& nd : nodes) sq += nd.w * nd.w;
    res.ess = 1.0 / sq;
    res.degenerate = res.ess < 50.0;
    if (horizon == 0.0) return res;

    std::vector<double> weights(nodes.size());
    for (std::size_t k = 0; k < nodes.size(); ++k) weights[k] = nodes[k].w;

    double sum_c = 0.0, sum_c2 = 0.0, sum_d = 0.0, sum_d2 = 0.0;
    Rng rng(mix64(seed ^ 0xd15eedULL));
    for (int path = 0; path < n_paths; ++path) {
        const std::size_t idx = sample_index(weights, rng.uniform());
        double count = 0.0, disc = 0.0;
        if (rng.uniform() < std::min(1.0, nodes[idx].alive)) {
            const double lam0 = nodes[idx].lam;
            const double mu0 = nodes[idx].mu;
            // residual life by inversion of mu0 * (M(T + u) - M(T))
            const double e_target = rng.exponential(1.0) / mu0;
            double lo = 0.0, hi = horizon;
            const double m_T = capital_m(c.path, p.gamma_life, c.big_t);
            auto m_rel = [&](double u) {
                return capital_m(c.path, p.gamma_life, c.big_t + u) - m_T;
            };
            double life;
            if (e_target >= m_rel(horizon)) {
                life = horizon;  // survives the window
            } else {
                for (int it = 0; it < 60; ++it) {
                    const double mid = 0.5 * (lo + hi);
                    (m_rel(mid) < e_target ? lo : hi) = mid;
                }
                life = 0.5 * (lo + hi);
            }
            // purchases by time rescaling of lam0 * Lambda
            const double lam_T = capital_lambda(c.path, p.gamma_trans, 0.0, c.big_t);
            auto l_rel = [&](double u) {
                return capital_lambda(c.path, p.gamma_trans, 0.0, c.big_t + u) - lam_T;
            };
            double acc = rng.exponential(1.0) / lam0;
            const double l_end = l_rel(life);
            while (acc < l_end) {
                double a = 0.0, b = life;
                for (int it = 0; it < 60; ++it) {
                    const double mid = 0.5 * (a + b);
                    (l_rel(mid) < acc ? a : b) = mid;
                }
                const double tu = 0.5 * (a + b);
                count += 1.0;
                disc += std::exp(-discount_rate * tu);
                acc += rng.exponential(1.0) / lam0;
            }
        }
        sum_c += count;
        sum_c2 += count * count;
        sum_d += disc;
        sum_d2 += disc * disc;
    }
    const double n = static_cast<double>(n_paths);
    res.mean_count = sum_c / n;
    res.se_count = std::sqrt(std::max(0.0, sum_c2 / n - res.mean_count * res.mean_count) / n);
    res.mean_discounted = sum_d / n;
    res.se_discounted =
        std::sqrt(std::max(0.0, sum_d2 / n - res.mean_discounted * res.mean_discounted) / n);
    return res;
}

SimScenario scenario_from_json(const std::string& text) {
    nlohmann::json j = nlohmann::json::parse(text);
    SimScenario sc;
    sc.n_customers = j.at("n_customers").get<std::size_t>();
    sc.params.r = j.at("r").get<double>();
    sc.params.alpha = j.at("alpha").get<double>();
    sc.params.s = j.at("s").get<double>();
    sc.params.beta = j.at("beta").get<double>();
    if (j.contains("m")) sc.params.m = j["m"].get<double>();
    if (j.contains("gamma_trans"))
        sc.params.gamma_trans = j["gamma_trans"].get<std::vector<double>>();
    if (j.contains("gamma_life"))
        sc.params.gamma_life = j["gamma_life"].get<std::vector<double>>();
    if (j.contains("gg")) {
        sc.gg = GgParams{j["gg"].at("p").get<double>(), j["gg"].at("q").get<double>(),
                         j["gg"].at("gamma").get<double>()};
    }
    sc.estimation_length = j.at("estimation_length").get<double>();
    if (j.contains("holdout_length")) sc.holdout_length = j["holdout_length"].get<double>();
    if (j.contains("time_unit")) sc.time_unit = TimeUnit::parse(j["time_unit"].get<std::string>());
    sc.seed = j.at("seed").get<std::uint64_t>();
    if (j.contains("static_covariate")) sc.static_covariate = j["static_covariate"].get<bool>();
    if (j.contains("dynamic_covariate"))
        sc.dynamic_covariate = j["dynamic_covariate"].get<bool>();
    if (j.contains("season_period")) sc.season_period = j["season_period"].get<int>();
    if (j.contains("start_date"))
        sc.start_date = parse_date(j["start_date"].get<std::string>(), "ymd");
    return sc;
}

std::string scenario_to_json(const SimScenario& sc) {
    nlohmann::json j;
    j["n_customers"] = sc.n_customers;
    j["r"] = sc.params.r;
    j["alpha"] = sc.params.alpha;
    j["s"] = sc.params.s;
    j["beta"] = sc.params.beta;
    if (sc.params.m) j["m"] = *sc.params.m;
    if (!sc.params.gamma_trans.empty()) j["gamma_trans"] = sc.params.gamma_trans;
    if (!sc.params.gamma_life.empty()) j["gamma_life"] = sc.params.gamma_life;
    if (sc.gg) j["gg"] = {{"p", sc.gg->p}, {"q", sc.gg->q}, {"gamma", sc.gg->gamma}};
    j["estimation_length"] = sc.estimation_length;
    j["holdout_length"] = sc.holdout_length;
    j["time_unit"] = sc.time_unit.name();
    j["seed"] = sc.seed;
    j["static_covariate"] = sc.static_covariate;
    j["dynamic_covariate"] = sc.dynamic_covariate;
    j["season_period"] = sc.season_period;
    j["start_date"] = format_date(sc.start_date);
    return j.dump(2);
}

}  // namespace clv
