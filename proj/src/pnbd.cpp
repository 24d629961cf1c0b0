#include "clv/pnbd.hpp"

#include <cmath>
#include <unordered_map>

#include "clv/errors.hpp"
#include "clv/special_functions.hpp"
#include "clv/util.hpp"

namespace clv {

double power_diff_ratio(double b1, double b2, double s) {
    const double L = std::log(b2 / b1);
    const double one_m_s = 1.0 - s;
    if (std::fabs(one_m_s) < 1e-12) return L * std::pow(b1, one_m_s);
    return std::pow(b1, one_m_s) * std::expm1(one_m_s * L) / one_m_s;
}

double covariate_scale(const std::vector<double>& gamma, const std::vector<double>& x) {
    if (gamma.empty()) return 1.0;
    if (gamma.size() != x.size())
        throw InputError("covariate vector length does not match coefficient count");
    double dot = 0.0;
    for (std::size_t i = 0; i < gamma.size(); ++i) dot += gamma[i] * x[i];
    return std::exp(-dot);
}

double pnbd_loglik_at(double r, double alpha_i, double s, double beta_i, double x, double t_x,
                      double big_t) {
    const double rsx = r + s + x;
    const double hi = std::max(alpha_i, beta_i);
    // A1 at recency, A2 at the period end; branch mirroring keeps z in [0, 1)
    const double z1 = (alpha_i - beta_i) / (hi + t_x) * (alpha_i >= beta_i ? 1.0 : -1.0);
    const double z2 = (alpha_i - beta_i) / (hi + big_t) * (alpha_i >= beta_i ? 1.0 : -1.0);
    // z rounds to 1 when min(alpha, beta) underflows against max(alpha, beta):
    // the likelihood limit there is zero
    if (!(z1 < 1.0) || !(z2 < 1.0)) return kNegInf;
    double b1, b2;
    if (alpha_i >= beta_i) {
        b1 = s + 1.0;
        b2 = s;
    } else {
        b1 = r + x;
        b2 = r + x + 1.0;
    }
    const double log_a1 =
        log_gauss_2f1(rsx, b1, rsx + 1.0, z1).log_abs - rsx * std::log(hi + t_x);
    const double log_a2 =
        log_gauss_2f1(rsx, b2, rsx + 1.0, z2).log_abs - rsx * std::log(hi + big_t);
    const double log_mix = log_add(std::log(s) + log_a1, std::log(r + x) + log_a2) -
                           std::log(rsx);
    return std::lgamma(r + x) - std::lgamma(r) + r * std::log(alpha_i) + s * std::log(beta_i) +
           log_mix;
}

double pnbd_loglik_customer(const PnbdParams& p, const CustomerSummary& cs,
                            const std::vector<double>& cov_trans,
                            const std::vector<double>& cov_life) {
    if (!p.positive()) throw DomainError("pnbd parameters must be positive");
    const double alpha_i = p.alpha * covariate_scale(p.gamma_trans, cov_trans);
    const double beta_i = p.beta * covariate_scale(p.gamma_life, cov_life);
    const double ll = pnbd_loglik_at(p.r, alpha_i, p.s, beta_i, cs.x, cs.t_x, cs.big_t);
    if (!std::isfinite(ll))
        throw NumericalError("non-finite log-likelihood for customer '" + cs.customer_id + "'");
    return ll;
}

namespace {

double sarmanov_k(double alpha_i, double beta_i, double r, double s) {
    return std::exp(r * (std::log(alpha_i) - std::log1p(alpha_i)) +
                    s * (std::log(beta_i) - std::log1p(beta_i)));
}

// per-customer log-likelihood with the Sarmanov four-corner combination;
// returns -inf when the combined likelihood is not positive
double loglik_customer_correlated(const PnbdParams& p, double alpha_i, double beta_i, double x,
                                  double t_x, double big_t) {
    const double m = *p.m;
    const double ll_ab = pnbd_loglik_at(p.r, alpha_i, p.s, beta_i, x, t_x, big_t);
    if (m == 0.0) return ll_ab;
    const double ll_a1b = pnbd_loglik_at(p.r, alpha_i + 1.0, p.s, beta_i, x, t_x, big_t);
    const double ll_ab1 = pnbd_loglik_at(p.r, alpha_i, p.s, beta_i + 1.0, x, t_x, big_t);
    const double ll_a1b1 = pnbd_loglik_at(p.r, alpha_i + 1.0, p.s, beta_i + 1.0, x, t_x, big_t);
    const double k = sarmanov_k(alpha_i, beta_i, p.r, p.s);
    const double top = std::max(std::max(ll_ab, ll_a1b), std::max(ll_ab1, ll_a1b1));
    const double combined =
        std::exp(ll_ab - top) +
        m * k * (std::exp(ll_a1b1 - top) - std::exp(ll_a1b - top) - std::exp(ll_ab1 - top) +
                 std::exp(ll_ab - top));
    if (!(combined > 0.0)) return kNegInf;
    return top + std::log(combined);
}

}  // namespace

std::vector<PnbdCell> pnbd_compile_cells(const ClvDataset& ds) {
    const bool static_covs =
        ds.cov_trans && ds.cov_trans->mode == CovariateTable::Mode::static_cov;
    std::unordered_map<std::string, std::size_t> index;
    std::vector<PnbdCell> cells;
    for (const auto& cs : ds.summaries) {
        std::vector<double> ct, cl;
        if (static_covs) {
            ct = ds.cov_trans->static_rows.at(cs.customer_id);
            cl = ds.cov_life->static_rows.at(cs.customer_id);
        }
        std::string key = std::to_string(cs.x) + '|' + std::to_string(cs.t_x) + '|' +
                          std::to_string(cs.big_t);
        for (double v : ct) key += '|' + std::to_string(v);
        key += '#';
        for (double v : cl) key += '|' + std::to_string(v);
        auto [it, inserted] = index.emplace(key, cells.size());
        if (inserted) {
            cells.push_back({static_cast<double>(cs.x), cs.t_x, cs.big_t, std::move(ct),
                             std::move(cl), 1.0});
        } else {
            cells[it->second].weight += 1.0;
        }
    }
    return cells;
}

double pnbd_loglik_cells(const PnbdParams& p, const std::vector<PnbdCell>& cells,
                         const ModelOptions& opts) {
    if (!p.positive()) return kNegInf;
    if (opts.use_correlation && !p.m)
        throw InputError("correlation requested but no Sarmanov parameter present");
    std::vector<double> terms(cells.size());
    const bool correlated = opts.use_correlation && p.m;
    parallel_for(cells.size(), [&](std::size_t i) {
        const PnbdCell& c = cells[i];
        const double alpha_i = p.alpha * covariate_scale(p.gamma_trans, c.cov_trans);
        const double beta_i = p.beta * covariate_scale(p.gamma_life, c.cov_life);
        const double ll =
            correlated
                ? loglik_customer_correlated(p, alpha_i, beta_i, c.x, c.t_x, c.big_t)
                : pnbd_loglik_at(p.r, alpha_i, p.s, beta_i, c.x, c.t_x, c.big_t);
        terms[i] = c.weight * ll;
    });
    double total = pairwise_sum(terms);
    if (!std::isfinite(total)) return kNegInf;
    if (opts.reg_lambdas) {
        double pen = 0.0;
        for (double g : p.gamma_trans) pen += opts.reg_lambdas->first * g * g;
        for (double g : p.gamma_life) pen += opts.reg_lambdas->second * g * g;
        total -= pen;
    }
    return total;
}

double pnbd_loglik_total(const PnbdParams& p, const ClvDataset& ds, const ModelOptions& opts) {
    if (ds.cov_trans && ds.cov_trans->mode == CovariateTable::Mode::dynamic_cov)
        throw CapabilityError(
            "dynamic covariates require the time-varying likelihood (pnbd_dynamic)");
    if ((ds.cov_trans && p.gamma_trans.size() != ds.cov_trans->names.size()) ||
        (!ds.cov_trans && !p.gamma_trans.empty()))
        throw InputError("transaction coefficient count does not match covariate columns");
    if ((ds.cov_life && p.gamma_life.size() != ds.cov_life->names.size()) ||
        (!ds.cov_life && !p.gamma_life.empty()))
        throw InputError("attrition coefficient count does not match covariate columns");
    return pnbd_loglik_cells(p, pnbd_compile_cells(ds), opts);
}

double sarmanov_correlation(const PnbdParams& p) {
    if (!p.m) throw CapabilityError("model carries no correlation parameter");
    const double k = sarmanov_k(p.alpha, p.beta, p.r, p.s);
    return *p.m * std::sqrt(p.r) / (1.0 + p.alpha) * std::sqrt(p.s) / (1.0 + p.beta) * k;
}

double sarmanov_feasible_bound(const PnbdParams& p) {
    if (!p.m) throw CapabilityError("model carries no correlation parameter");
    const double c_lambda = std::expm1(p.r * std::log1p(1.0 / p.alpha));
    const double c_mu = std::expm1(p.s * std::log1p(1.0 / p.beta));
    const double k = sarmanov_k(p.alpha, p.beta, p.r, p.s);
    if (*p.m >= 0.0) return 1.0 / (k * std::max(c_lambda, c_mu));
    return 1.0 / (k * std::max(c_lambda * c_mu, 1.0));
}

namespace {

// log of the alive-branch marginal: Int lam^x e^{-(lam+mu)T} g(lam) g(mu)
double log_alive_numerator(double r, double a, double s, double b, double x, double big_t) {
    return std::lgamma(r + x) - std::lgamma(r) + r * std::log(a) + s * std::log(b) -
           (r + x) * std::log(a + big_t) - s * std::log(b + big_t);
}

double log_cet_numerator(double r, double a, double s, double b, double x, double big_t,
                         double horizon) {
    const double diff = power_diff_ratio(b + big_t, b + big_t + horizon, s);
    return std::lgamma(r + x + 1.0) - std::lgamma(r) + r * std::log(a) + s * std::log(b) -
           (r + x + 1.0) * std::log(a + big_t) + std::log(diff);
}

double log_dert_numerator(double r, double a, double s, double b, double x, double big_t,
                          double delta) {
    const double z = delta * (b + big_t);
    const double en = expint_en(s, z);
    if (en <= 0.0) return kNegInf;
    return std::lgamma(r + x + 1.0) - std::lgamma(r) + r * std::log(a) + s * std::log(b) -
           (r + x + 1.0) * std::log(a + big_t) + z + (1.0 - s) * std::log(b + big_t) +
           std::log(en);
}

// posterior ratio numerator/likelihood with the optional Sarmanov combination;
// num(a, b) must return the log numerator at shifted scale parameters
template <typename NumFn>
double posterior_ratio(const PnbdParams& p, double alpha_i, double beta_i, double x, double t_x,
                       double big_t, NumFn num) {
    const double ll = pnbd_loglik_at(p.r, alpha_i, p.s, beta_i, x, t_x, big_t);
    if (!p.m || *p.m == 0.0) return std::exp(num(alpha_i, beta_i) - ll);
    const double m = *p.m;
    const double k = sarmanov_k(alpha_i, beta_i, p.r, p.s);
    const double n_ab = num(alpha_i, beta_i);
    const double n_a1b = num(alpha_i + 1.0, beta_i);
    const double n_ab1 = num(alpha_i, beta_i + 1.0);
    const double n_a1b1 = num(alpha_i + 1.0, beta_i + 1.0);
    const double l_ab = ll;
    const double l_a1b = pnbd_loglik_at(p.r, alpha_i + 1.0, p.s, beta_i, x, t_x, big_t);
    const double l_ab1 = pnbd_loglik_at(p.r, alpha_i, p.s, beta_i + 1.0, x, t_x, big_t);
    const double l_a1b1 = pnbd_loglik_at(p.r, alpha_i + 1.0, p.s, beta_i + 1.0, x, t_x, big_t);
    const double top_n = std::max(std::max(n_ab, n_a1b), std::max(n_ab1, n_a1b1));
    const double top_l = std::max(std::max(l_ab, l_a1b), std::max(l_ab1, l_a1b1));
    const double numv =
        std::exp(n_ab - top_n) + m * k * (std::exp(n_a1b1 - top_n) - std::exp(n_a1b - top_n) -
                                          std::exp(n_ab1 - top_n) + std::exp(n_ab - top_n));
    const double denv =
        std::exp(l_ab - top_l) + m * k * (std::exp(l_a1b1 - top_l) - std::exp(l_a1b - top_l) -
                                          std::exp(l_ab1 - top_l) + std::exp(l_ab - top_l));
    if (!(denv > 0.0) || !(numv >= 0.0))
        throw NumericalError("infeasible Sarmanov parameter in prediction");
    if (numv == 0.0) return 0.0;
    return std::exp(top_n - top_l) * numv / denv;
}

}  // namespace

double pnbd_palive(const PnbdParams& p, const CustomerSummary& cs,
                   const std::vector<double>& cov_trans, const std::vector<double>& cov_life) {
    if (!p.positive()) throw DomainError("pnbd parameters must be positive");
    const double alpha_i = p.alpha * covariate_scale(p.gamma_trans, cov_trans);
    const double beta_i = p.beta * covariate_scale(p.gamma_life, cov_life);
    const double x = cs.x;
    const double v = posterior_ratio(p, alpha_i, beta_i, x, cs.t_x, cs.big_t,
                                     [&](double a, double b) {
                                         return log_alive_numerator(p.r, a, p.s, b, x, cs.big_t);
                                     });
    return std::min(1.0, std::max(0.0, v));
}

double pnbd_cet(const PnbdParams& p, const CustomerSummary& cs, double horizon,
                const std::vector<double>& cov_trans, const std::vector<double>& cov_life) {
    if (horizon < 0.0) throw DomainError("prediction horizon must be nonnegative");
    if (horizon == 0.0) return 0.0;
    const double alpha_i = p.alpha * covariate_scale(p.gamma_trans, cov_trans);
    const double beta_i = p.beta * covariate_scale(p.gamma_life, cov_life);
    const double x = cs.x;
    return posterior_ratio(p, alpha_i, beta_i, x, cs.t_x, cs.big_t, [&](double a, double b) {
        return log_cet_numerator(p.r, a, p.s, b, x, cs.big_t, horizon);
    });
}

double pnbd_dert(const PnbdParams& p, const CustomerSummary& cs, double discount_rate,
                 const std::vector<double>& cov_trans, const std::vector<double>& cov_life) {
    if (!(discount_rate > 0.0))
        throw DomainError("DERT needs a positive discount rate (infinite horizon otherwise)");
    const double alpha_i = p.alpha * covariate_scale(p.gamma_trans, cov_trans);
    const double beta_i = p.beta * covariate_scale(p.gamma_life, cov_life);
    const double x = cs.x;
    return posterior_ratio(p, alpha_i, beta_i, x, cs.t_x, cs.big_t, [&](double a, double b) {
        return log_dert_numerator(p.r, a, p.s, b, x, cs.big_t, discount_rate);
    });
}

double pnbd_unconditional_expectation(const PnbdParams& p, double t,
                                      const std::vector<double>& cov_trans,
                                      const std::vector<double>& cov_life) {
    if (t < 0.0) throw DomainError("time must be nonnegative");
    if (t == 0.0) return 0.0;
    const double alpha_i = p.alpha * covariate_scale(p.gamma_trans, cov_trans);
    const double beta_i = p.beta * covariate_scale(p.gamma_life, cov_life);
    // E[X(t)] = (r/alpha) beta^s [(beta)^{1-s} - (beta+t)^{1-s}] / (s-1)
    return p.r / alpha_i * std::pow(beta_i, p.s) * power_diff_ratio(beta_i, beta_i + t, p.s);
}

namespace {

const LegendreRule& panel_rule() {
    static const LegendreRule rule = gauss_legendre(24);
    return rule;
}

// geometric mesh over [0, t] resolving structure near zero at scale
// min(alpha, beta, t)/64
std::vector<double> death_mesh(double alpha_i, double beta_i, double t) {
    std::vector<double> pts{0.0, std::min(std::min(alpha_i, beta_i), t) / 64.0};
    while (pts.back() < t) pts.push_back(std::min(t, pts.back() * 2.0));
    return pts;
}

}  // namespace

std::vector<double> pnbd_pmf_row(const PnbdParams& p, double t, int x_max,
                                 const std::vector<double>& cov_trans,
                                 const std::vector<double>& cov_life) {
    if (!(t > 0.0)) throw DomainError("pmf requires t > 0");
    if (x_max < 0) throw DomainError("pmf requires x >= 0");
    const double alpha_i = p.alpha * covariate_scale(p.gamma_trans, cov_trans);
    const double beta_i = p.beta * covariate_scale(p.gamma_life, cov_life);
    const double r = p.r, s = p.s;

    std::vector<double> pmf(x_max + 1, 0.0);
    // alive at t: NB(k; r, alpha, t) * (beta/(beta+t))^s
    {
        const double surv = std::exp(s * (std::log(beta_i) - std::log(beta_i + t)));
        double log_nb = r * (std::log(alpha_i) - std::log(alpha_i + t));  // k = 0
        const double log_tt = std::log(t) - std::log(alpha_i + t);
        for (int k = 0; k <= x_max; ++k) {
            pmf[k] += std::exp(log_nb) * surv;
            log_nb += std::log((r + k) / (k + 1.0)) + log_tt;
        }
    }
    // died in (0, t]: Int_0^t NB(k; r, alpha, w) s beta^s/(beta+w)^{s+1} dw
    const auto& rule = panel_rule();
    const auto mesh = death_mesh(alpha_i, beta_i, t);
    for (std::size_t seg = 0; seg + 1 < mesh.size(); ++seg) {
        const double mid = 0.5 * (mesh[seg] + mesh[seg + 1]);
        const double half = 0.5 * (mesh[seg + 1] - mesh[seg]);
        for (int q = 0; q < static_cast<int>(rule.nodes.size()); ++q) {
            const double w = mid + half * rule.nodes[q];
            if (!(w > 0.0)) continue;
            const double quad_w = half * rule.weights[q];
            const double death_density =
                std::exp(std::log(s) + s * std::log(beta_i) - (s + 1.0) * std::log(beta_i + w));
            double log_nb = r * (std::log(alpha_i) - std::log(alpha_i + w));
            const double log_ww = std::log(w) - std::log(alpha_i + w);
            for (int k = 0; k <= x_max; ++k) {
                pmf[k] += quad_w * std::exp(log_nb) * death_density;
                log_nb += std::log((r + k) / (k + 1.0)) + log_ww;
            }
        }
    }
    return pmf;
}

double pnbd_pmf(const PnbdParams& p, double t, int x, const std::vector<double>& cov_trans,
                const std::vector<double>& cov_life) {
    return pnbd_pmf_row(p, t, x, cov_trans, cov_life)[x];
}

std::vector<double> static_cov_row(const ClvDataset& ds, const std::string& customer_id,
                                   bool trans_process) {
    const auto& table = trans_process ? ds.cov_trans : ds.cov_life;
    if (!table) return {};
    if (table->mode != CovariateTable::Mode::static_cov)
        throw CapabilityError("customer carries dynamic covariates; use the dynamic model");
    auto it = table->static_rows.find(customer_id);
    if (it == table->static_rows.end())
        throw InputError("no covariate row for customer '" + customer_id + "'");
    return it->second;
}

}  // namespace clv
