#include "clv/pnbd_dynamic.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include "clv/errors.hpp"
#include "clv/special_functions.hpp"
#include "clv/util.hpp"

namespace clv {

int CovariatePath::interval_of(double u) const {
    const int k = static_cast<int>(std::floor((u - offset) / interval_length));
    if (k < 0 || k >= static_cast<int>(values_trans.size()))
        throw CoverageError("time " + std::to_string(u) + " lies outside covariate coverage");
    return k;
}

namespace {

double dot(const std::vector<double>& a, const std::vector<double>& b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

double piecewise_integral(const CovariatePath& path, const std::vector<double>& gamma,
                          bool trans_process, double s1, double s2) {
    if (s2 < s1) throw DomainError("integration bounds out of order");
    if (s1 == s2) return 0.0;
    if (s1 < path.offset - 1e-9 || s2 > path.coverage_end() + 1e-9)
        throw CoverageError("integration range [" + std::to_string(s1) + ", " +
                            std::to_string(s2) + "] exceeds covariate coverage [" +
                            std::to_string(path.offset) + ", " +
                            std::to_string(path.coverage_end()) + "]");
    const auto& values = trans_process ? path.values_trans : path.values_life;
    const double len = path.interval_length;
    double total = 0.0;
    int k = static_cast<int>(std::floor((s1 - path.offset) / len));
    k = std::max(0, k);
    double pos = s1;
    while (pos < s2 - 1e-15 && k < static_cast<int>(values.size())) {
        const double seg_end = std::min(s2, path.offset + (k + 1) * len);
        if (seg_end > pos)
            total += (seg_end - pos) * std::exp(gamma.empty() ? 0.0 : dot(gamma, values[k]));
        pos = seg_end;
        ++k;
    }
    return total;
}

}  // namespace

double capital_lambda(const CovariatePath& path, const std::vector<double>& gamma_trans,
                      double s1, double s2) {
    return piecewise_integral(path, gamma_trans, true, s1, s2);
}

double capital_m(const CovariatePath& path, const std::vector<double>& gamma_life,
                 double omega) {
    return piecewise_integral(path, gamma_life, false, 0.0, omega);
}

namespace {

CovariatePath build_path(const ClvDataset& ds, const std::string& id, Timestamp first_date) {
    const auto& trans = ds.cov_trans->dynamic_rows.at(id);
    const auto& life = ds.cov_life->dynamic_rows.at(id);
    if (trans.starts.size() != life.starts.size() || trans.starts.front() != life.starts.front())
        throw CoverageError("attrition/transaction covariate grids differ for customer '" +
                            id + "'");
    CovariatePath path;
    path.interval_length = 1.0;
    // first interval at or before the first purchase
    std::size_t k0 = 0;
    while (k0 + 1 < trans.starts.size() && trans.starts[k0 + 1] <= first_date) ++k0;
    if (trans.starts[k0] > first_date)
        throw CoverageError("covariates for customer '" + id +
                            "' begin after the first purchase");
    path.offset = ds.to_units(first_date, trans.starts[k0]);  // <= 0
    for (std::size_t k = k0; k < trans.starts.size(); ++k) {
        path.values_trans.push_back(trans.values[k]);
        path.values_life.push_back(life.values[k]);
    }
    return path;
}

}  // namespace

DynCustomer compile_dynamic_customer(const ClvDataset& ds, const std::string& customer_id) {
    if (!ds.cov_trans || ds.cov_trans->mode != CovariateTable::Mode::dynamic_cov)
        throw CapabilityError("dataset carries no dynamic covariates");
    const CustomerSummary& cs = ds.summary_for(customer_id);
    DynCustomer c;
    c.id = customer_id;
    c.x = cs.x;
    c.t_x = cs.t_x;
    c.big_t = cs.big_t;
    c.path = build_path(ds, customer_id, cs.first_date);
    for (const auto& tr : ds.transactions) {
        if (tr.customer_id != customer_id || tr.date > ds.estimation_end) continue;
        if (tr.date == cs.first_date) continue;  // clock zero, not a repeat
        c.times.t.push_back(ds.to_units(cs.first_date, tr.date));
    }
    std::sort(c.times.t.begin(), c.times.t.end());
    const std::size_t dim = ds.cov_trans->names.size();
    c.sum_cov_at_times.assign(dim, 0.0);
    for (double tj : c.times.t) {
        const int k = c.path.interval_of(std::min(tj, c.path.coverage_end() - 1e-12));
        for (std::size_t d = 0; d < dim; ++d)
            c.sum_cov_at_times[d] += c.path.values_trans[k][d];
    }
    if (c.path.coverage_end() < c.big_t - 1e-9)
        throw CoverageError("covariates for customer '" + customer_id + "' end at " +
                            std::to_string(c.path.coverage_end()) +
                            " but the estimation period needs " + std::to_string(c.big_t));
    return c;
}

PnbdDynamicData compile_dynamic_data(const ClvDataset& ds, int quad_order) {
    PnbdDynamicData data;
    data.quad_order = quad_order;
    data.customers.reserve(ds.summaries.size());
    for (const auto& cs : ds.summaries)
        data.customers.push_back(compile_dynamic_customer(ds, cs.customer_id));
    return data;
}

namespace {

// per-evaluation working view of one customer's intervals
struct Segments {
    // death integral segments over (t_x, T]
    struct Seg {
        double phi, psi, len;
        double lam_acc, mu_acc;  // Lambda(t_x, a_k), M(t_x, a_k) cumulative
    };
    double log_p = 0.0;       // sum_j gamma' x(t_j)
    double lam_tx = 0.0;      // Lambda(0, t_x)
    double mu_tx = 0.0;       // M(0, t_x)
    double lam_rest = 0.0;    // Lambda(t_x, T)
    double mu_rest = 0.0;     // M(t_x, T)
    std::vector<Seg> segs;
};

Segments build_segments(const PnbdParams& p, const DynCustomer& c) {
    Segments sg;
    sg.log_p = 0.0;
    if (!p.gamma_trans.empty()) {
        double d = 0.0;
        for (std::size_t i = 0; i < p.gamma_trans.size(); ++i)
            d += p.gamma_trans[i] * c.sum_cov_at_times[i];
        sg.log_p = d;
    }
    const auto& path = c.path;
    sg.lam_tx = capital_lambda(path, p.gamma_trans, 0.0, c.t_x);
    sg.mu_tx = piecewise_integral(path, p.gamma_life, false, 0.0, c.t_x);

    // walk the death window (t_x, T] interval by interval
    const double len = path.interval_length;
    const int n_int = static_cast<int>(path.values_trans.size());
    double lam_acc = 0.0, mu_acc = 0.0;  // relative to t_x
    double pos = c.t_x;
    if (pos < c.big_t - 1e-15) {
        int k = path.interval_of(std::min(pos, path.coverage_end() - 1e-12));
        while (pos < c.big_t - 1e-15 && k < n_int) {
            const double seg_end = std::min(c.big_t, path.offset + (k + 1) * len);
            if (seg_end > pos) {
                const double phi = p.gamma_trans.empty()
                                       ? 1.0
                                       : std::exp(dot(p.gamma_trans, path.values_trans[k]));
                const double psi = p.gamma_life.empty()
                                       ? 1.0
                                       : std::exp(dot(p.gamma_life, path.values_life[k]));
                sg.segs.push_back({phi, psi, seg_end - pos, lam_acc, mu_acc});
                lam_acc += (seg_end - pos) * phi;
                mu_acc += (seg_end - pos) * psi;
            }
            pos = seg_end;
            ++k;
        }
    }
    sg.lam_rest = lam_acc;
    sg.mu_rest = mu_acc;
    return sg;
}

// log of the conditional-likelihood bracket at rates (lam0, mu0), factored at
// the recency point; bracket <= 2 by construction
double log_bracket(const Segments& sg, double lam0, double mu0) {
    double bracket = std::exp(-lam0 * sg.lam_rest - mu0 * sg.mu_rest);
    // small memo: dynamic paths from dummy covariates yield few distinct
    // (phi, psi, len) triples per customer
    struct Key {
        double phi, psi, len, value;
    };
    std::vector<Key> cache;
    cache.reserve(8);
    double acc = 1.0;  // exp(-lam0 Lambda(t_x,a) - mu0 M(t_x,a))
    for (const auto& seg : sg.segs) {
        const double rate = lam0 * seg.phi + mu0 * seg.psi;
        double f = -1.0;
        for (const auto& kv : cache)
            if (kv.phi == seg.phi && kv.psi == seg.psi && kv.len == seg.len) {
                f = kv.value;
                break;
            }
        if (f < 0.0) {
            f = std::exp(-rate * seg.len);
            cache.push_back({seg.phi, seg.psi, seg.len, f});
        }
        bracket += acc * mu0 * seg.psi * (1.0 - f) / rate;
        acc *= f;
    }
    return std::log(bracket);
}

}  // namespace

double pnbd_dynamic_conditional_loglik(const PnbdParams& p, const DynCustomer& c, double lam0,
                                       double mu0) {
    const Segments sg = build_segments(p, c);
    return sg.log_p + c.x * std::log(lam0) - lam0 * sg.lam_tx - mu0 * sg.mu_tx +
           log_bracket(sg, lam0, mu0);
}

namespace {

// The recency exponential is absorbed into the node scaling: weights
// u^{r+x-1} e^-u at scale (alpha + Lambda(0,t_x)) and v^{s-1} e^-v at scale
// (beta + M(t_x)). The leftover bracket is bounded, so the product rule
// converges spectrally.
double marginal_from_grid(const PnbdParams& p, const DynCustomer& c, const Segments& sg,
                          const QuadratureRule& ru, const QuadratureRule& rv) {
    const double scale_u = p.alpha + sg.lam_tx;
    const double scale_v = p.beta + sg.mu_tx;
    std::vector<double> log_terms;
    log_terms.reserve(static_cast<std::size_t>(ru.order) * rv.order);
    for (int i = 0; i < ru.order; ++i) {
        const double lam0 = ru.nodes[i] / scale_u;
        for (int j = 0; j < rv.order; ++j) {
            const double mu0 = rv.nodes[j] / scale_v;
            log_terms.push_back(ru.log_weights[i] + rv.log_weights[j] +
                                log_bracket(sg, lam0, mu0));
        }
    }
    return sg.log_p + p.r * std::log(p.alpha) + p.s * std::log(p.beta) - std::lgamma(p.r) -
           std::lgamma(p.s) - (p.r + c.x) * std::log(scale_u) - p.s * std::log(scale_v) +
           log_sum_exp(log_terms);
}

}  // namespace

double pnbd_dynamic_loglik_customer_at(const PnbdParams& p, const DynCustomer& c, int order) {
    if (!p.positive()) return kNegInf;
    const Segments sg = build_segments(p, c);
    const QuadratureRule ru = gauss_laguerre_generalized(order, p.r + c.x - 1.0);
    const QuadratureRule rv = gauss_laguerre_generalized(order, p.s - 1.0);
    return marginal_from_grid(p, c, sg, ru, rv);
}

double pnbd_dynamic_loglik_customer(const PnbdParams& p, const CustomerSummary& cs,
                                    const CovariatePath& path, const TransactionTimes& times,
                                    int base_order) {
    DynCustomer c;
    c.id = cs.customer_id;
    c.x = cs.x;
    c.t_x = cs.t_x;
    c.big_t = cs.big_t;
    c.path = path;
    c.times = times;
    if (static_cast<double>(times.t.size()) != c.x)
        throw InputError("transaction time count does not match x");
    if (path.coverage_end() < cs.big_t - 1e-9)
        throw CoverageError("covariate path does not cover the estimation period");
    const std::size_t dim = path.values_trans.empty() ? 0 : path.values_trans[0].size();
    c.sum_cov_at_times.assign(dim, 0.0);
    for (double tj : times.t) {
        const int k = path.interval_of(std::min(tj, path.coverage_end() - 1e-12));
        for (std::size_t d = 0; d < dim; ++d)
            c.sum_cov_at_times[d] += path.values_trans[k][d];
    }
    double prev = pnbd_dynamic_loglik_customer_at(p, c, base_order);
    for (int order = base_order * 2; order <= base_order * 4; order *= 2) {
        const double cur = pnbd_dynamic_loglik_customer_at(p, c, order);
        if (std::fabs(cur - prev) <= 1e-6 * std::max(1.0, std::fabs(cur))) return cur;
        prev = cur;
    }
    throw NumericalError("dynamic likelihood did not stabilize under order escalation");
}

double pnbd_dynamic_loglik(const PnbdParams& p, const PnbdDynamicData& data) {
    if (!p.positive()) return kNegInf;
    // one u-rule per distinct repeat count, shared across customers
    std::map<int, QuadratureRule> ru_by_x;
    for (const auto& c : data.customers) {
        const int x = static_cast<int>(c.x);
        if (!ru_by_x.count(x))
            ru_by_x.emplace(x, gauss_laguerre_generalized(data.quad_order, p.r + x - 1.0));
    }
    const QuadratureRule rv = gauss_laguerre_generalized(data.quad_order, p.s - 1.0);
    std::vector<double> terms(data.customers.size());
    parallel_for(data.customers.size(), [&](std::size_t i) {
        const DynCustomer& c = data.customers[i];
        const Segments sg = build_segments(p, c);
        terms[i] = marginal_from_grid(p, c, sg, ru_by_x.at(static_cast<int>(c.x)), rv);
    });
    const double total = pairwise_sum(terms);
    return std::isfinite(total) ? total : kNegInf;
}

namespace {

// posterior weights over the rate grid plus the conditional-alive share
struct Posterior {
    std::vector<double> lam, mu;
    std::vector<double> w_total;  // grid weight x conditional likelihood
    std::vector<double> w_alive;
    double log_den = 0.0;
};

Posterior posterior_grid(const PnbdParams& p, const DynCustomer& c, int order) {
    const Segments sg = build_segments(p, c);
    const QuadratureRule ru = gauss_laguerre_generalized(order, p.r + c.x - 1.0);
    const QuadratureRule rv = gauss_laguerre_generalized(order, p.s - 1.0);
    const double scale_u = p.alpha + sg.lam_tx;
    const double scale_v = p.beta + sg.mu_tx;
    Posterior post;
    post.lam.resize(static_cast<std::size_t>(order) * order);
    post.mu.resize(post.lam.size());
    std::vector<double> log_tot(post.lam.size());
    std::vector<double> log_alv(post.lam.size());
    for (int i = 0; i < order; ++i) {
        const double lam0 = ru.nodes[i] / scale_u;
        for (int j = 0; j < order; ++j) {
            const double mu0 = rv.nodes[j] / scale_v;
            const std::size_t idx = static_cast<std::size_t>(i) * order + j;
            post.lam[idx] = lam0;
            post.mu[idx] = mu0;
            const double shared = ru.log_weights[i] + rv.log_weights[j];
            log_tot[idx] = shared + log_bracket(sg, lam0, mu0);
            log_alv[idx] = shared - lam0 * sg.lam_rest - mu0 * sg.mu_rest;
        }
    }
    post.log_den = log_sum_exp(log_tot);
    post.w_total.resize(log_tot.size());
    post.w_alive.resize(log_tot.size());
    for (std::size_t idx = 0; idx < log_tot.size(); ++idx) {
        post.w_total[idx] = std::exp(log_tot[idx] - post.log_den);
        post.w_alive[idx] = std::exp(log_alv[idx] - post.log_den);
    }
    return post;
}

}  // namespace

double pnbd_dynamic_palive(const PnbdParams& p, const DynCustomer& c, int order) {
    const Posterior post = posterior_grid(p, c, order);
    double alive = 0.0;
    for (double w : post.w_alive) alive += w;
    return std::min(1.0, std::max(0.0, alive));
}

double pnbd_dynamic_dect(const PnbdParams& p, const DynCustomer& c, double horizon,
                         double discount_rate, int order) {
    if (horizon < 0.0) throw DomainError("prediction horizon must be nonnegative");
    if (horizon == 0.0) return 0.0;
    if (c.path.coverage_end() < c.big_t + horizon - 1e-9)
        throw CoverageError("covariates cover until " +
                            std::to_string(c.path.coverage_end()) +
                            " time units but the prediction needs " +
                            std::to_string(c.big_t + horizon));
    const Posterior post = posterior_grid(p, c, order);

    // prediction segments over (T, T+h]
    struct Seg {
        double phi, psi, len, start;  // start relative to T
    };
    std::vector<Seg> segs;
    const auto& path = c.path;
    const double len = path.interval_length;
    double pos = c.big_t;
    int k = path.interval_of(std::min(pos, path.coverage_end() - 1e-12));
    const double end = c.big_t + horizon;
    while (pos < end - 1e-15 && k < static_cast<int>(path.values_trans.size())) {
        const double seg_end = std::min(end, path.offset + (k + 1) * len);
        if (seg_end > pos) {
            const double phi = p.gamma_trans.empty()
                                   ? 1.0
                                   : std::exp(dot(p.gamma_trans, path.values_trans[k]));
            const double psi = p.gamma_life.empty()
                                   ? 1.0
                                   : std::exp(dot(p.gamma_life, path.values_life[k]));
            segs.push_back({phi, psi, seg_end - pos, pos - c.big_t});
        }
        pos = seg_end;
        ++k;
    }

    double total = 0.0;
    for (std::size_t idx = 0; idx < post.w_alive.size(); ++idx) {
        if (post.w_alive[idx] <= 0.0) continue;
        const double lam0 = post.lam[idx];
        const double mu0 = post.mu[idx];
        double mu_acc = 0.0;  // M(T, a_k)
        double v = 0.0;
        for (const auto& seg : segs) {
            const double rate = discount_rate + mu0 * seg.psi;
            v += lam0 * seg.phi * std::exp(-discount_rate * seg.start - mu0 * mu_acc) *
                 -std::expm1(-rate * seg.len) / rate;
            mu_acc += seg.psi * seg.len;
        }
        total += post.w_alive[idx] * v;
    }
    return total;
}

double pnbd_dynamic_expected_transactions(const PnbdParams& p, const CovariatePath& path,
                                          double u1, double u2) {
    if (u2 < u1) throw DomainError("window bounds out of order");
    if (u1 == u2) return 0.0;
    const double len = path.interval_length;
    double pos = std::max(u1, 0.0);
    int k = path.interval_of(pos);
    double m_acc = capital_m(path, p.gamma_life, pos);
    double total = 0.0;
    while (pos < u2 - 1e-15 && k < static_cast<int>(path.values_trans.size())) {
        const double seg_end = std::min(u2, path.offset + (k + 1) * len);
        if (seg_end > pos) {
            const double phi = p.gamma_trans.empty()
                                   ? 1.0
                                   : std::exp(dot(p.gamma_trans, path.values_trans[k]));
            const double psi = p.gamma_life.empty()
                                   ? 1.0
                                   : std::exp(dot(p.gamma_life, path.values_life[k]));
            const double m_end = m_acc + psi * (seg_end - pos);
            // int phi (beta/(beta+M(u)))^s du over the segment
            total += phi / psi * std::pow(p.beta, p.s) *
                     power_diff_ratio(p.beta + m_acc, p.beta + m_end, p.s);
            m_acc = m_end;
        }
        pos = seg_end;
        ++k;
    }
    if (pos < u2 - 1e-9)
        throw CoverageError("covariate path ends before the requested window");
    return p.r / p.alpha * total;
}

}  // namespace clv
