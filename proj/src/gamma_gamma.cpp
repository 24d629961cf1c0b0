#include "clv/gamma_gamma.hpp"

#include <cmath>
#include <map>

#include "clv/errors.hpp"
#include "clv/special_functions.hpp"
#include "clv/util.hpp"

namespace clv {

double gg_log_density(const GgParams& params, const SpendingObservation& obs) {
    if (!params.positive()) throw DomainError("gamma-gamma parameters must be positive");
    if (obs.x_s < 1) throw InputError("spending observation needs at least one transaction");
    if (!(obs.zbar > 0.0)) throw InputError("mean spending must be positive");
    const double p = params.p, q = params.q, g = params.gamma;
    const double x = obs.x_s;
    const double xz = x * obs.zbar;
    // f(zbar) = 1/(zbar B(px, q)) (g/(g+x zbar))^q (x zbar/(g+x zbar))^{px}
    return -std::log(obs.zbar) - log_beta(p * x, q) +
           q * (std::log(g) - std::log(g + xz)) + p * x * (std::log(xz) - std::log(g + xz));
}

double gg_loglik(const GgParams& params, const std::vector<SpendingObservation>& obs) {
    std::vector<double> terms(obs.size());
    parallel_for(obs.size(), [&](std::size_t i) { terms[i] = gg_log_density(params, obs[i]); });
    return pairwise_sum(terms);
}

std::vector<SpendingObservation> spending_inputs(const ClvDataset& ds,
                                                 bool remove_first_transaction) {
    if (!ds.has_prices) throw CapabilityError("dataset carries no price information");
    // per customer: transactions in the estimation period, in date order
    std::map<std::string, std::pair<int, double>> acc;  // id -> (count, sum) after skip
    std::map<std::string, Timestamp> first_seen;
    for (const auto& s : ds.summaries) first_seen[s.customer_id] = s.first_date;
    for (const auto& tr : ds.transactions) {
        auto it = first_seen.find(tr.customer_id);
        if (it == first_seen.end() || tr.date > ds.estimation_end) continue;
        if (remove_first_transaction && tr.date == it->second) continue;
        auto& slot = acc[tr.customer_id];
        slot.first += 1;
        slot.second += tr.price.value_or(0.0);
    }
    std::vector<SpendingObservation> out;
    out.reserve(acc.size());
    for (const auto& [id, cs] : acc) {
        if (cs.first < 1) continue;
        if (!(cs.second > 0.0)) continue;  // all-zero spending carries no signal
        out.push_back({cs.first, cs.second / cs.first});
    }
    return out;
}

double expected_mean_spending(const GgParams& params) {
    if (!params.positive()) throw DomainError("gamma-gamma parameters must be positive");
    if (!params.finite_mean())
        throw DomainError("population mean spending diverges for q <= 1");
    return params.p * params.gamma / (params.q - 1.0);
}

double expected_mean_spending(const GgParams& params, const SpendingObservation& obs) {
    if (obs.x_s == 0) return expected_mean_spending(params);
    if (!params.positive()) throw DomainError("gamma-gamma parameters must be positive");
    if (!(params.p * obs.x_s + params.q > 1.0))
        throw DomainError("posterior mean spending diverges (p x + q <= 1)");
    return params.p * (params.gamma + obs.x_s * obs.zbar) /
           (params.p * obs.x_s + params.q - 1.0);
}

}  // namespace clv
