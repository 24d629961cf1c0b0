#include "clv/bootstrap.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <random>

#include "clv/errors.hpp"
#include "clv/util.hpp"

namespace clv {

ClvDataset resample_dataset(const ClvDataset& ds, const std::vector<std::string>& ids) {
    ClvDataset out;
    out.time_unit = ds.time_unit;
    out.estimation_start = ds.estimation_start;
    out.estimation_end = ds.estimation_end;
    out.holdout_end = ds.holdout_end;
    out.estimation_length = ds.estimation_length;
    out.has_prices = ds.has_prices;

    // group source transactions per customer once
    std::map<std::string, std::pair<std::size_t, std::size_t>> spans;
    for (std::size_t i = 0; i < ds.transactions.size();) {
        std::size_t j = i;
        while (j < ds.transactions.size() &&
               ds.transactions[j].customer_id == ds.transactions[i].customer_id)
            ++j;
        spans[ds.transactions[i].customer_id] = {i, j};
        i = j;
    }

    std::map<std::string, int> seen;
    if (ds.cov_life) {
        out.cov_life = CovariateTable{};
        out.cov_life->mode = ds.cov_life->mode;
        out.cov_life->names = ds.cov_life->names;
        out.cov_trans = CovariateTable{};
        out.cov_trans->mode = ds.cov_trans->mode;
        out.cov_trans->names = ds.cov_trans->names;
    }
    for (const auto& id : ids) {
        const int copy = seen[id]++;
        const std::string new_id = copy == 0 ? id : id + "#b" + std::to_string(copy);
        const CustomerSummary& src = ds.summary_for(id);
        CustomerSummary cs = src;
        cs.customer_id = new_id;
        out.summaries.push_back(std::move(cs));
        const auto span = spans.at(id);
        for (std::size_t k = span.first; k < span.second; ++k) {
            AggTransaction tr = ds.transactions[k];
            tr.customer_id = new_id;
            out.transactions.push_back(std::move(tr));
        }
        if (ds.cov_life) {
            if (ds.cov_life->mode == CovariateTable::Mode::static_cov) {
                out.cov_life->static_rows[new_id] = ds.cov_life->static_rows.at(id);
                out.cov_trans->static_rows[new_id] = ds.cov_trans->static_rows.at(id);
            } else {
                out.cov_life->dynamic_rows[new_id] = ds.cov_life->dynamic_rows.at(id);
                out.cov_trans->dynamic_rows[new_id] = ds.cov_trans->dynamic_rows.at(id);
            }
        }
    }
    std::sort(out.transactions.begin(), out.transactions.end(),
              [](const AggTransaction& a, const AggTransaction& b) {
                  return a.customer_id != b.customer_id ? a.customer_id < b.customer_id
                                                        : a.date < b.date;
              });
    std::sort(out.summaries.begin(), out.summaries.end(),
              [](const CustomerSummary& a, const CustomerSummary& b) {
                  return a.customer_id < b.customer_id;
              });
    return out;
}

FitResult refit_like(const FitResult& fit, const ClvDataset& ds,
                     const std::optional<OptimizerConfig>& overrides) {
    OptimizerConfig cfg = overrides.value_or(OptimizerConfig{});
    if (!overrides) {
        cfg.method = fit.optimizer == "nelder-mead" ? OptimizerConfig::Method::nelder_mead
                                                    : OptimizerConfig::Method::quasi_newton;
        cfg.compute_hessian = false;
        cfg.start_values = fit.params;  // warm start at the original estimates
    }
    if (fit.family == "gg") return fit_gg(ds, fit.remove_first_transaction, cfg);
    ModelOptions opts;
    opts.use_correlation = fit.use_correlation;
    opts.reg_lambdas = fit.reg_lambdas;
    opts.constrained_names = fit.constrained_names;
    if (fit.family == "pnbd-dynamic") return fit_pnbd_dynamic(ds, opts, cfg);
    return fit_pnbd(ds, opts, cfg);
}

BootstrapOutcome bootstrap_apply(
    const FitResult& fit, const ClvDataset& ds, const BootstrapSpec& spec,
    const std::function<std::vector<double>(const FitResult&, const ClvDataset&)>& fn) {
    if (spec.num_boots < 1) throw InputError("bootstrap needs at least one iteration");
    std::vector<std::string> ids;
    ids.reserve(ds.summaries.size());
    for (const auto& s : ds.summaries) ids.push_back(s.customer_id);

    auto default_sampler = [](const std::vector<std::string>& pool, std::uint64_t seed) {
        std::mt19937_64 rng(seed);
        std::vector<std::string> out;
        out.reserve(pool.size());
        for (std::size_t i = 0; i < pool.size(); ++i)
            out.push_back(pool[rng() % pool.size()]);
        return out;
    };
    const auto& sampler = spec.sampler ? spec.sampler : default_sampler;

    std::vector<std::optional<std::vector<double>>> results(spec.num_boots);
    parallel_for(spec.num_boots, [&](std::size_t b) {
        try {
            const auto sample = sampler(ids, mix64(spec.seed ^ mix64(b + 0x9b007ULL)));
            if (sample.size() != ids.size())
                throw InputError("sampler must return exactly N ids");
            const ClvDataset boot_ds = resample_dataset(ds, sample);
            const FitResult boot_fit = refit_like(fit, boot_ds, spec.fit_overrides);
            if (!boot_fit.converged) throw NumericalError("bootstrap refit did not converge");
            results[b] = fn(boot_fit, boot_ds);
        } catch (const std::exception&) {
            results[b] = std::nullopt;
        }
    });

    BootstrapOutcome out;
    for (auto& r : results) {
        if (r) out.outputs.push_back(std::move(*r));
        else ++out.n_failed;
    }
    return out;
}

double sample_quantile(std::vector<double> values, double q) {
    if (values.empty()) throw InputError("quantile of an empty sample");
    std::sort(values.begin(), values.end());
    const double h = (static_cast<double>(values.size()) - 1.0) * q;
    const std::size_t lo = static_cast<std::size_t>(std::floor(h));
    const std::size_t hi = std::min(values.size() - 1, lo + 1);
    const double frac = h - static_cast<double>(lo);
    return values[lo] + frac * (values[hi] - values[lo]);
}

std::vector<CiRow> ci_table(const std::vector<std::vector<double>>& outputs,
                            std::pair<double, double> quantiles) {
    if (outputs.size() < 2)
        throw InputError("confidence intervals need at least two successful iterations");
    if (!(quantiles.first > 0.0) || !(quantiles.second < 1.0) ||
        !(quantiles.first < quantiles.second))
        throw InputError("quantiles must be ascending inside (0, 1)");
    const std::size_t dim = outputs.front().size();
    for (const auto& o : outputs)
        if (o.size() != dim) throw InputError("bootstrap outputs have uneven lengths");
    std::vector<CiRow> rows(dim);
    for (std::size_t j = 0; j < dim; ++j) {
        std::vector<double> col;
        col.reserve(outputs.size());
        for (const auto& o : outputs) col.push_back(o[j]);
        rows[j].lower = sample_quantile(col, quantiles.first);
        rows[j].upper = sample_quantile(col, quantiles.second);
    }
    return rows;
}

}  // namespace clv
