// Uncertainty quantification by resampling customers with replacement,
// refitting, and aggregating user-chosen functionals.
#pragma once

#include <functional>
#include <vector>

#include "clv/estimation.hpp"

namespace clv {

struct BootstrapSpec {
    int num_boots = 100;
    std::uint64_t seed = 1;
    std::pair<double, double> quantiles{0.05, 0.95};
    std::optional<OptimizerConfig> fit_overrides;
    // replaceable sampling hook (tests use the identity permutation); the
    // default draws ids with replacement
    std::function<std::vector<std::string>(const std::vector<std::string>&, std::uint64_t)>
        sampler;
};

struct BootstrapOutcome {
    std::vector<std::vector<double>> outputs;  // one vector per successful iteration
    int n_failed = 0;
};

// Rebuilds a dataset from the sampled ids (duplicates get fresh synthetic
// ids) pinning the original period boundaries, refits with the original
// options, and applies fn to the refitted model.
BootstrapOutcome bootstrap_apply(
    const FitResult& fit, const ClvDataset& ds, const BootstrapSpec& spec,
    const std::function<std::vector<double>(const FitResult&, const ClvDataset&)>& fn);

// dataset rebuilt from a sampled multiset of customer ids, periods preserved
ClvDataset resample_dataset(const ClvDataset& ds, const std::vector<std::string>& ids);

// refit the same family and options on a new dataset, starting from the
// original estimates
FitResult refit_like(const FitResult& fit, const ClvDataset& ds,
                     const std::optional<OptimizerConfig>& overrides);

struct CiRow {
    double lower = 0.0, upper = 0.0;
};

// per-component empirical quantiles (linear interpolation between order
// statistics); needs at least two successful iterations
std::vector<CiRow> ci_table(const std::vector<std::vector<double>>& outputs,
                            std::pair<double, double> quantiles);

// linear-interpolation quantile of a sample (the definition used throughout)
double sample_quantile(std::vector<double> values, double q);

}  // namespace clv
