// Gamma-Gamma spending model: marginal likelihood of observed mean spending
// and conditional expected mean spending per customer.
#pragma once

#include <vector>

#include "clv/dataset.hpp"

namespace clv {

struct GgParams {
    double p = 1.0;      // per-transaction spend Gamma shape
    double q = 1.0;      // heterogeneity Gamma shape
    double gamma = 1.0;  // heterogeneity Gamma rate

    bool positive() const { return p > 0 && q > 0 && gamma > 0; }
    // population mean spend p*gamma/(q-1) is finite only for q > 1
    bool finite_mean() const { return q > 1.0; }
};

struct SpendingObservation {
    int x_s = 1;        // transactions entering the spending average
    double zbar = 0.0;  // observed mean transaction value
};

// log density of the observed mean spending for one observation
double gg_log_density(const GgParams& params, const SpendingObservation& obs);

double gg_loglik(const GgParams& params, const std::vector<SpendingObservation>& obs);

// Builds spending observations from the estimation period. With
// remove_first_transaction (the default), the first purchase is dropped and
// zero repeaters are excluded; otherwise all transactions count.
std::vector<SpendingObservation> spending_inputs(const ClvDataset& ds,
                                                 bool remove_first_transaction = true);

// Posterior mean spending p(gamma + x_s zbar)/(p x_s + q - 1); with no
// observation (or x_s = 0) the population mean p gamma/(q-1).
double expected_mean_spending(const GgParams& params);
double expected_mean_spending(const GgParams& params, const SpendingObservation& obs);

}  // namespace clv
