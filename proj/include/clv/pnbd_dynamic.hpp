// Pareto/NBD with piecewise-constant time-varying covariates: interval
// accumulators, the marginal likelihood via the conditional closed form plus
// 2-D Gauss-Laguerre marginalization over (lambda0, mu0), and finite-horizon
// DECT prediction.
#pragma once

#include <string>
#include <vector>

#include "clv/dataset.hpp"
#include "clv/pnbd.hpp"

namespace clv {

// Piecewise-constant covariate path in customer time. Interval k covers
// [offset + k L, offset + (k+1) L) with L = interval_length; offset <= 0 so
// interval 0 contains the customer's first purchase (clock zero).
struct CovariatePath {
    double interval_length = 1.0;
    double offset = 0.0;
    std::vector<std::vector<double>> values_trans;  // x^P_k per interval
    std::vector<std::vector<double>> values_life;   // x^A_k per interval

    double coverage_end() const {
        return offset + interval_length * static_cast<double>(values_trans.size());
    }
    // index of the interval containing time u (left-closed convention)
    int interval_of(double u) const;
};

struct TransactionTimes {
    std::vector<double> t;  // strictly increasing, within (0, T]
};

// Integral of exp(gamma' x^P(s)) over [s1, s2]; exact for piecewise-constant
// paths. Throws CoverageError outside the path coverage.
double capital_lambda(const CovariatePath& path, const std::vector<double>& gamma_trans,
                      double s1, double s2);

// Integral of exp(gamma' x^A(s)) over [0, omega].
double capital_m(const CovariatePath& path, const std::vector<double>& gamma_life,
                 double omega);

// Per-customer compiled structure for repeated likelihood evaluation.
struct DynCustomer {
    std::string id;
    double x = 0.0;
    double t_x = 0.0;
    double big_t = 0.0;
    CovariatePath path;
    TransactionTimes times;
    std::vector<double> sum_cov_at_times;  // sum over t_j of x^P(t_j)
};

struct PnbdDynamicData {
    std::vector<DynCustomer> customers;
    int quad_order = 64;
};

// builds the compiled view over the estimation period (plus any future
// coverage present in the covariate tables)
PnbdDynamicData compile_dynamic_data(const ClvDataset& ds, int quad_order = 64);
DynCustomer compile_dynamic_customer(const ClvDataset& ds, const std::string& customer_id);

// log marginal likelihood of one customer at a fixed quadrature order
double pnbd_dynamic_loglik_customer_at(const PnbdParams& p, const DynCustomer& c, int order);

// log conditional likelihood given the individual rates (lambda0, mu0); the
// quantity the 2-D quadrature marginalizes
double pnbd_dynamic_conditional_loglik(const PnbdParams& p, const DynCustomer& c, double lam0,
                                       double mu0);

// escalating-order variant (64 -> 128 -> 256, relative 1e-6 stabilization);
// throws NumericalError when the escalation does not stabilize
double pnbd_dynamic_loglik_customer(const PnbdParams& p, const CustomerSummary& cs,
                                    const CovariatePath& path, const TransactionTimes& times,
                                    int base_order = 64);

// total log-likelihood over the compiled dataset (no penalty applied here)
double pnbd_dynamic_loglik(const PnbdParams& p, const PnbdDynamicData& data);

// posterior P(alive at T)
double pnbd_dynamic_palive(const PnbdParams& p, const DynCustomer& c, int order = 64);

// expected (optionally continuously discounted) transactions over
// (T, T + horizon]; the path must cover [0, T + horizon]
double pnbd_dynamic_dect(const PnbdParams& p, const DynCustomer& c, double horizon,
                         double discount_rate = 0.0, int order = 64);

// unconditional E[X(u1, u2)] for a customer with this covariate path and no
// purchase history (tracking overlays, new-customer scenarios)
double pnbd_dynamic_expected_transactions(const PnbdParams& p, const CovariatePath& path,
                                          double u1, double u2);

}  // namespace clv
