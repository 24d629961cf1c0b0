// Pareto/NBD likelihood family: standard model, time-invariant covariates,
// Sarmanov correlation, L2 regularization and equality constraints, plus the
// closed-form managerial quantities (PAlive, CET, DERT, expectation, PMF).
#pragma once

#include <optional>
#include <string>
#include <vector>

#include "clv/dataset.hpp"

namespace clv {

struct PnbdParams {
    double r = 1.0;      // purchase-rate Gamma shape
    double alpha = 1.0;  // purchase-rate Gamma rate
    double s = 1.0;      // attrition-rate Gamma shape
    double beta = 1.0;   // attrition-rate Gamma rate
    std::vector<double> gamma_trans;  // transaction-process coefficients
    std::vector<double> gamma_life;   // attrition-process coefficients
    std::optional<double> m;          // Sarmanov parameter

    bool positive() const { return r > 0 && alpha > 0 && s > 0 && beta > 0; }
};

struct ModelOptions {
    bool use_correlation = false;
    std::optional<std::pair<double, double>> reg_lambdas;  // (trans, life)
    std::vector<std::string> constrained_names;
};

// exp(-gamma' x) scaling of the rate parameters; identity when empty
double covariate_scale(const std::vector<double>& gamma, const std::vector<double>& x);

// (b1^{1-s} - b2^{1-s}) / (s - 1) for 0 < b1 < b2, continuous through s = 1
// where it equals log(b2/b1); shared by the expectation formulas
double power_diff_ratio(double b1, double b2, double s);

// log of the Eq.-31-style marginal likelihood for one customer, with
// customer-specific alpha_i = alpha * exp(-gamma_trans' cov_trans) and
// beta_i = beta * exp(-gamma_life' cov_life).
double pnbd_loglik_customer(const PnbdParams& p, const CustomerSummary& cs,
                            const std::vector<double>& cov_trans = {},
                            const std::vector<double>& cov_life = {});

// likelihood value (not log) at explicitly scaled (alpha_i, beta_i); the
// building block for the Sarmanov combination
double pnbd_loglik_at(double r, double alpha_i, double s, double beta_i, double x, double t_x,
                      double big_t);

// Per-customer inputs deduplicated into weighted cells; identical
// (x, t_x, T, covariates) tuples evaluate once.
struct PnbdCell {
    double x, t_x, big_t;
    std::vector<double> cov_trans, cov_life;
    double weight;
};

std::vector<PnbdCell> pnbd_compile_cells(const ClvDataset& ds);

// Weighted-cell log-likelihood with correlation and regularization applied.
double pnbd_loglik_cells(const PnbdParams& p, const std::vector<PnbdCell>& cells,
                         const ModelOptions& opts);

// Total log-likelihood over the dataset, honoring correlation, regularization
// and equality constraints from the options. Returns -inf for infeasible
// Sarmanov parameters.
double pnbd_loglik_total(const PnbdParams& p, const ClvDataset& ds, const ModelOptions& opts);

// correlation coefficient p_m implied by the Sarmanov parameter m
double sarmanov_correlation(const PnbdParams& p);
// largest |m| keeping the Sarmanov density nonnegative at (alpha, beta)
double sarmanov_feasible_bound(const PnbdParams& p);

double pnbd_palive(const PnbdParams& p, const CustomerSummary& cs,
                   const std::vector<double>& cov_trans = {},
                   const std::vector<double>& cov_life = {});

double pnbd_cet(const PnbdParams& p, const CustomerSummary& cs, double horizon,
                const std::vector<double>& cov_trans = {},
                const std::vector<double>& cov_life = {});

double pnbd_dert(const PnbdParams& p, const CustomerSummary& cs, double discount_rate,
                 const std::vector<double>& cov_trans = {},
                 const std::vector<double>& cov_life = {});

// E[X(t)] for a customer with no history (unconditional expectation)
double pnbd_unconditional_expectation(const PnbdParams& p, double t,
                                      const std::vector<double>& cov_trans = {},
                                      const std::vector<double>& cov_life = {});

// P(X(t) = x) under the full model; quadrature-marginalized, order picked
// internally from t and x.
double pnbd_pmf(const PnbdParams& p, double t, int x,
                const std::vector<double>& cov_trans = {},
                const std::vector<double>& cov_life = {});

// all of P(X(t) = 0..x_max) in one sweep (shares the quadrature grid)
std::vector<double> pnbd_pmf_row(const PnbdParams& p, double t, int x_max,
                                 const std::vector<double>& cov_trans = {},
                                 const std::vector<double>& cov_life = {});

// Resolves the covariate row of a customer, empty when the dataset carries no
// static covariates. Throws for dynamic covariates (handled elsewhere).
std::vector<double> static_cov_row(const ClvDataset& ds, const std::string& customer_id,
                                   bool trans_process);

}  // namespace clv
