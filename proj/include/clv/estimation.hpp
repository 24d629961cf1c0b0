// Generic maximum-likelihood engine: parameter transforms, Nelder-Mead and
// quasi-Newton drivers over numerical gradients, finite-difference Hessian,
// KKT diagnostics, information criteria, and the likelihood-ratio test.
#pragma once

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "clv/dataset.hpp"
#include "clv/gamma_gamma.hpp"
#include "clv/pnbd.hpp"
#include "clv/util.hpp"

namespace clv {

enum class Transform { log_positive, identity, corr_tanh };

struct FreeParam {
    std::string name;
    Transform transform = Transform::log_positive;
    double start = 1.0;  // natural scale (corr_tanh: the correlation p_m)
};

// A maximization problem over named free parameters. loglik_natural consumes
// the natural-scale vector; to_natural maps the optimizer space into it.
struct MleProblem {
    std::vector<FreeParam> free_params;
    std::function<double(const std::vector<double>&)> loglik_natural;
    std::function<std::vector<double>(const std::vector<double>&)> to_natural;
    std::function<std::vector<double>(const std::vector<double>&)> to_theta;  // inverse

    std::vector<double> start_theta() const;
};

struct OptimizerConfig {
    enum class Method { quasi_newton, nelder_mead };
    std::optional<Method> method;        // default depends on the model
    int max_evals = 20000;
    double tolerance = 1e-8;
    std::optional<std::vector<double>> start_values;  // natural scale
    bool trace = false;
    // unset: true for standard/static fits, false for dynamic ones
    std::optional<bool> compute_hessian;
    int threads = 0;  // 0 = leave the global setting alone
};

struct FitResult {
    std::string family;  // "pnbd", "pnbd-static", "pnbd-dynamic", "gg"
    std::vector<std::string> param_names;
    std::vector<double> params;  // natural scale
    bool converged = false;
    bool kkt1 = false, kkt2 = false;
    double loglik = 0.0;
    double aic = 0.0, bic = 0.0;
    std::int64_t n_customers = 0;
    int fevals = 0;
    std::string optimizer;
    std::optional<Matrix> hessian;  // natural scale
    std::optional<Matrix> vcov;
    std::vector<double> std_errors;  // NaN where unavailable

    // model options snapshot
    bool use_correlation = false;
    std::optional<std::pair<double, double>> reg_lambdas;
    std::vector<std::string> constrained_names;
    std::vector<std::string> cov_names_trans, cov_names_life;
    bool remove_first_transaction = true;  // gg only
    int quad_order = 64;                   // dynamic only

    // dataset context used by prediction defaults
    std::string time_unit = "week";
    Timestamp estimation_start = 0, estimation_end = 0;
    std::optional<Timestamp> holdout_end;

    double param(const std::string& name) const;
    bool has_param(const std::string& name) const;
    PnbdParams pnbd_params() const;
    GgParams gg_params() const;
    bool s_at_most_one() const;  // long-lifetime diagnostic flag
};

struct OptimResult {
    std::vector<double> theta;
    double value = 0.0;
    int evals = 0;
    bool converged = false;
};

OptimResult nelder_mead(const std::function<double(const std::vector<double>&)>& f,
                        std::vector<double> x0, int max_evals, double ftol);

OptimResult quasi_newton(const std::function<double(const std::vector<double>&)>& f,
                         std::vector<double> x0, int max_evals, double gtol);

// generic fit driver (maximizes); fills optimizer diagnostics but not the
// model-specific metadata
FitResult fit_generic(const MleProblem& problem, const OptimizerConfig& config,
                      OptimizerConfig::Method default_method, std::int64_t n_customers);

// model-specific entry points
FitResult fit_pnbd(const ClvDataset& ds, const ModelOptions& opts, const OptimizerConfig& cfg);
FitResult fit_gg(const ClvDataset& ds, bool remove_first_transaction,
                 const OptimizerConfig& cfg);
FitResult fit_pnbd_dynamic(const ClvDataset& ds, const ModelOptions& opts,
                           OptimizerConfig cfg);

// rebuild a problem for an existing fit (hessian/bootstrap refits)
MleProblem pnbd_problem(const ClvDataset& ds, const ModelOptions& opts);
MleProblem gg_problem(const ClvDataset& ds, bool remove_first_transaction);
MleProblem pnbd_dynamic_problem(const ClvDataset& ds, const ModelOptions& opts,
                                int quad_order);

// central-difference Hessian of the problem's log-likelihood on the natural
// scale, step max(1e-5, 1e-4 |theta_i|), symmetrized
Matrix hessian_at(const std::function<double(const std::vector<double>&)>& loglik_natural,
                  const std::vector<double>& natural);

// attaches hessian, vcov, standard errors and KKT2 to a fitted result
void add_hessian_diagnostics(FitResult& fr, const MleProblem& problem);

struct LrTestResult {
    double chisq = 0.0;
    int df = 0;
    double p_value = 1.0;
};

LrTestResult lr_test(const FitResult& constrained, const FitResult& unconstrained);

// human-readable coefficient table mirroring the package-style summary
std::string summary_text(const FitResult& fr);

// JSON persistence (schema_version tagged)
std::string fit_to_json(const FitResult& fr);
FitResult fit_from_json(const std::string& text);

}  // namespace clv
