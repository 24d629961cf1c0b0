#include "clv/estimation.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <memory>
#include <sstream>

#include <json.hpp>

#include "clv/errors.hpp"
#include "clv/pnbd_dynamic.hpp"
#include "clv/special_functions.hpp"

namespace clv {

namespace {

double pm_factor(double r, double alpha, double s, double beta) {
    return std::sqrt(r) / (1.0 + alpha) * std::pow(alpha / (1.0 + alpha), r) *
           std::sqrt(s) / (1.0 + beta) * std::pow(beta / (1.0 + beta), s);
}

// shared natural-vector layout: r, alpha, s, beta, life.*, trans.*, constr.*,
// Cor(life,trans)
PnbdParams pnbd_from_naturals(const std::vector<std::string>& names,
                              const std::vector<double>& v,
                              const std::vector<std::string>& cov_trans_names,
                              const std::vector<std::string>& cov_life_names,
                              const std::vector<std::string>& constrained) {
    PnbdParams p;
    std::optional<double> cor;
    std::vector<double> life_free, trans_free, constr;
    std::vector<std::string> life_names, trans_names, constr_names;
    for (std::size_t i = 0; i < names.size(); ++i) {
        const std::string& n = names[i];
        if (n == "r") p.r = v[i];
        else if (n == "alpha") p.alpha = v[i];
        else if (n == "s") p.s = v[i];
        else if (n == "beta") p.beta = v[i];
        else if (n.rfind("life.", 0) == 0) { life_free.push_back(v[i]); life_names.push_back(n.substr(5)); }
        else if (n.rfind("trans.", 0) == 0) { trans_free.push_back(v[i]); trans_names.push_back(n.substr(6)); }
        else if (n.rfind("constr.", 0) == 0) { constr.push_back(v[i]); constr_names.push_back(n.substr(7)); }
        else if (n == "Cor(life,trans)") cor = v[i];
    }
    auto assemble = [&](const std::vector<std::string>& cov_names,
                        const std::vector<double>& free_vals,
                        const std::vector<std::string>& free_names) {
        std::vector<double> out;
        for (const auto& cn : cov_names) {
            auto cit = std::find(constr_names.begin(), constr_names.end(), cn);
            if (cit != constr_names.end()) {
                out.push_back(constr[cit - constr_names.begin()]);
                continue;
            }
            auto fit = std::find(free_names.begin(), free_names.end(), cn);
            if (fit == free_names.end())
                throw InputError("no coefficient for covariate '" + cn + "'");
            out.push_back(free_vals[fit - free_names.begin()]);
        }
        return out;
    };
    (void)constrained;
    p.gamma_trans = assemble(cov_trans_names, trans_free, trans_names);
    p.gamma_life = assemble(cov_life_names, life_free, life_names);
    if (cor) {
        const double f = pm_factor(p.r, p.alpha, p.s, p.beta);
        p.m = (f > 0.0) ? *cor / f : 0.0;
    }
    return p;
}

std::vector<FreeParam> pnbd_free_params(const ClvDataset& ds, const ModelOptions& opts) {
    std::vector<FreeParam> fp{{"r", Transform::log_positive, 1.0},
                              {"alpha", Transform::log_positive, 1.0},
                              {"s", Transform::log_positive, 1.0},
                              {"beta", Transform::log_positive, 1.0}};
    const auto has_name = [](const std::vector<std::string>& v, const std::string& n) {
        return std::find(v.begin(), v.end(), n) != v.end();
    };
    for (const auto& cn : opts.constrained_names) {
        if (!ds.cov_life || !ds.cov_trans || !has_name(ds.cov_life->names, cn) ||
            !has_name(ds.cov_trans->names, cn))
            throw InputError("constrained covariate '" + cn +
                             "' must exist for both processes");
    }
    if (ds.cov_life)
        for (const auto& n : ds.cov_life->names)
            if (!has_name(opts.constrained_names, n))
                fp.push_back({"life." + n, Transform::identity, 0.1});
    if (ds.cov_trans)
        for (const auto& n : ds.cov_trans->names)
            if (!has_name(opts.constrained_names, n))
                fp.push_back({"trans." + n, Transform::identity, 0.1});
    for (const auto& n : opts.constrained_names)
        fp.push_back({"constr." + n, Transform::identity, 0.1});
    if (opts.use_correlation) fp.push_back({"Cor(life,trans)", Transform::corr_tanh, 0.0});
    return fp;
}

void attach_transforms(MleProblem& prob) {
    const auto fps = prob.free_params;
    prob.to_natural = [fps](const std::vector<double>& theta) {
        std::vector<double> nat(theta.size());
        for (std::size_t i = 0; i < theta.size(); ++i) {
            switch (fps[i].transform) {
                case Transform::log_positive: nat[i] = std::exp(theta[i]); break;
                case Transform::identity: nat[i] = theta[i]; break;
                case Transform::corr_tanh: nat[i] = std::tanh(theta[i]); break;
            }
        }
        return nat;
    };
    prob.to_theta = [fps](const std::vector<double>& nat) {
        std::vector<double> theta(nat.size());
        for (std::size_t i = 0; i < nat.size(); ++i) {
            switch (fps[i].transform) {
                case Transform::log_positive:
                    if (!(nat[i] > 0.0))
                        throw DomainError("start value for '" + fps[i].name +
                                          "' must be positive");
                    theta[i] = std::log(nat[i]);
                    break;
                case Transform::identity: theta[i] = nat[i]; break;
                case Transform::corr_tanh:
                    if (!(std::fabs(nat[i]) < 1.0))
                        throw DomainError("correlation start must lie in (-1, 1)");
                    theta[i] = std::atanh(nat[i]);
                    break;
            }
        }
        return theta;
    };
}

}  // namespace

std::vector<double> MleProblem::start_theta() const {
    std::vector<double> nat(free_params.size());
    for (std::size_t i = 0; i < free_params.size(); ++i) nat[i] = free_params[i].start;
    return to_theta(nat);
}

MleProblem pnbd_problem(const ClvDataset& ds, const ModelOptions& opts) {
    if (ds.cov_trans && ds.cov_trans->mode == CovariateTable::Mode::dynamic_cov)
        throw CapabilityError("dataset carries dynamic covariates; use the dynamic model");
    MleProblem prob;
    prob.free_params = pnbd_free_params(ds, opts);
    attach_transforms(prob);
    std::vector<std::string> names;
    for (const auto& fp : prob.free_params) names.push_back(fp.name);
    const std::vector<std::string> ct = ds.cov_trans ? ds.cov_trans->names
                                                     : std::vector<std::string>{};
    const std::vector<std::string> cl = ds.cov_life ? ds.cov_life->names
                                                    : std::vector<std::string>{};
    auto cells = std::make_shared<std::vector<PnbdCell>>(pnbd_compile_cells(ds));
    prob.loglik_natural = [names, ct, cl, opts, cells](const std::vector<double>& nat) {
        const PnbdParams p = pnbd_from_naturals(names, nat, ct, cl, opts.constrained_names);
        if (!p.positive()) return kNegInf;
        return pnbd_loglik_cells(p, *cells, opts);
    };
    return prob;
}

MleProblem gg_problem(const ClvDataset& ds, bool remove_first_transaction) {
    MleProblem prob;
    prob.free_params = {{"p", Transform::log_positive, 1.0},
                        {"q", Transform::log_positive, 1.0},
                        {"gamma", Transform::log_positive, 1.0}};
    attach_transforms(prob);
    auto obs = std::make_shared<std::vector<SpendingObservation>>(
        spending_inputs(ds, remove_first_transaction));
    if (obs->empty()) throw InputError("no spending observations (all customers excluded)");
    prob.loglik_natural = [obs](const std::vector<double>& nat) {
        GgParams g{nat[0], nat[1], nat[2]};
        if (!g.positive()) return kNegInf;
        return gg_loglik(g, *obs);
    };
    return prob;
}

MleProblem pnbd_dynamic_problem(const ClvDataset& ds, const ModelOptions& opts,
                                int quad_order) {
    if (opts.use_correlation)
        throw CapabilityError(
            "process correlation is not available for time-varying covariates");
    MleProblem prob;
    prob.free_params = pnbd_free_params(ds, opts);
    attach_transforms(prob);
    std::vector<std::string> names;
    for (const auto& fp : prob.free_params) names.push_back(fp.name);
    auto compiled = std::make_shared<PnbdDynamicData>(compile_dynamic_data(ds, quad_order));
    const std::vector<std::string> ct = ds.cov_trans->names;
    const std::vector<std::string> cl = ds.cov_life->names;
    const auto constrained = opts.constrained_names;
    const auto reg = opts.reg_lambdas;
    prob.loglik_natural = [names, ct, cl, constrained, reg,
                           compiled](const std::vector<double>& nat) {
        const PnbdParams p = pnbd_from_naturals(names, nat, ct, cl, constrained);
        if (!p.positive()) return kNegInf;
        double ll = pnbd_dynamic_loglik(p, *compiled);
        if (reg) {
            double pen = 0.0;
            for (double g : p.gamma_trans) pen += reg->first * g * g;
            for (double g : p.gamma_life) pen += reg->second * g * g;
            ll -= pen;
        }
        return ll;
    };
    return prob;
}

OptimResult nelder_mead(const std::function<double(const std::vector<double>&)>& f,
                        std::vector<double> x0, int max_evals, double ftol) {
    const std::size_t n = x0.size();
    int evals = 0;
    auto eval = [&](const std::vector<double>& x) {
        ++evals;
        const double v = f(x);
        return std::isfinite(v) ? -v : std::numeric_limits<double>::infinity();
    };
    std::vector<std::vector<double>> simplex{x0};
    for (std::size_t i = 0; i < n; ++i) {
        auto v = x0;
        v[i] += 0.1 * (1.0 + std::fabs(v[i]));
        simplex.push_back(v);
    }
    std::vector<double> fv(n + 1);
    for (std::size_t i = 0; i <= n; ++i) fv[i] = eval(simplex[i]);

    bool converged = false;
    while (evals < max_evals) {
        std::vector<std::size_t> ord(n + 1);
        for (std::size_t i = 0; i <= n; ++i) ord[i] = i;
        std::sort(ord.begin(), ord.end(), [&](std::size_t a, std::size_t b) {
            return fv[a] < fv[b];
        });
        {
            std::vector<std::vector<double>> s2;
            std::vector<double> f2;
            for (std::size_t i = 0; i <= n; ++i) {
                s2.push_back(simplex[ord[i]]);
                f2.push_back(fv[ord[i]]);
            }
            simplex = std::move(s2);
            fv = std::move(f2);
        }
        const double spread = std::fabs(fv[n] - fv[0]);
        double size = 0.0;
        for (std::size_t i = 0; i < n; ++i)
            size = std::max(size, std::fabs(simplex[n][i] - simplex[0][i]));
        if (spread <= ftol * (1.0 + std::fabs(fv[0])) && size < 1e-6) {
            converged = true;
            break;
        }
        std::vector<double> centroid(n, 0.0);
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < n; ++j) centroid[j] += simplex[i][j] / n;
        auto blend = [&](double w) {
            std::vector<double> x(n);
            for (std::size_t j = 0; j < n; ++j)
                x[j] = centroid[j] + w * (simplex[n][j] - centroid[j]);
            return x;
        };
        const auto xr = blend(-1.0);
        const double fr = eval(xr);
        if (fr < fv[0]) {
            const auto xe = blend(-2.0);
            const double fe = eval(xe);
            if (fe < fr) { simplex[n] = xe; fv[n] = fe; }
            else { simplex[n] = xr; fv[n] = fr; }
        } else if (fr < fv[n - 1]) {
            simplex[n] = xr;
            fv[n] = fr;
        } else {
            const bool outside = fr < fv[n];
            const auto xc = blend(outside ? -0.5 : 0.5);
            const double fc = eval(xc);
            if (fc < std::min(fr, fv[n])) {
                simplex[n] = xc;
                fv[n] = fc;
            } else {
                for (std::size_t i = 1; i <= n; ++i) {
                    for (std::size_t j = 0; j < n; ++j)
                        simplex[i][j] = simplex[0][j] + 0.5 * (simplex[i][j] - simplex[0][j]);
                    fv[i] = eval(simplex[i]);
                }
            }
        }
    }
    std::size_t best = 0;
    for (std::size_t i = 1; i <= n; ++i)
        if (fv[i] < fv[best]) best = i;
    return {simplex[best], -fv[best], evals, converged};
}

namespace {

std::vector<double> numeric_gradient(const std::function<double(const std::vector<double>&)>& f,
                                     const std::vector<double>& x, int* evals) {
    std::vector<double> g(x.size());
    std::vector<double> xp = x;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double h = 1e-6 * (1.0 + std::fabs(x[i]));
        xp[i] = x[i] + h;
        const double up = f(xp);
        xp[i] = x[i] - h;
        const double dn = f(xp);
        xp[i] = x[i];
        g[i] = (up - dn) / (2.0 * h);
        *evals += 2;
    }
    return g;
}

}  // namespace

OptimResult quasi_newton(const std::function<double(const std::vector<double>&)>& f,
                         std::vector<double> x0, int max_evals, double gtol) {
    // L-BFGS (two-loop recursion) minimizing -f with Armijo backtracking
    const std::size_t n = x0.size();
    const int history = 10;
    int evals = 0;
    auto g_of = [&](const std::vector<double>& x) {
        ++evals;
        const double v = f(x);
        return std::isfinite(v) ? -v : std::numeric_limits<double>::infinity();
    };
    std::vector<double> x = std::move(x0);
    double fx = g_of(x);
    if (!std::isfinite(fx)) throw DomainError("infeasible start values");
    auto neg = [&](const std::vector<double>& v) { return g_of(v); };
    auto grad_of = [&](const std::vector<double>& xx) {
        return numeric_gradient([&](const std::vector<double>& v) { return neg(v); }, xx,
                                &evals);
    };
    std::vector<double> g = grad_of(x);

    std::vector<std::vector<double>> s_hist, y_hist;
    std::vector<double> rho_hist;
    bool converged = false;

    for (int iter = 0; iter < 10000 && evals < max_evals; ++iter) {
        double gmax = 0.0;
        for (double gi : g) gmax = std::max(gmax, std::fabs(gi));
        if (gmax <= gtol * (1.0 + std::fabs(fx))) {
            converged = true;
            break;
        }
        // two-loop recursion
        std::vector<double> q = g;
        std::vector<double> alpha_coef(s_hist.size());
        for (int i = static_cast<int>(s_hist.size()) - 1; i >= 0; --i) {
            double sq = 0.0;
            for (std::size_t j = 0; j < n; ++j) sq += s_hist[i][j] * q[j];
            alpha_coef[i] = rho_hist[i] * sq;
            for (std::size_t j = 0; j < n; ++j) q[j] -= alpha_coef[i] * y_hist[i][j];
        }
        double scale = 1.0;
        if (!s_hist.empty()) {
            double sy = 0.0, yy = 0.0;
            for (std::size_t j = 0; j < n; ++j) {
                sy += s_hist.back()[j] * y_hist.back()[j];
                yy += y_hist.back()[j] * y_hist.back()[j];
            }
            if (yy > 0.0) scale = sy / yy;
        }
        for (double& qi : q) qi *= scale;
        for (std::size_t i = 0; i < s_hist.size(); ++i) {
            double yq = 0.0;
            for (std::size_t j = 0; j < n; ++j) yq += y_hist[i][j] * q[j];
            const double b = rho_hist[i] * yq;
            for (std::size_t j = 0; j < n; ++j) q[j] += s_hist[i][j] * (alpha_coef[i] - b);
        }
        // descent direction d = -q
        double dg = 0.0;
        for (std::size_t j = 0; j < n; ++j) dg += -q[j] * g[j];
        if (!(dg < 0.0)) {
            // fall back to steepest descent
            for (std::size_t j = 0; j < n; ++j) q[j] = g[j];
            dg = 0.0;
            for (std::size_t j = 0; j < n; ++j) dg -= g[j] * g[j];
            s_hist.clear();
            y_hist.clear();
            rho_hist.clear();
        }
        // cap the very first step: the unscaled gradient can be huge
        double dmax = 0.0;
        for (double qi : q) dmax = std::max(dmax, std::fabs(qi));
        double step = s_hist.empty() ? std::min(1.0, 1.0 / std::max(1.0, dmax)) : 1.0;
        std::vector<double> xn(n);
        double fn = 0.0;
        bool accepted = false;
        for (int ls = 0; ls < 50; ++ls) {
            for (std::size_t j = 0; j < n; ++j) xn[j] = x[j] - step * q[j];
            fn = g_of(xn);
            if (std::isfinite(fn) && fn <= fx + 1e-4 * step * dg) {
                accepted = true;
                break;
            }
            step *= 0.5;
        }
        if (!accepted) {
            converged = true;  // stuck at gradient-noise resolution
            break;
        }
        std::vector<double> gn = grad_of(xn);
        std::vector<double> s_vec(n), y_vec(n);
        double sy = 0.0;
        for (std::size_t j = 0; j < n; ++j) {
            s_vec[j] = xn[j] - x[j];
            y_vec[j] = gn[j] - g[j];
            sy += s_vec[j] * y_vec[j];
        }
        if (sy > 1e-12) {
            s_hist.push_back(std::move(s_vec));
            y_hist.push_back(std::move(y_vec));
            rho_hist.push_back(1.0 / sy);
            if (static_cast<int>(s_hist.size()) > history) {
                s_hist.erase(s_hist.begin());
                y_hist.erase(y_hist.begin());
                rho_hist.erase(rho_hist.begin());
            }
        }
        const double df = fx - fn;
        x = std::move(xn);
        fx = fn;
        g = std::move(gn);
        if (df >= 0.0 && df <= 1e-12 * (1.0 + std::fabs(fx))) {
            double gm = 0.0;
            for (double gi : g) gm = std::max(gm, std::fabs(gi));
            converged = gm <= 100.0 * gtol * (1.0 + std::fabs(fx));
            break;
        }
    }
    if (!converged) {
        double gmax = 0.0;
        for (double gi : g) gmax = std::max(gmax, std::fabs(gi));
        converged = gmax <= gtol * (1.0 + std::fabs(fx));
    }
    return {x, -fx, evals, converged};
}

Matrix hessian_at(const std::function<double(const std::vector<double>&)>& loglik_natural,
                  const std::vector<double>& natural) {
    const std::size_t n = natural.size();
    Matrix h(n);
    std::vector<double> x = natural;
    const double f0 = loglik_natural(x);
    auto step = [&](std::size_t i) { return std::max(1e-5, 1e-4 * std::fabs(natural[i])); };
    for (std::size_t i = 0; i < n; ++i) {
        const double hi = step(i);
        x[i] = natural[i] + hi;
        const double fp = loglik_natural(x);
        x[i] = natural[i] - hi;
        const double fm = loglik_natural(x);
        x[i] = natural[i];
        h(i, i) = (fp - 2.0 * f0 + fm) / (hi * hi);
        for (std::size_t j = i + 1; j < n; ++j) {
            const double hj = step(j);
            x[i] = natural[i] + hi; x[j] = natural[j] + hj;
            const double fpp = loglik_natural(x);
            x[j] = natural[j] - hj;
            const double fpm = loglik_natural(x);
            x[i] = natural[i] - hi;
            const double fmm = loglik_natural(x);
            x[j] = natural[j] + hj;
            const double fmp = loglik_natural(x);
            x[i] = natural[i]; x[j] = natural[j];
            const double v = (fpp - fpm - fmp + fmm) / (4.0 * hi * hj);
            if (!std::isfinite(v))
                throw NumericalError("non-finite Hessian entry for parameter pair (" +
                                     std::to_string(i) + ", " + std::to_string(j) + ")");
            h(i, j) = h(j, i) = v;
        }
        if (!std::isfinite(h(i, i)))
            throw NumericalError("non-finite Hessian entry for parameter pair (" +
                                 std::to_string(i) + ", " + std::to_string(i) + ")");
    }
    return h;
}

void add_hessian_diagnostics(FitResult& fr, const MleProblem& problem) {
    fr.hessian = hessian_at(problem.loglik_natural, fr.params);
    const std::size_t n = fr.params.size();
    auto ev = symmetric_eigenvalues(*fr.hessian);
    fr.kkt2 = !ev.empty() && ev.back() < -1e-8;
    Matrix neg(n);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) neg(i, j) = -(*fr.hessian)(i, j);
    Matrix inv;
    fr.std_errors.assign(n, std::numeric_limits<double>::quiet_NaN());
    if (invert(neg, inv)) {
        fr.vcov = inv;
        for (std::size_t i = 0; i < n; ++i)
            if (inv(i, i) > 0.0) fr.std_errors[i] = std::sqrt(inv(i, i));
    }
}

FitResult fit_generic(const MleProblem& problem, const OptimizerConfig& config,
                      OptimizerConfig::Method default_method, std::int64_t n_customers) {
    if (config.threads > 0) set_max_threads(config.threads);
    std::vector<double> theta0;
    if (config.start_values) {
        if (config.start_values->size() != problem.free_params.size())
            throw InputError("expected " + std::to_string(problem.free_params.size()) +
                             " start values");
        theta0 = problem.to_theta(*config.start_values);
    } else {
        theta0 = problem.start_theta();
    }
    int trace_count = 0;
    auto objective = [&](const std::vector<double>& theta) {
        const double v = problem.loglik_natural(problem.to_natural(theta));
        if (config.trace && (++trace_count % 50) == 0)
            std::fprintf(stderr, "eval %d: %.6f\n", trace_count, v);
        return v;
    };
    {
        const double f0 = objective(theta0);
        if (!std::isfinite(f0)) throw DomainError("infeasible start values");
    }
    const auto method = config.method.value_or(default_method);
    OptimResult opt;
    if (method == OptimizerConfig::Method::nelder_mead)
        opt = nelder_mead(objective, theta0, config.max_evals, config.tolerance);
    else
        opt = quasi_newton(objective, theta0, config.max_evals,
                           std::max(config.tolerance, 1e-9));

    FitResult fr;
    for (const auto& fp : problem.free_params) fr.param_names.push_back(fp.name);
    fr.params = problem.to_natural(opt.theta);
    fr.loglik = opt.value;
    fr.converged = opt.converged;
    fr.fevals = opt.evals;
    fr.n_customers = n_customers;
    fr.optimizer = method == OptimizerConfig::Method::nelder_mead ? "nelder-mead"
                                                                  : "quasi-newton";
    const double k = static_cast<double>(problem.free_params.size());
    fr.aic = 2.0 * k - 2.0 * fr.loglik;
    fr.bic = k * std::log(static_cast<double>(n_customers)) - 2.0 * fr.loglik;

    // first-order condition on the optimizer scale
    int dummy = 0;
    const auto grad = numeric_gradient(objective, opt.theta, &dummy);
    double gmax = 0.0;
    for (double gi : grad) gmax = std::max(gmax, std::fabs(gi));
    fr.kkt1 = gmax < 1e-4 * (1.0 + std::fabs(fr.loglik));

    if (config.compute_hessian.value_or(true)) add_hessian_diagnostics(fr, problem);
    else fr.std_errors.assign(fr.params.size(), std::numeric_limits<double>::quiet_NaN());
    return fr;
}

namespace {

void fill_dataset_context(FitResult& fr, const ClvDataset& ds) {
    fr.time_unit = ds.time_unit.name();
    fr.estimation_start = ds.estimation_start;
    fr.estimation_end = ds.estimation_end;
    fr.holdout_end = ds.holdout_end;
    fr.n_customers = static_cast<std::int64_t>(ds.summaries.size());
}

}  // namespace

FitResult fit_pnbd(const ClvDataset& ds, const ModelOptions& opts, const OptimizerConfig& cfg) {
    MleProblem prob = pnbd_problem(ds, opts);
    FitResult fr = fit_generic(prob, cfg, OptimizerConfig::Method::quasi_newton,
                               static_cast<std::int64_t>(ds.summaries.size()));
    fr.family = ds.cov_trans ? "pnbd-static" : "pnbd";
    fr.use_correlation = opts.use_correlation;
    fr.reg_lambdas = opts.reg_lambdas;
    fr.constrained_names = opts.constrained_names;
    if (ds.cov_trans) fr.cov_names_trans = ds.cov_trans->names;
    if (ds.cov_life) fr.cov_names_life = ds.cov_life->names;
    fill_dataset_context(fr, ds);
    return fr;
}

FitResult fit_gg(const ClvDataset& ds, bool remove_first_transaction,
                 const OptimizerConfig& cfg) {
    MleProblem prob = gg_problem(ds, remove_first_transaction);
    const auto obs = spending_inputs(ds, remove_first_transaction);
    FitResult fr = fit_generic(prob, cfg, OptimizerConfig::Method::quasi_newton,
                               static_cast<std::int64_t>(obs.size()));
    fr.family = "gg";
    fr.remove_first_transaction = remove_first_transaction;
    fill_dataset_context(fr, ds);
    fr.n_customers = static_cast<std::int64_t>(obs.size());
    return fr;
}

FitResult fit_pnbd_dynamic(const ClvDataset& ds, const ModelOptions& opts,
                           OptimizerConfig cfg) {
    if (!ds.cov_trans || ds.cov_trans->mode != CovariateTable::Mode::dynamic_cov)
        throw InputError("dynamic fit needs dynamic covariates attached");
    const int order = 64;
    MleProblem prob = pnbd_dynamic_problem(ds, opts, order);
    if (!cfg.compute_hessian) cfg.compute_hessian = false;  // off by default here
    FitResult fr = fit_generic(prob, cfg, OptimizerConfig::Method::nelder_mead,
                               static_cast<std::int64_t>(ds.summaries.size()));
    fr.family = "pnbd-dynamic";
    fr.use_correlation = false;
    fr.reg_lambdas = opts.reg_lambdas;
    fr.constrained_names = opts.constrained_names;
    fr.cov_names_trans = ds.cov_trans->names;
    fr.cov_names_life = ds.cov_life->names;
    fr.quad_order = order;
    fill_dataset_context(fr, ds);
    return fr;
}

double FitResult::param(const std::string& name) const {
    for (std::size_t i = 0; i < param_names.size(); ++i)
        if (param_names[i] == name) return params[i];
    throw InputError("no parameter named '" + name + "'");
}

bool FitResult::has_param(const std::string& name) const {
    return std::find(param_names.begin(), param_names.end(), name) != param_names.end();
}

PnbdParams FitResult::pnbd_params() const {
    if (family.rfind("pnbd", 0) != 0)
        throw CapabilityError("fit result is not a latent-attrition model");
    return pnbd_from_naturals(param_names, params, cov_names_trans, cov_names_life,
                              constrained_names);
}

GgParams FitResult::gg_params() const {
    if (family != "gg") throw CapabilityError("fit result is not a spending model");
    return {param("p"), param("q"), param("gamma")};
}

bool FitResult::s_at_most_one() const {
    return family.rfind("pnbd", 0) == 0 && param("s") <= 1.0;
}

LrTestResult lr_test(const FitResult& constrained, const FitResult& unconstrained) {
    const int df = static_cast<int>(unconstrained.param_names.size()) -
                   static_cast<int>(constrained.param_names.size());
    if (df < 1) throw InputError("models are not nested (df < 1)");
    double chisq = 2.0 * (unconstrained.loglik - constrained.loglik);
    const double slack = 1e-6 * (1.0 + std::fabs(unconstrained.loglik));
    if (chisq < -slack)
        throw InputError("nesting violated: the larger model has a lower log-likelihood");
    chisq = std::max(0.0, chisq);
    return {chisq, df, chi_square_sf(chisq, df)};
}

namespace {

std::string family_label(const std::string& family) {
    if (family == "pnbd") return "Pareto/NBD Standard Model";
    if (family == "pnbd-static") return "Pareto/NBD with Static Covariates Model";
    if (family == "pnbd-dynamic") return "Pareto/NBD with Dynamic Covariates Model";
    if (family == "gg") return "Gamma-Gamma Spending Model";
    return family;
}

bool inference_row(const std::string& name) {
    return name.rfind("life.", 0) == 0 || name.rfind("trans.", 0) == 0 ||
           name.rfind("constr.", 0) == 0;
}

double normal_sf(double z) { return 0.5 * std::erfc(z / std::sqrt(2.0)); }

}  // namespace

std::string summary_text(const FitResult& fr) {
    std::ostringstream os;
    os << family_label(fr.family) << "\n\n";
    os << "Fitting period:\n";
    os << "Estimation start  " << format_date(fr.estimation_start) << "\n";
    os << "Estimation end    " << format_date(fr.estimation_end) << "\n\n";
    os << "Coefficients:\n";
    char buf[160];
    std::snprintf(buf, sizeof(buf), "%-18s %12s %12s %8s %10s\n", "", "Estimate",
                  "Std. Error", "z-val", "Pr(>|z|)");
    os << buf;
    for (std::size_t i = 0; i < fr.param_names.size(); ++i) {
        const double se = i < fr.std_errors.size()
                              ? fr.std_errors[i]
                              : std::numeric_limits<double>::quiet_NaN();
        std::string se_s = std::isnan(se) ? "NA" : [&] {
            char b[32];
            std::snprintf(b, sizeof(b), "%.4f", se);
            return std::string(b);
        }();
        std::string z_s = "NA", p_s = "NA";
        if (inference_row(fr.param_names[i]) && !std::isnan(se) && se > 0.0) {
            const double z = fr.params[i] / se;
            const double p = 2.0 * normal_sf(std::fabs(z));
            char b[32];
            std::snprintf(b, sizeof(b), "%.3f", z);
            z_s = b;
            std::snprintf(b, sizeof(b), "%.4g", p);
            p_s = b;
        }
        std::snprintf(buf, sizeof(buf), "%-18s %12.4f %12s %8s %10s\n",
                      fr.param_names[i].c_str(), fr.params[i], se_s.c_str(), z_s.c_str(),
                      p_s.c_str());
        os << buf;
    }
    os << "\nOptimization info:\n";
    std::snprintf(buf, sizeof(buf), "LL     %.4f\nAIC    %.4f\nBIC    %.4f\n", fr.loglik,
                  fr.aic, fr.bic);
    os << buf;
    os << "KKT 1  " << (fr.kkt1 ? "TRUE" : "FALSE") << "\n";
    os << "KKT 2  " << (fr.kkt2 ? "TRUE" : "FALSE") << "\n";
    os << "fevals " << fr.fevals << "\n";
    os << "Method " << fr.optimizer << "\n";
    os << "Converged " << (fr.converged ? "TRUE" : "FALSE") << "\n";
    if (fr.family.rfind("pnbd", 0) == 0) {
        os << "\nUsed Options:\n";
        os << "Correlation     " << (fr.use_correlation ? "TRUE" : "FALSE") << "\n";
        os << "Regularization  " << (fr.reg_lambdas ? "TRUE" : "FALSE") << "\n";
        os << "Constraint covs " << (!fr.constrained_names.empty() ? "TRUE" : "FALSE") << "\n";
        if (!fr.constrained_names.empty()) {
            os << "Constraint params";
            for (const auto& n : fr.constrained_names) os << " " << n;
            os << "\n";
        }
        if (fr.use_correlation && fr.has_param("Cor(life,trans)")) {
            std::snprintf(buf, sizeof(buf), "Estimated correlation %.6f\n",
                          fr.param("Cor(life,trans)"));
            os << buf;
        }
        if (fr.s_at_most_one())
            os << "Note: s <= 1; expected residual lifetime is unbounded, undiscounted "
                  "expectations diverge\n";
    }
    if (fr.family == "gg") {
        os << "\nUsed Options:\n";
        os << "Remove first transaction " << (fr.remove_first_transaction ? "TRUE" : "FALSE")
           << "\n";
    }
    return os.str();
}

namespace {

nlohmann::json matrix_to_json(const Matrix& m) {
    nlohmann::json rows = nlohmann::json::array();
    for (std::size_t i = 0; i < m.n; ++i) {
        nlohmann::json row = nlohmann::json::array();
        for (std::size_t j = 0; j < m.n; ++j) row.push_back(m(i, j));
        rows.push_back(row);
    }
    return rows;
}

Matrix matrix_from_json(const nlohmann::json& j) {
    Matrix m(j.size());
    for (std::size_t i = 0; i < m.n; ++i)
        for (std::size_t jx = 0; jx < m.n; ++jx) m(i, jx) = j[i][jx].get<double>();
    return m;
}

}  // namespace

std::string fit_to_json(const FitResult& fr) {
    nlohmann::json j;
    j["schema_version"] = 1;
    j["family"] = fr.family;
    j["param_names"] = fr.param_names;
    j["params"] = fr.params;
    j["converged"] = fr.converged;
    j["kkt1"] = fr.kkt1;
    j["kkt2"] = fr.kkt2;
    j["loglik"] = fr.loglik;
    j["aic"] = fr.aic;
    j["bic"] = fr.bic;
    j["n_customers"] = fr.n_customers;
    j["fevals"] = fr.fevals;
    j["optimizer"] = fr.optimizer;
    j["std_errors"] = fr.std_errors;
    if (fr.hessian) j["hessian"] = matrix_to_json(*fr.hessian);
    if (fr.vcov) j["vcov"] = matrix_to_json(*fr.vcov);
    j["options"]["use_correlation"] = fr.use_correlation;
    if (fr.reg_lambdas)
        j["options"]["reg_lambdas"] = {fr.reg_lambdas->first, fr.reg_lambdas->second};
    j["options"]["constrained_names"] = fr.constrained_names;
    j["options"]["remove_first_transaction"] = fr.remove_first_transaction;
    j["options"]["quad_order"] = fr.quad_order;
    j["cov_names_trans"] = fr.cov_names_trans;
    j["cov_names_life"] = fr.cov_names_life;
    j["dataset"]["time_unit"] = fr.time_unit;
    j["dataset"]["estimation_start"] = fr.estimation_start;
    j["dataset"]["estimation_end"] = fr.estimation_end;
    if (fr.holdout_end) j["dataset"]["holdout_end"] = *fr.holdout_end;
    return j.dump(2);
}

FitResult fit_from_json(const std::string& text) {
    nlohmann::json j = nlohmann::json::parse(text);
    if (!j.contains("schema_version") || j["schema_version"].get<int>() != 1)
        throw InputError("unsupported model file schema");
    FitResult fr;
    fr.family = j["family"].get<std::string>();
    fr.param_names = j["param_names"].get<std::vector<std::string>>();
    fr.params = j["params"].get<std::vector<double>>();
    fr.converged = j["converged"].get<bool>();
    fr.kkt1 = j["kkt1"].get<bool>();
    fr.kkt2 = j["kkt2"].get<bool>();
    fr.loglik = j["loglik"].get<double>();
    fr.aic = j["aic"].get<double>();
    fr.bic = j["bic"].get<double>();
    fr.n_customers = j["n_customers"].get<std::int64_t>();
    fr.fevals = j["fevals"].get<int>();
    fr.optimizer = j["optimizer"].get<std::string>();
    if (j.contains("std_errors")) {
        fr.std_errors.clear();
        for (const auto& v : j["std_errors"])
            fr.std_errors.push_back(v.is_null() ? std::numeric_limits<double>::quiet_NaN()
                                                : v.get<double>());
    }
    if (j.contains("hessian")) fr.hessian = matrix_from_json(j["hessian"]);
    if (j.contains("vcov")) fr.vcov = matrix_from_json(j["vcov"]);
    fr.use_correlation = j["options"]["use_correlation"].get<bool>();
    if (j["options"].contains("reg_lambdas"))
        fr.reg_lambdas = {{j["options"]["reg_lambdas"][0].get<double>(),
                           j["options"]["reg_lambdas"][1].get<double>()}};
    fr.constrained_names = j["options"]["constrained_names"].get<std::vector<std::string>>();
    fr.remove_first_transaction = j["options"]["remove_first_transaction"].get<bool>();
    fr.quad_order = j["options"]["quad_order"].get<int>();
    fr.cov_names_trans = j["cov_names_trans"].get<std::vector<std::string>>();
    fr.cov_names_life = j["cov_names_life"].get<std::vector<std::string>>();
    fr.time_unit = j["dataset"]["time_unit"].get<std::string>();
    fr.estimation_start = j["dataset"]["estimation_start"].get<Timestamp>();
    fr.estimation_end = j["dataset"]["estimation_end"].get<Timestamp>();
    if (j["dataset"].contains("holdout_end"))
        fr.holdout_end = j["dataset"]["holdout_end"].get<Timestamp>();
    return fr;
}

}  // namespace clv
