#include "oracles.hpp"

#include <cmath>

#include "clv/special_functions.hpp"
#include "clv/util.hpp"

namespace clv::oracle {

namespace {

// L(lambda, mu | x, t_x, T) = lambda^x e^{-(lambda+mu) t_x} h(lambda, mu),
// h = (mu + lambda e^{-(lambda+mu)(T-t_x)}) / (lambda + mu); h is entire, so
// integrating h against weights lambda^{r+x-1} e^{-lambda(alpha+t_x)} and
// mu^{s-1} e^{-mu(beta+t_x)} converges spectrally.
double marginal_with_factor(double r, double alpha, double s, double beta, double x, double t_x,
                            double big_t, int order,
                            const std::function<double(double, double)>& extra) {
    const QuadratureRule ru = gauss_laguerre_generalized(order, r + x - 1.0);
    const QuadratureRule rv = gauss_laguerre_generalized(order, s - 1.0);
    const double p = alpha + t_x;
    const double q = beta + t_x;
    const double delta_t = big_t - t_x;
    std::vector<double> log_terms;
    log_terms.reserve(order * order);
    for (int i = 0; i < order; ++i) {
        const double lam = ru.nodes[i] / p;
        for (int j = 0; j < order; ++j) {
            const double mu = rv.nodes[j] / q;
            const double sum = lam + mu;
            const double h = (mu + lam * std::exp(-sum * delta_t)) / sum;
            const double f = h * extra(lam, mu);
            if (f <= 0.0) continue;
            log_terms.push_back(ru.log_weights[i] + rv.log_weights[j] + std::log(f));
        }
    }
    const double log_sum = log_sum_exp(log_terms);
    return r * std::log(alpha) + s * std::log(beta) - std::lgamma(r) - std::lgamma(s) -
           (r + x) * std::log(p) - s * std::log(q) + log_sum;
}

}  // namespace

double pnbd_loglik_quadrature(double r, double alpha, double s, double beta, double x,
                              double t_x, double big_t, int order) {
    // self-verifying: escalate until two consecutive orders agree
    double prev = marginal_with_factor(r, alpha, s, beta, x, t_x, big_t, order,
                                       [](double, double) { return 1.0; });
    for (int n = order + order / 2; n <= 512; n += n / 2) {
        const double cur = marginal_with_factor(r, alpha, s, beta, x, t_x, big_t, n,
                                                [](double, double) { return 1.0; });
        if (std::fabs(cur - prev) <= 1e-9 * std::max(1.0, std::fabs(cur))) return cur;
        prev = cur;
    }
    return prev;
}

double pnbd_loglik_sarmanov_quadrature(double r, double alpha, double s, double beta, double m,
                                       double x, double t_x, double big_t, int order) {
    const double k = std::exp(r * (std::log(alpha) - std::log1p(alpha)) +
                              s * (std::log(beta) - std::log1p(beta)));
    const double cl = std::exp(r * std::log1p(1.0 / alpha));
    const double cm = std::exp(s * std::log1p(1.0 / beta));
    const auto factor = [=](double lam, double mu) {
        const double dl = cl * std::exp(-lam) - 1.0;
        const double dm = cm * std::exp(-mu) - 1.0;
        return 1.0 + m * k * dl * dm;
    };
    double prev = marginal_with_factor(r, alpha, s, beta, x, t_x, big_t, order, factor);
    for (int n = order + order / 2; n <= 512; n += n / 2) {
        const double cur = marginal_with_factor(r, alpha, s, beta, x, t_x, big_t, n, factor);
        if (std::fabs(cur - prev) <= 1e-9 * std::max(1.0, std::fabs(cur))) return cur;
        prev = cur;
    }
    return prev;
}

double palive_quadrature(double r, double alpha, double s, double beta, double x, double t_x,
                         double big_t, int order) {
    // numerator: Int lambda^x e^{-(lambda+mu) T} g g; absorb the full horizon
    const QuadratureRule ru = gauss_laguerre_generalized(order, r + x - 1.0);
    const QuadratureRule rv = gauss_laguerre_generalized(order, s - 1.0);
    double log_num = r * std::log(alpha) + s * std::log(beta) - std::lgamma(r) -
                     std::lgamma(s) - (r + x) * std::log(alpha + big_t) -
                     s * std::log(beta + big_t);
    double wsum_u = kNegInf, wsum_v = kNegInf;
    for (int i = 0; i < order; ++i) wsum_u = log_add(wsum_u, ru.log_weights[i]);
    for (int j = 0; j < order; ++j) wsum_v = log_add(wsum_v, rv.log_weights[j]);
    log_num += wsum_u + wsum_v;
    const double log_den = pnbd_loglik_quadrature(r, alpha, s, beta, x, t_x, big_t, order);
    return std::exp(log_num - log_den);
}

double cet_quadrature(double r, double alpha, double s, double beta, double x, double t_x,
                      double big_t, double horizon, int order) {
    // numerator: Int lambda^{x+1} (1 - e^{-mu h})/mu e^{-(lambda+mu) T} g g
    const QuadratureRule ru = gauss_laguerre_generalized(order, r + x);  // lambda^{r+x+1-1}
    const QuadratureRule rv = gauss_laguerre_generalized(order, s - 1.0);
    const double p = alpha + big_t;
    const double q = beta + big_t;
    double log_u = kNegInf;
    for (int i = 0; i < order; ++i) log_u = log_add(log_u, ru.log_weights[i]);
    double log_v = kNegInf;
    for (int j = 0; j < order; ++j) {
        const double mu = rv.nodes[j] / q;
        const double f = -std::expm1(-mu * horizon) / mu;
        log_v = log_add(log_v, rv.log_weights[j] + std::log(f));
    }
    const double log_num = r * std::log(alpha) + s * std::log(beta) - std::lgamma(r) -
                           std::lgamma(s) - (r + x + 1.0) * std::log(p) - s * std::log(q) +
                           log_u + log_v;
    const double log_den = pnbd_loglik_quadrature(r, alpha, s, beta, x, t_x, big_t, order);
    return std::exp(log_num - log_den);
}

double dert_truncated_integral(double r, double alpha, double s, double beta, double x,
                               double t_x, double big_t, double delta, double tail_tol) {
    // DERT = C Int_0^inf e^{-delta u} (beta + T + u)^{-s} du / L with
    // C = Gamma(r+x+1) alpha^r beta^s / (Gamma(r) (alpha+T)^{r+x+1});
    // integrate numerically on [0, H] with the analytic tail bound
    // e^{-delta H} (beta+T+H)^{-s} / delta.
    const double log_c = std::lgamma(r + x + 1.0) - std::lgamma(r) + r * std::log(alpha) +
                         s * std::log(beta) - (r + x + 1.0) * std::log(alpha + big_t);
    const LegendreRule rule = gauss_legendre(32);
    double integral = 0.0;
    double horizon = 10.0 / delta;
    for (;;) {
        const double tail = std::exp(-delta * horizon) *
                            std::pow(beta + big_t + horizon, -s) / delta;
        if (tail < tail_tol * integral && integral > 0.0) break;
        if (horizon > 1e9 / delta) break;
        horizon *= 2.0;
        integral = 0.0;
        const int panels = 200;
        const double step = horizon / panels;
        for (int seg = 0; seg < panels; ++seg) {
            const double lo = seg * step;
            for (std::size_t qn = 0; qn < rule.nodes.size(); ++qn) {
                const double u = lo + 0.5 * step * (1.0 + rule.nodes[qn]);
                integral += 0.5 * step * rule.weights[qn] * std::exp(-delta * u) *
                            std::pow(beta + big_t + u, -s);
            }
        }
    }
    const double log_den = pnbd_loglik_quadrature(r, alpha, s, beta, x, t_x, big_t);
    return std::exp(log_c + std::log(integral) - log_den);
}

double gg_density_quadrature(double p, double q, double gamma, double x, double zbar,
                             int order) {
    // f(zbar) = Int Gamma-density(zbar; px, nu x) Gamma-density(nu; q, gamma) dnu,
    // nodes scaled by (gamma + x zbar) which absorbs both exponentials
    const QuadratureRule rv = gauss_laguerre_generalized(order, q + p * x - 1.0);
    const double scale = gamma + x * zbar;
    std::vector<double> lt;
    lt.reserve(order);
    for (int i = 0; i < order; ++i) lt.push_back(rv.log_weights[i]);
    const double log_sum = log_sum_exp(lt);
    return std::exp(p * x * std::log(x) + (p * x - 1.0) * std::log(zbar) -
                    std::lgamma(p * x) + q * std::log(gamma) - std::lgamma(q) -
                    (q + p * x) * std::log(scale) + log_sum);
}

double gg_conditional_mean_quadrature(double p, double q, double gamma, double x, double zbar,
                                      int order) {
    // posterior density of nu is proportional to nu^{q + p x - 1} e^{-nu (gamma + x zbar)};
    // E[p / nu] by composite Gauss-Legendre on a graded mesh (independent of
    // the conjugate-posterior algebra)
    (void)order;
    const double shape = q + p * x;
    const double scale = gamma + x * zbar;
    const double peak = shape / scale;
    const LegendreRule rule = gauss_legendre(32);
    std::vector<double> mesh{0.0, peak / 1024.0};
    const double hi = peak * std::max(64.0, 40.0 / std::sqrt(shape));
    while (mesh.back() < hi) mesh.push_back(std::min(hi, mesh.back() * 1.6));
    double num = 0.0, den = 0.0;
    for (std::size_t seg = 0; seg + 1 < mesh.size(); ++seg) {
        const double mid = 0.5 * (mesh[seg] + mesh[seg + 1]);
        const double half = 0.5 * (mesh[seg + 1] - mesh[seg]);
        for (std::size_t i = 0; i < rule.nodes.size(); ++i) {
            const double nu = mid + half * rule.nodes[i];
            if (!(nu > 0.0)) continue;
            const double w =
                half * rule.weights[i] *
                std::exp((shape - 1.0) * std::log(nu) - nu * scale + shape * std::log(scale) -
                         std::lgamma(shape));
            den += w;
            num += w * p / nu;
        }
    }
    return num / den;
}

}  // namespace clv::oracle
