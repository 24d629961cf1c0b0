// Special functions behind the closed-form likelihoods: log-gamma with sign,
// log-beta, the Gauss hypergeometric 2F1 in log scale, generalized exponential
// integrals, regularized incomplete gamma, and Gauss-Laguerre rules.
#pragma once

#include <vector>

namespace clv {

// Value stored as log-magnitude plus sign; sign 0 encodes an exact zero.
struct SignedLog {
    double log_abs;
    int sign;

    double value() const;
};

SignedLog signed_log_mul(SignedLog a, SignedLog b);
SignedLog signed_log_add(SignedLog a, SignedLog b);

// log|Gamma(x)| with the sign of Gamma(x); x may be negative non-integer.
SignedLog log_gamma_signed(double x);

// log B(a, b), a, b > 0.
double log_beta(double a, double b);

// log 2F1(a, b; c; z) as a signed log, for c > 0 and |z| < 1.
//
// Direct power series for small z, Pfaff transformation for z < 0, the Euler
// transformation for z near 1, and the (1-z) linear connection formula as a
// last resort. Throws NumericalError when no route converges (z extremely
// close to 1 with c-a-b at a nonpositive integer).
SignedLog log_gauss_2f1(double a, double b, double c, double z);

// Generalized exponential integral E_s(z) = Int_1^inf e^{-z t} t^{-s} dt
// for real order s >= 0 and z > 0. Equals z^{s-1} Gamma(1-s, z).
double expint_en(double s, double z);

// Regularized incomplete gamma P(a, z) = gammainc_lower(a,z)/Gamma(a) and its
// complement Q(a, z), for a > 0, z >= 0.
double reg_gamma_p(double a, double z);
double reg_gamma_q(double a, double z);

// Upper tail of the chi-square distribution with df degrees of freedom.
double chi_square_sf(double x, double df);

// Gauss-Laguerre quadrature: Int_0^inf u^alpha e^-u f(u) du ~= sum w_i f(u_i).
// Weights are kept in log scale; they underflow double range beyond order
// ~200 otherwise.
struct QuadratureRule {
    std::vector<double> nodes;
    std::vector<double> log_weights;
    int order = 0;
    double alpha = 0.0;
};

// Plain rule (alpha = 0), 1 <= order <= 512.
QuadratureRule gauss_laguerre(int order);

// Generalized rule with weight u^alpha e^-u, alpha > -1.
QuadratureRule gauss_laguerre_generalized(int order, double alpha);

// Gauss-Legendre nodes/weights on [-1, 1] (linear-scale weights).
struct LegendreRule {
    std::vector<double> nodes;
    std::vector<double> weights;
};
LegendreRule gauss_legendre(int order);

}  // namespace clv
