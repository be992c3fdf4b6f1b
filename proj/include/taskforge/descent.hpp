#pragma once

#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

namespace taskforge {

struct OracleViolation : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct InsufficientIterations : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// A smooth objective with certified curvature constants: gradients are
// `smoothness`-Lipschitz and the gradient-dominance (PL) inequality
// |grad|^2 >= 2 * pl_modulus * (J - min_value) holds on the working domain.
struct SmoothPotential {
    std::string name;
    int dimension = 1;
    std::function<double(const std::vector<double>&)> value;
    std::function<std::vector<double>(const std::vector<double>&)> gradient;
    double min_value = 0.0;
    double smoothness = 1.0; // L
    double pl_modulus = 1.0; // nu
};

// J = 1/2 * sum_i alpha_i x_i^2; L = max alpha, nu = min alpha
SmoothPotential quadratic_potential(const std::vector<double>& alpha);

// f(x) = x^2 + 3 sin^2(x): non-convex but gradient-dominated.
// Certified with L = 8 and nu = 1/32 on |x| <= 3.
SmoothPotential pl_sine_potential();

// A descent direction g(x) that stays aligned with the true gradient:
// <g, grad> >= c1 |grad|^2 and |g| <= c2 |grad|. Verified at every
// step to 1e-9; violations throw OracleViolation.
struct AlignedOracle {
    std::function<std::vector<double>(const std::vector<double>&)> direction;
    double c1 = 1.0;
    double c2 = 1.0;
};

AlignedOracle exact_oracle(const SmoothPotential& p);
// g = s * grad (alignment c1 = s, magnitude c2 = s)
AlignedOracle scaled_oracle(const SmoothPotential& p, double s);

struct DescentResult {
    std::vector<double> gaps; // J_k - J*, k = 0..iterations
    std::vector<double> final_x;
    double eta = 0.0;
    double rho = 0.0;        // certified per-step contraction, admissible only
    bool admissible = false; // eta < 2 c1 / (L c2^2)
    bool certified = false;  // every step obeyed J' <= (1 - rho) J + 1e-12
    int iterations = 0;
};

// Step x <- x - eta g(x) until the gap falls under `tol` or max_iter
// steps pass. Admissible step sizes carry the contraction certificate
// rho = 2 nu (eta c1 - L eta^2 c2^2 / 2), checked against the actual
// trajectory; inadmissible step sizes run uncertified.
DescentResult run_descent(const SmoothPotential& p, const AlignedOracle& oracle,
                          std::vector<double> x0, double eta, int max_iter = 200,
                          double tol = 1e-15);

// Least-squares slope of log(J_k): the empirical per-step contraction
// 1 - exp(slope). Needs at least 5 gaps above 1e-14, else throws
// InsufficientIterations.
double estimate_rate(const std::vector<double>& gaps);

struct MeasuredConstants {
    double smoothness = 0.0;
    double pl_modulus = 0.0;
};

// Finite-difference sweep over [lo, hi]^d estimating the Lipschitz and
// PL constants; d above 2 is rejected to keep the sweep bounded.
MeasuredConstants measure_constants(const SmoothPotential& p, double lo, double hi,
                                    int grid_n);

} // namespace taskforge
