#include "taskforge/descent.hpp"

#include <algorithm>
#include <cmath>

namespace taskforge {

namespace {

double vdot(const std::vector<double>& a, const std::vector<double>& b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

double vnorm(const std::vector<double>& a) { return std::sqrt(vdot(a, a)); }

} // namespace

SmoothPotential quadratic_potential(const std::vector<double>& alpha) {
    if (alpha.empty()) throw std::invalid_argument("alpha must be non-empty");
    for (double a : alpha)
        if (a <= 0.0) throw std::invalid_argument("alpha entries must be positive");
    SmoothPotential p;
    p.name = "quadratic";
    p.dimension = static_cast<int>(alpha.size());
    p.value = [alpha](const std::vector<double>& x) {
        double s = 0.0;
        for (std::size_t i = 0; i < alpha.size(); ++i) s += alpha[i] * x[i] * x[i];
        return 0.5 * s;
    };
    p.gradient = [alpha](const std::vector<double>& x) {
        std::vector<double> g(alpha.size());
        for (std::size_t i = 0; i < alpha.size(); ++i) g[i] = alpha[i] * x[i];
        return g;
    };
    p.min_value = 0.0;
    p.smoothness = *std::max_element(alpha.begin(), alpha.end());
    p.pl_modulus = *std::min_element(alpha.begin(), alpha.end());
    return p;
}

SmoothPotential pl_sine_potential() {
    SmoothPotential p;
    p.name = "pl_sine";
    p.dimension = 1;
    p.value = [](const std::vector<double>& x) {
        const double s = std::sin(x[0]);
        return x[0] * x[0] + 3.0 * s * s;
    };
    p.gradient = [](const std::vector<double>& x) {
        return std::vector<double>{2.0 * x[0] + 3.0 * std::sin(2.0 * x[0])};
    };
    p.min_value = 0.0;
    // f'' = 2 + 6 cos(2x) peaks at 8; the gradient-dominance floor 1/32
    // is conservative against the measured minimum near |x| = 2.2
    p.smoothness = 8.0;
    p.pl_modulus = 1.0 / 32.0;
    return p;
}

AlignedOracle exact_oracle(const SmoothPotential& p) {
    return AlignedOracle{p.gradient, 1.0, 1.0};
}

AlignedOracle scaled_oracle(const SmoothPotential& p, double s) {
    if (s <= 0.0) throw std::invalid_argument("oracle scale must be positive");
    auto grad = p.gradient;
    AlignedOracle o;
    o.direction = [grad, s](const std::vector<double>& x) {
        std::vector<double> g = grad(x);
        for (double& v : g) v *= s;
        return g;
    };
    o.c1 = s;
    o.c2 = s;
    return o;
}

DescentResult run_descent(const SmoothPotential& p, const AlignedOracle& oracle,
                          std::vector<double> x0, double eta, int max_iter,
                          double tol) {
    if (static_cast<int>(x0.size()) != p.dimension)
        throw std::invalid_argument("x0 dimension mismatch");
    DescentResult res;
    res.eta = eta;
    const double L = p.smoothness;
    res.admissible =
        eta > 0.0 && eta < 2.0 * oracle.c1 / (L * oracle.c2 * oracle.c2);
    if (res.admissible)
        res.rho = 2.0 * p.pl_modulus *
                  (eta * oracle.c1 - 0.5 * L * eta * eta * oracle.c2 * oracle.c2);
    res.certified = res.admissible;

    std::vector<double> x = std::move(x0);
    double gap = p.value(x) - p.min_value;
    res.gaps.push_back(gap);

    for (int k = 0; k < max_iter && gap > tol; ++k) {
        const std::vector<double> grad = p.gradient(x);
        const std::vector<double> g = oracle.direction(x);
        const double grad_sq = vdot(grad, grad);
        if (vdot(g, grad) < oracle.c1 * grad_sq - 1e-9)
            throw OracleViolation("direction under-aligned with the gradient");
        if (vnorm(g) > oracle.c2 * std::sqrt(grad_sq) + 1e-9)
            throw OracleViolation("direction overshoots the gradient envelope");

        for (std::size_t i = 0; i < x.size(); ++i) x[i] -= eta * g[i];
        const double next = p.value(x) - p.min_value;
        if (res.admissible && next > (1.0 - res.rho) * gap + 1e-12)
            res.certified = false;
        gap = next;
        res.gaps.push_back(gap);
        ++res.iterations;
        if (!res.admissible && gap > 1e12) break; // runaway guard
    }
    res.final_x = std::move(x);
    return res;
}

double estimate_rate(const std::vector<double>& gaps) {
    std::vector<std::pair<double, double>> pts; // (k, log J_k)
    for (std::size_t k = 0; k < gaps.size(); ++k)
        if (gaps[k] > 1e-14)
            pts.emplace_back(static_cast<double>(k), std::log(gaps[k]));
    if (pts.size() < 5)
        throw InsufficientIterations("need at least 5 usable gap samples");
    double kbar = 0.0, ybar = 0.0;
    for (const auto& [k, y] : pts) {
        kbar += k;
        ybar += y;
    }
    kbar /= pts.size();
    ybar /= pts.size();
    double num = 0.0, den = 0.0;
    for (const auto& [k, y] : pts) {
        num += (k - kbar) * (y - ybar);
        den += (k - kbar) * (k - kbar);
    }
    if (den == 0.0) throw InsufficientIterations("degenerate sample spacing");
    return 1.0 - std::exp(num / den);
}

MeasuredConstants measure_constants(const SmoothPotential& p, double lo, double hi,
                                    int grid_n) {
    if (p.dimension > 2)
        throw std::invalid_argument("constant sweep supports dimension <= 2");
    if (grid_n < 2) throw std::invalid_argument("grid_n must be at least 2");
    if (!(hi > lo)) throw std::invalid_argument("empty domain");

    const double step = (hi - lo) / (grid_n - 1);
    MeasuredConstants out;
    auto visit = [&](const std::vector<double>& x) {
        const std::vector<double> g = p.gradient(x);
        const double gap = p.value(x) - p.min_value;
        if (gap > 1e-12) {
            const double ratio = vdot(g, g) / (2.0 * gap);
            if (out.pl_modulus == 0.0 || ratio < out.pl_modulus)
                out.pl_modulus = ratio;
        }
        for (int axis = 0; axis < p.dimension; ++axis) {
            if (x[axis] + step > hi + 1e-12) continue;
            std::vector<double> x2 = x;
            x2[axis] += step;
            const std::vector<double> g2 = p.gradient(x2);
            double diff = 0.0;
            for (std::size_t i = 0; i < g.size(); ++i)
                diff += (g2[i] - g[i]) * (g2[i] - g[i]);
            out.smoothness = std::max(out.smoothness, std::sqrt(diff) / step);
        }
    };

    if (p.dimension == 1) {
        for (int i = 0; i < grid_n; ++i) visit({lo + i * step});
    } else {
        for (int i = 0; i < grid_n; ++i)
            for (int j = 0; j < grid_n; ++j)
                visit({lo + i * step, lo + j * step});
    }
    return out;
}

} // namespace taskforge
