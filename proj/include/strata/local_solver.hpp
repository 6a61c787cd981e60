#pragma once

// Bound-constrained quasi-Newton minimizer and an augmented Lagrangian wrapper
// for smooth inequality constraints c(x) <= 0 with user-supplied gradients.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <deque>
#include <functional>
#include <limits>

namespace strata::local {

/// f(x); fills *grad when non-null.
using Objective = std::function<double(const Eigen::VectorXd&, Eigen::VectorXd*)>;

struct BoxOptions {
    int max_iterations = 200;
    double projected_gradient_tol = 1e-8;
    int memory = 8;
    double initial_step = 0.25;  // max-norm cap on the first (steepest descent) step
    int max_evaluations = 1 << 30;
};

struct BoxResult {
    Eigen::VectorXd x;
    double value = 0.0;
    double projected_gradient = 0.0;
    int iterations = 0;
    int evaluations = 0;
    bool converged = false;
};

inline Eigen::VectorXd project(const Eigen::VectorXd& x, const Eigen::VectorXd& lo, const Eigen::VectorXd& hi) {
    return x.cwiseMax(lo).cwiseMin(hi);
}

inline double projected_gradient_norm(const Eigen::VectorXd& x, const Eigen::VectorXd& g, const Eigen::VectorXd& lo,
                                      const Eigen::VectorXd& hi) {
    return (project(x - g, lo, hi) - x).cwiseAbs().maxCoeff();
}

/// Projected L-BFGS: the quasi-Newton direction is restricted to variables not
/// held at a bound by the gradient, and the step is a backtracking search along
/// the projected path.
inline BoxResult minimize_box(const Objective& f, Eigen::VectorXd x, const Eigen::VectorXd& lo,
                              const Eigen::VectorXd& hi, const BoxOptions& opt = {}) {
    const auto n = x.size();
    BoxResult res;
    x = project(x, lo, hi);
    Eigen::VectorXd g(n);
    double fx = f(x, &g);
    ++res.evaluations;

    std::deque<Eigen::VectorXd> S, Y;
    std::deque<double> rho;

    for (res.iterations = 0; res.iterations < opt.max_iterations && res.evaluations < opt.max_evaluations;
         ++res.iterations) {
        res.projected_gradient = projected_gradient_norm(x, g, lo, hi);
        if (res.projected_gradient <= opt.projected_gradient_tol) {
            res.converged = true;
            break;
        }

        Eigen::VectorXd free = Eigen::VectorXd::Ones(n);
        for (Eigen::Index i = 0; i < n; ++i) {
            const bool at_lo = x(i) <= lo(i) && g(i) > 0.0;
            const bool at_hi = x(i) >= hi(i) && g(i) < 0.0;
            if (at_lo || at_hi) free(i) = 0.0;
        }

        // Two-loop recursion on the free subspace.
        Eigen::VectorXd q = g.cwiseProduct(free);
        std::vector<double> alpha(S.size());
        for (int k = static_cast<int>(S.size()) - 1; k >= 0; --k) {
            alpha[static_cast<std::size_t>(k)] = rho[static_cast<std::size_t>(k)] * S[static_cast<std::size_t>(k)].cwiseProduct(free).dot(q);
            q -= alpha[static_cast<std::size_t>(k)] * Y[static_cast<std::size_t>(k)].cwiseProduct(free);
        }
        if (!S.empty()) {
            const double yy = Y.back().squaredNorm();
            if (yy > 0.0) q *= S.back().dot(Y.back()) / yy;
        }
        for (std::size_t k = 0; k < S.size(); ++k) {
            const double beta = rho[k] * Y[k].cwiseProduct(free).dot(q);
            q += (alpha[k] - beta) * S[k].cwiseProduct(free);
        }
        Eigen::VectorXd d = -q.cwiseProduct(free);
        double step = 1.0;
        if (S.empty() || g.dot(d) >= 0.0) {
            S.clear();
            Y.clear();
            rho.clear();
            d = -g.cwiseProduct(free);
            const double dmax = d.cwiseAbs().maxCoeff();
            if (dmax > 0.0) step = std::min(1.0, opt.initial_step / dmax);
        }

        bool accepted = false;
        Eigen::VectorXd x_new, g_new(n);
        double f_new = 0.0;
        for (int ls = 0; ls < 30; ++ls) {
            x_new = project(x + step * d, lo, hi);
            f_new = f(x_new, nullptr);
            ++res.evaluations;
            if (std::isfinite(f_new) && f_new <= fx + 1e-4 * g.dot(x_new - x)) {
                accepted = true;
                break;
            }
            step *= 0.5;
        }
        if (!accepted || (x_new - x).cwiseAbs().maxCoeff() == 0.0) {
            if (S.empty()) break;  // even steepest descent cannot make progress
            S.clear();
            Y.clear();
            rho.clear();
            continue;
        }

        f_new = f(x_new, &g_new);
        ++res.evaluations;
        const Eigen::VectorXd s = x_new - x;
        const Eigen::VectorXd y = g_new - g;
        const double sy = s.dot(y);
        if (sy > 1e-12 * y.squaredNorm() && sy > 0.0) {
            S.push_back(s);
            Y.push_back(y);
            rho.push_back(1.0 / sy);
            if (static_cast<int>(S.size()) > opt.memory) {
                S.pop_front();
                Y.pop_front();
                rho.pop_front();
            }
        }
        x = x_new;
        g = g_new;
        fx = f_new;
    }
    res.projected_gradient = projected_gradient_norm(x, g, lo, hi);
    res.x = x;
    res.value = fx;
    return res;
}

/// Objective and constraint evaluation. When `want_gradients` is false only
/// `value` and `constraints` need to be filled.
struct Evaluation {
    double value = 0.0;
    Eigen::VectorXd gradient;
    Eigen::VectorXd constraints;
    Eigen::MatrixXd jacobian;  // rows: constraints
};

using ConstrainedObjective = std::function<void(const Eigen::VectorXd&, bool want_gradients, Evaluation&)>;

struct AugmentedLagrangianOptions {
    int max_outer = 25;
    BoxOptions inner;
    double feasibility_tol = 1e-6;
    double optimality_tol = 1e-6;
    double initial_penalty = 10.0;
    double max_penalty = 1e10;
    int max_evaluations = 1 << 30;  // shared across all inner solves
};

struct AugmentedLagrangianResult {
    Eigen::VectorXd x;
    double value = 0.0;
    Eigen::VectorXd constraints;
    Eigen::VectorXd multipliers;
    double max_violation = 0.0;
    int outer_iterations = 0;
    int evaluations = 0;
    bool converged = false;
};

/// Powell-Hestenes-Rockafellar augmented Lagrangian for
///   min f(x)  s.t.  c(x) <= 0,  lo <= x <= hi.
inline AugmentedLagrangianResult minimize_constrained(const ConstrainedObjective& eval, int num_constraints,
                                                      Eigen::VectorXd x, const Eigen::VectorXd& lo,
                                                      const Eigen::VectorXd& hi,
                                                      const AugmentedLagrangianOptions& opt = {}) {
    AugmentedLagrangianResult res;
    Eigen::VectorXd lambda = Eigen::VectorXd::Zero(num_constraints);
    double penalty = opt.initial_penalty;
    double prev_measure = std::numeric_limits<double>::infinity();
    Evaluation ev;

    for (res.outer_iterations = 0; res.outer_iterations < opt.max_outer && res.evaluations < opt.max_evaluations;
         ++res.outer_iterations) {
        const Objective lagrangian = [&](const Eigen::VectorXd& z, Eigen::VectorXd* grad) {
            eval(z, grad != nullptr, ev);
            double L = ev.value;
            Eigen::VectorXd shifted = (lambda + penalty * ev.constraints).cwiseMax(0.0);
            for (int i = 0; i < num_constraints; ++i) {
                L += (shifted(i) * shifted(i) - lambda(i) * lambda(i)) / (2.0 * penalty);
            }
            if (grad) *grad = ev.gradient + ev.jacobian.transpose() * shifted;
            return L;
        };
        BoxOptions inner_opt = opt.inner;
        inner_opt.max_evaluations = std::min(inner_opt.max_evaluations, opt.max_evaluations - res.evaluations);
        const BoxResult inner = minimize_box(lagrangian, x, lo, hi, inner_opt);
        res.evaluations += inner.evaluations;
        x = inner.x;

        eval(x, false, ev);
        ++res.evaluations;
        const Eigen::VectorXd c = ev.constraints;
        double measure = 0.0;
        for (int i = 0; i < num_constraints; ++i) {
            measure = std::max(measure, std::abs(std::min(-c(i), lambda(i) / penalty)));
        }
        lambda = (lambda + penalty * c).cwiseMax(0.0);
        const double violation = num_constraints > 0 ? std::max(0.0, c.maxCoeff()) : 0.0;

        if (violation <= opt.feasibility_tol && measure <= opt.feasibility_tol &&
            inner.projected_gradient <= opt.optimality_tol) {
            res.converged = true;
            ++res.outer_iterations;
            break;
        }
        if (measure > 0.25 * prev_measure) penalty = std::min(penalty * 10.0, opt.max_penalty);
        prev_measure = measure;
    }

    eval(x, false, ev);
    ++res.evaluations;
    res.x = x;
    res.value = ev.value;
    res.constraints = ev.constraints;
    res.multipliers = lambda;
    res.max_violation = num_constraints > 0 ? std::max(0.0, ev.constraints.maxCoeff()) : 0.0;
    return res;
}

} // namespace strata::local
