#pragma once

#include "strata/config.hpp"
#include "strata/dynamics.hpp"
#include "strata/error.hpp"
#include "strata/expm.hpp"
#include "strata/model.hpp"

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>

#include <cmath>
#include <complex>
#include <vector>

namespace strata {

enum class Goal { ExactMatching, MinimumMatching };

inline const char* to_string(Goal goal) { return goal == Goal::ExactMatching ? "exact" : "minimum"; }

namespace detail {

inline void check_inputs(double tau, const std::vector<Eigen::MatrixXd>& Ks, const AbstractState& x0) {
    require(std::isfinite(tau) && tau >= 0.0, ErrorKind::InvalidArgument, "tau must be finite and nonnegative");
    require(static_cast<int>(Ks.size()) == x0.num_species(), ErrorKind::DimensionMismatch,
            "one rate matrix per species required");
    for (const auto& K : Ks) {
        require(K.rows() == x0.num_tasks() && K.cols() == x0.num_tasks(), ErrorKind::DimensionMismatch,
                "rate matrix size does not match the number of tasks");
    }
}

inline void check_traits(const AbstractState& x0, const TraitModel& model) {
    require(model.num_species() == x0.num_species(), ErrorKind::DimensionMismatch,
            "state and model disagree on the number of species");
}

inline void check_target(const AbstractState& x0, const TraitModel& model, const Eigen::MatrixXd& target) {
    require(target.rows() == x0.num_tasks() && target.cols() == model.num_traits(), ErrorKind::DimensionMismatch,
            "target must be M x U");
}

inline Eigen::MatrixXd state_at(const std::vector<Eigen::MatrixXd>& Ks, const AbstractState& x0, double t) {
    Eigen::MatrixXd X(x0.num_tasks(), x0.num_species());
    for (int s = 0; s < x0.num_species(); ++s) {
        X.col(s) = matrix_exponential(Ks[static_cast<std::size_t>(s)], t) * x0.counts().col(s);
    }
    return X;
}

inline Eigen::MatrixXd trait_residual(const Eigen::MatrixXd& X, const TraitModel& model,
                                      const Eigen::MatrixXd& target, Goal goal) {
    Eigen::MatrixXd R = target - X * model.mean();
    if (goal == Goal::MinimumMatching) R = R.cwiseMax(0.0);
    return R;
}

} // namespace detail

/// ||Y* - mu_Y(tau)||_F^2.
inline double error_exact(double tau, const std::vector<Eigen::MatrixXd>& Ks, const AbstractState& x0,
                          const TraitModel& model, const Eigen::MatrixXd& target) {
    detail::check_inputs(tau, Ks, x0);
    detail::check_traits(x0, model);
    detail::check_target(x0, model, target);
    return detail::trait_residual(detail::state_at(Ks, x0, tau), model, target, Goal::ExactMatching).squaredNorm();
}

/// ||max(Y* - mu_Y(tau), 0)||_F^2; over-provisioning costs nothing.
inline double error_minimum(double tau, const std::vector<Eigen::MatrixXd>& Ks, const AbstractState& x0,
                            const TraitModel& model, const Eigen::MatrixXd& target) {
    detail::check_inputs(tau, Ks, x0);
    detail::check_traits(x0, model);
    detail::check_target(x0, model, target);
    return detail::trait_residual(detail::state_at(Ks, x0, tau), model, target, Goal::MinimumMatching).squaredNorm();
}

inline double trait_error(Goal goal, double tau, const std::vector<Eigen::MatrixXd>& Ks, const AbstractState& x0,
                          const TraitModel& model, const Eigen::MatrixXd& target) {
    return goal == Goal::ExactMatching ? error_exact(tau, Ks, x0, model, target)
                                       : error_minimum(tau, Ks, x0, model, target);
}

/// Sum over species of ||x(tau) - x(tau + nu)||^2.
inline double error_steady(double tau, const std::vector<Eigen::MatrixXd>& Ks, const AbstractState& x0, double nu) {
    detail::check_inputs(tau, Ks, x0);
    require(std::isfinite(nu) && nu > 0.0, ErrorKind::InvalidArgument, "nu must be positive");
    return (detail::state_at(Ks, x0, tau) - detail::state_at(Ks, x0, tau + nu)).squaredNorm();
}

/// ||Var_Y(tau)||_F^2 with Var_Y = (X o X) Var_Q.
inline double variance_norm(double tau, const std::vector<Eigen::MatrixXd>& Ks, const AbstractState& x0,
                            const TraitModel& model) {
    detail::check_inputs(tau, Ks, x0);
    detail::check_traits(x0, model);
    const Eigen::MatrixXd X = detail::state_at(Ks, x0, tau);
    return (X.cwiseAbs2() * model.variance()).squaredNorm();
}

/// Eigendecomposition K = V diag(D) V^{-1} used to differentiate e^{K t}.
/// `diagonalizable` is false when V is too ill-conditioned to trust.
struct GradientWorkspace {
    Eigen::MatrixXcd V;
    Eigen::MatrixXcd V_inv;
    Eigen::VectorXcd D;
    bool diagonalizable = false;
};

inline GradientWorkspace make_gradient_workspace(const Eigen::MatrixXd& K) {
    GradientWorkspace ws;
    Eigen::EigenSolver<Eigen::MatrixXd> solver(K, true);
    if (solver.info() != Eigen::Success) return ws;
    ws.V = solver.eigenvectors();
    ws.D = solver.eigenvalues();
    Eigen::PartialPivLU<Eigen::MatrixXcd> lu(ws.V);
    ws.V_inv = lu.inverse();
    if (!ws.V_inv.allFinite()) return ws;

    const double norm_v = ws.V.cwiseAbs().colwise().sum().maxCoeff();
    const double norm_vinv = ws.V_inv.cwiseAbs().colwise().sum().maxCoeff();
    const double scale = std::max(1.0, K.cwiseAbs().maxCoeff());
    const double recon = (ws.V * ws.D.asDiagonal() * ws.V_inv - K.cast<std::complex<double>>()).cwiseAbs().maxCoeff();
    ws.diagonalizable =
        norm_v * norm_vinv <= kTolerances.eigen_condition_limit && recon <= kTolerances.eigen_reconstruction * scale;
    return ws;
}

/// W(t): divided differences of exp at the scaled eigenvalues d_k t, with the
/// diagonal (and near-coincident pairs) set to e^{d_k t}.
inline Eigen::MatrixXcd divided_difference_matrix(const Eigen::VectorXcd& D, double t) {
    using C = std::complex<double>;
    const auto M = D.size();
    Eigen::MatrixXcd W(M, M);
    auto phi = [](C z) {
        if (std::abs(z) < 1e-3) return C(1.0) + z / 2.0 + z * z / 6.0 + z * z * z / 24.0 + z * z * z * z / 120.0;
        return (std::exp(z) - C(1.0)) / z;
    };
    for (Eigen::Index k = 0; k < M; ++k) {
        for (Eigen::Index l = 0; l < M; ++l) {
            const C ak = D(k) * t;
            const C al = D(l) * t;
            if (k == l || std::abs(D(k) - D(l)) * t < kTolerances.divided_difference_limit) {
                W(k, l) = std::exp(ak);
            } else {
                W(k, l) = std::exp(al) * phi(ak - al);
            }
        }
    }
    return W;
}

namespace detail {

// d f / d(Kt) given G = d f / d e^{Kt}.
inline Eigen::MatrixXd pullback(const GradientWorkspace& ws, const Eigen::MatrixXd& K, double t,
                                const Eigen::MatrixXd& G) {
    if (!ws.diagonalizable) return expm_frechet((K * t).transpose(), G);
    const Eigen::MatrixXcd Gc = G.cast<std::complex<double>>();
    const Eigen::MatrixXcd B = (ws.V.transpose() * Gc * ws.V_inv.transpose()).cwiseProduct(divided_difference_matrix(ws.D, t));
    return (ws.V_inv.transpose() * B * ws.V.transpose()).real();
}

} // namespace detail

/// Value and gradient of one constraint function with respect to every K^(s)
/// (entrywise, as if all M x M entries were free) and tau.
struct GradientTerm {
    double value = 0.0;
    std::vector<Eigen::MatrixXd> d_rate_matrix;
    double d_tau = 0.0;
};

struct ConstraintGradients {
    GradientTerm trait_error;
    GradientTerm steady_state;
    GradientTerm variance_norm;
    bool used_fallback = false;
};

/// Analytical gradients of E1 (goal-specific), E2 and ||Var_Y||_F^2. The outer
/// derivative with respect to each e^{K^(s) t} is pulled back through the
/// eigendecomposition: d/dK = V^{-T} [(V^T G V^{-T}) o W] V^T t, and d/dtau is
/// the Frobenius pairing of d/d(Kt) with K. Defective K falls back to the exact
/// block-matrix Frechet derivative.
inline ConstraintGradients constraint_gradients(double tau, const std::vector<Eigen::MatrixXd>& Ks,
                                                const AbstractState& x0, const TraitModel& model,
                                                const Eigen::MatrixXd& target, Goal goal, double nu) {
    detail::check_inputs(tau, Ks, x0);
    detail::check_traits(x0, model);
    detail::check_target(x0, model, target);
    require(std::isfinite(nu) && nu > 0.0, ErrorKind::InvalidArgument, "nu must be positive");

    const int M = x0.num_tasks();
    const int S = x0.num_species();
    const double tau_late = tau + nu;
    const Eigen::MatrixXd& x0m = x0.counts();

    std::vector<Eigen::MatrixXd> E_now(static_cast<std::size_t>(S)), E_late(static_cast<std::size_t>(S));
    Eigen::MatrixXd X(M, S), X_late(M, S);
    for (int s = 0; s < S; ++s) {
        const auto& K = Ks[static_cast<std::size_t>(s)];
        E_now[static_cast<std::size_t>(s)] = matrix_exponential(K, tau);
        E_late[static_cast<std::size_t>(s)] = matrix_exponential(K, tau_late);
        X.col(s) = E_now[static_cast<std::size_t>(s)] * x0m.col(s);
        X_late.col(s) = E_late[static_cast<std::size_t>(s)] * x0m.col(s);
    }

    ConstraintGradients out;
    const Eigen::MatrixXd R = detail::trait_residual(X, model, target, goal);
    const Eigen::MatrixXd var_y = X.cwiseAbs2() * model.variance();
    const Eigen::MatrixXd diff = X - X_late;
    out.trait_error.value = R.squaredNorm();
    out.variance_norm.value = var_y.squaredNorm();
    out.steady_state.value = diff.squaredNorm();

    // d f / d X for the two functions of X(tau).
    const Eigen::MatrixXd dX_trait = -2.0 * R * model.mean().transpose();
    const Eigen::MatrixXd dX_var = 4.0 * (var_y * model.variance().transpose()).cwiseProduct(X);

    for (auto* term : {&out.trait_error, &out.steady_state, &out.variance_norm}) {
        term->d_rate_matrix.assign(static_cast<std::size_t>(S), Eigen::MatrixXd::Zero(M, M));
    }

    for (int s = 0; s < S; ++s) {
        const auto& K = Ks[static_cast<std::size_t>(s)];
        const Eigen::VectorXd z = x0m.col(s);
        const GradientWorkspace ws = make_gradient_workspace(K);
        if (!ws.diagonalizable) out.used_fallback = true;

        auto accumulate = [&](GradientTerm& term, const Eigen::MatrixXd& G, double t) {
            const Eigen::MatrixXd P = detail::pullback(ws, K, t, G);
            term.d_rate_matrix[static_cast<std::size_t>(s)] += t * P;
            term.d_tau += P.cwiseProduct(K).sum();
        };

        accumulate(out.trait_error, dX_trait.col(s) * z.transpose(), tau);
        accumulate(out.variance_norm, dX_var.col(s) * z.transpose(), tau);
        const Eigen::MatrixXd G_steady = 2.0 * diff.col(s) * z.transpose();
        accumulate(out.steady_state, G_steady, tau);
        accumulate(out.steady_state, -G_steady, tau_late);
    }
    return out;
}

/// Chain rule from entrywise d/dK^(s) to the per-edge rates (S x |edges|):
/// k_ij enters K(j,i) with +1 and K(i,i) with -1.
inline Eigen::MatrixXd rate_gradient(const TaskGraph& graph, const std::vector<Eigen::MatrixXd>& dK) {
    Eigen::MatrixXd g(static_cast<Eigen::Index>(dK.size()), graph.num_edges());
    for (std::size_t s = 0; s < dK.size(); ++s) {
        for (int e = 0; e < graph.num_edges(); ++e) {
            const auto& edge = graph.edges()[static_cast<std::size_t>(e)];
            g(static_cast<Eigen::Index>(s), e) = dK[s](edge.to, edge.from) - dK[s](edge.from, edge.from);
        }
    }
    return g;
}

} // namespace strata
