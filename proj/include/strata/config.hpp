#pragma once

namespace strata {

/// Numerical tolerances shared by the dynamics and verification code.
struct Tolerances {
    double generator_column_sum = 1e-12;   // |1^T K| for built rate matrices
    double stochastic_column_sum = 1e-10;  // |1^T e^{Kt} - 1|
    double stochastic_entry_slack = 1e-10; // e^{Kt} entries >= -slack
    double conservation_relative = 1e-9;   // population drift / N_s
    double state_negative_slack = 1e-12;   // propagated counts clamped above -slack
    double eigen_reconstruction = 1e-8;    // |V D V^-1 - K| / max(1, |K|)
    double eigen_condition_limit = 1e8;    // cond(V) beyond which K is treated as defective
    double divided_difference_limit = 1e-8; // |d_k - d_l| tau below which W uses the limit
};

inline constexpr Tolerances kTolerances{};

} // namespace strata
