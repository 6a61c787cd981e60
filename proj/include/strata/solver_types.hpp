#pragma once

#include "strata/dynamics.hpp"
#include "strata/objectives.hpp"

#include <cmath>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

namespace strata {

/// Thresholds and search settings for the settle-time optimization.
/// eps1 bounds E1 (squared trait residual), eps2 bounds E2 (squared steady-state
/// drift over `nu`), eps_var bounds ||Var_Y||_F^2.
struct OptimizerConfig {
    double eps1 = 1.0;
    double eps2 = 1.0;
    double eps_var = 1.0;
    double nu = 2.0;
    int meta_iterations = 20;
    double step_scale = 0.5;
    int local_max_iters = 200;
    std::uint64_t seed = 0;

    friend bool operator==(const OptimizerConfig&, const OptimizerConfig&) = default;
};

inline void validate_config(const OptimizerConfig& c) {
    auto positive = [](double v) { return std::isfinite(v) && v > 0.0; };
    require(positive(c.eps1) && positive(c.eps2) && positive(c.eps_var), ErrorKind::InvalidArgument,
            "eps1, eps2 and eps_var must be positive");
    require(positive(c.nu), ErrorKind::InvalidArgument, "nu must be positive");
    require(c.meta_iterations > 0 && c.local_max_iters > 0, ErrorKind::InvalidArgument,
            "iteration counts must be positive");
    require(positive(c.step_scale), ErrorKind::InvalidArgument, "step_scale must be positive");
}

inline constexpr const char* kTraitErrorResidual = "trait_error";
inline constexpr const char* kSteadyStateResidual = "steady_state";
inline constexpr const char* kVarianceResidual = "variance_norm";

struct SolveReport {
    RatePlan plan;
    Goal goal = Goal::ExactMatching;
    bool converged = false;
    std::map<std::string, double> residuals;
    std::map<std::string, double> bounds;
    double wall_time = 0.0;
    int restarts_used = 0;
    /// settle time of the best feasible point after each meta iteration (+inf until one is found)
    std::vector<double> best_history;
    int gradient_fallbacks = 0;
};

} // namespace strata
