#pragma once

#include <functional>
#include <vector>

#include "contime/gru.hpp"
#include "contime/spline.hpp"

namespace contime {

enum class Direction { Forward, Backward };

struct IntegrationConfig {
    double step = 1.0;
    Direction direction = Direction::Forward;
    double t_start = 0.0;
    double t_end = 0.0;

    /// Grid-aligned step count; throws ConfigError on misaligned spans.
    int num_steps() const;
    double signed_step() const { return direction == Direction::Forward ? step : -step; }
    void validate() const;
};

/// Per-step record of (t, h, dh/dt) for one integration direction.
struct HiddenTrajectory {
    std::vector<double> times;
    std::vector<ad::Var> states;
    std::vector<ad::Var> state_derivs;

    const ad::Var& terminal_state() const { return states.back(); }
    const ad::Var& terminal_deriv() const { return state_derivs.back(); }
};

using VectorField = std::function<ad::Var(double t, const ad::Var& h)>;

/// Classical RK4 update. Throws DivergenceError on a non-finite stage.
ad::Var rk4_step(const VectorField& field, double t, const ad::Var& h, double step);

/// Generic fixed-step RK4 loop over an externally supplied field (the field
/// itself defines any lag handling).
HiddenTrajectory integrate_field(const VectorField& field, const ad::Var& h0, const IntegrationConfig& cfg);

/// Continuous GRU field with a caller-prescribed lag trajectory. Used where
/// the dynamics must stay fixed while the step changes (order studies).
VectorField make_gru_field(const GruCellVars& cell, const ContinuousPath& path,
                           std::function<LagState(double t)> lag_at);

/// Integrates the hidden state with the committed-lag rule: tau equals the
/// solver step, and (h_lag, dh_lag) for a whole step are the committed state
/// and derivative of the previous step, frozen across the RK4 stages.
HiddenTrajectory integrate_hidden(const GruCellVars& cell, const ContinuousPath& path, const ad::Var& h0,
                                  const IntegrationConfig& cfg);

} // namespace contime
