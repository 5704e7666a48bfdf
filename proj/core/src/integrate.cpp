#include "contime/integrate.hpp"

#include <cmath>
#include <string>

namespace contime {

void IntegrationConfig::validate() const {
    if (step <= 0.0) throw ConfigError("integration step must be positive");
    if (direction == Direction::Forward && !(t_start < t_end))
        throw ConfigError("forward integration requires t_start < t_end");
    if (direction == Direction::Backward && !(t_start > t_end))
        throw ConfigError("backward integration requires t_start > t_end");
    num_steps();
}

int IntegrationConfig::num_steps() const {
    const double span = std::abs(t_end - t_start);
    const double n = span / step;
    const double rounded = std::round(n);
    if (rounded < 1.0 || std::abs(n - rounded) > 1e-9)
        throw ConfigError("span " + std::to_string(span) + " is not an integer multiple of step " + std::to_string(step));
    return static_cast<int>(rounded);
}

ad::Var rk4_step(const VectorField& field, double t, const ad::Var& h, double step) {
    using namespace ad;
    auto check = [t](const Var& k, const char* stage) {
        if (!k.value().all_finite())
            throw DivergenceError(std::string("non-finite ") + stage + " at t=" + std::to_string(t));
        return k;
    };
    const Var k1 = check(field(t, h), "k1");
    const Var k2 = check(field(t + 0.5 * step, add(h, scale(k1, 0.5 * step))), "k2");
    const Var k3 = check(field(t + 0.5 * step, add(h, scale(k2, 0.5 * step))), "k3");
    const Var k4 = check(field(t + step, add(h, scale(k3, step))), "k4");
    const Var incr = add(add(k1, k4), scale(add(k2, k3), 2.0));
    return add(h, scale(incr, step / 6.0));
}

HiddenTrajectory integrate_field(const VectorField& field, const ad::Var& h0, const IntegrationConfig& cfg) {
    cfg.validate();
    const int n = cfg.num_steps();
    const double dh = cfg.signed_step();

    HiddenTrajectory traj;
    traj.times.reserve(static_cast<std::size_t>(n) + 1);
    traj.states.reserve(static_cast<std::size_t>(n) + 1);
    traj.state_derivs.reserve(static_cast<std::size_t>(n) + 1);

    traj.times.push_back(cfg.t_start);
    traj.states.push_back(h0);
    traj.state_derivs.push_back(field(cfg.t_start, h0));

    ad::Var h = h0;
    for (int k = 0; k < n; ++k) {
        const double t = cfg.t_start + k * dh;
        h = rk4_step(field, t, h, dh);
        const double t_next = (k + 1 == n) ? cfg.t_end : cfg.t_start + (k + 1) * dh;
        traj.times.push_back(t_next);
        traj.states.push_back(h);
        traj.state_derivs.push_back(field(t_next, h));
    }
    return traj;
}

VectorField make_gru_field(const GruCellVars& cell, const ContinuousPath& path,
                           std::function<LagState(double t)> lag_at) {
    return [cell, &path, lag_at = std::move(lag_at)](double t, const ad::Var& h) {
        (void)h; // the delay formulation reads the lag trajectory, not h itself
        const LagState lag = lag_at(t);
        const ad::Var x = ad::constant(Tensor::vec(path.value(t)));
        const ad::Var dx = ad::constant(Tensor::vec(path.derivative(t)));
        const GateState gates = gate_states(cell, x, lag);
        const GateDerivs derivs = gate_derivatives(cell, x, dx, lag, gates);
        return hidden_derivative(gates, derivs, lag);
    };
}

HiddenTrajectory integrate_hidden(const GruCellVars& cell, const ContinuousPath& path, const ad::Var& h0,
                                  const IntegrationConfig& cfg) {
    cfg.validate();
    const double lo = std::min(cfg.t_start, cfg.t_end);
    const double hi = std::max(cfg.t_start, cfg.t_end);
    if (lo < path.span_begin() - 1e-9 || hi > path.span_end() + 1e-9)
        throw OutOfSpanError("integration range exceeds path span");

    const int n = cfg.num_steps();
    const double dh = cfg.signed_step();

    HiddenTrajectory traj;
    traj.times.reserve(static_cast<std::size_t>(n) + 1);
    traj.states.reserve(static_cast<std::size_t>(n) + 1);
    traj.state_derivs.reserve(static_cast<std::size_t>(n) + 1);

    // No derivative history exists before the window.
    LagState lag{h0, ad::constant(Tensor::zeros(h0.rows()))};
    traj.times.push_back(cfg.t_start);
    traj.states.push_back(h0);
    traj.state_derivs.push_back(lag.dh_lag);

    auto field_with = [&](const LagState& frozen) {
        return [&cell, &path, frozen](double t, const ad::Var& h) {
            (void)h;
            const ad::Var x = ad::constant(Tensor::vec(path.value(t)));
            const ad::Var dx = ad::constant(Tensor::vec(path.derivative(t)));
            const GateState gates = gate_states(cell, x, frozen);
            const GateDerivs derivs = gate_derivatives(cell, x, dx, frozen, gates);
            return hidden_derivative(gates, derivs, frozen);
        };
    };

    ad::Var h = h0;
    for (int k = 0; k < n; ++k) {
        const double t = cfg.t_start + k * dh;
        const double t_next = (k + 1 == n) ? cfg.t_end : cfg.t_start + (k + 1) * dh;
        const VectorField field = field_with(lag);
        const ad::Var h_next = rk4_step(field, t, h, dh);
        if (!h_next.value().all_finite()) throw DivergenceError("hidden state diverged at t=" + std::to_string(t_next));
        // Commit the derivative at t_next under the lag that produced the step.
        const ad::Var d_next = field(t_next, h_next);
        traj.times.push_back(t_next);
        traj.states.push_back(h_next);
        traj.state_derivs.push_back(d_next);
        lag = LagState{h_next, d_next};
        h = h_next;
    }
    return traj;
}

} // namespace contime
