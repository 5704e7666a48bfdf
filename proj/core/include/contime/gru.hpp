#pragma once

#include <random>

#include "contime/autodiff.hpp"
#include "contime/tensor.hpp"

namespace contime {

/// Weights of one continuous GRU cell.
struct GruCellParams {
    Tensor W_z, W_r, W_g; // H x F
    Tensor U_z, U_r, U_g; // H x H
    Tensor b_z, b_r, b_g; // H

    int hidden_dim() const { return W_z.rows; }
    int input_dim() const { return W_z.cols; }

    /// Uniform [-1/sqrt(H)] for U, [-1/sqrt(F)] for W, zero biases.
    static GruCellParams init(int hidden_dim, int input_dim, std::mt19937_64& rng);
    void validate() const;
};

/// Tape-bound (or constant) view of the cell weights.
struct GruCellVars {
    ad::Var W_z, W_r, W_g, U_z, U_r, U_g, b_z, b_r, b_g;

    static GruCellVars bind(ad::Tape& tape, const GruCellParams& p);
    static GruCellVars wrap(const GruCellParams& p); // untracked constants
};

struct LagState {
    ad::Var h_lag;  // h(t - tau)
    ad::Var dh_lag; // dh(t - tau)/dt
};

struct GateState {
    ad::Var A, B, C; // pre-activations
    ad::Var z, r, g;
    ad::Var zeta; // h_lag - g
};

struct GateDerivs {
    ad::Var dz_dt, dg_dt, dr_dt;
};

GateState gate_states(const GruCellVars& cell, const ad::Var& x, const LagState& lag);

/// Closed-form time-derivatives of the gates. dr/dt is evaluated first since
/// dB/dt consumes it.
GateDerivs gate_derivatives(const GruCellVars& cell, const ad::Var& x, const ad::Var& dx_dt, const LagState& lag,
                            const GateState& gates);

/// dh/dt = dz/dt (.) zeta + z (.) (dh_lag - dg/dt) + dg/dt
ad::Var hidden_derivative(const GateState& gates, const GateDerivs& derivs, const LagState& lag);

} // namespace contime
