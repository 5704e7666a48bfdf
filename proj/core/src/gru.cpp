#include "contime/gru.hpp"

#include <cmath>

namespace contime {

namespace {

Tensor uniform_init(int rows, int cols, double bound, std::mt19937_64& rng) {
    std::uniform_real_distribution<double> dist(-bound, bound);
    Tensor t(rows, cols);
    for (int i = 0; i < t.size(); ++i) t[i] = dist(rng);
    return t;
}

} // namespace

GruCellParams GruCellParams::init(int hidden_dim, int input_dim, std::mt19937_64& rng) {
    const double wb = 1.0 / std::sqrt(static_cast<double>(input_dim));
    const double ub = 1.0 / std::sqrt(static_cast<double>(hidden_dim));
    GruCellParams p;
    p.W_z = uniform_init(hidden_dim, input_dim, wb, rng);
    p.W_r = uniform_init(hidden_dim, input_dim, wb, rng);
    p.W_g = uniform_init(hidden_dim, input_dim, wb, rng);
    p.U_z = uniform_init(hidden_dim, hidden_dim, ub, rng);
    p.U_r = uniform_init(hidden_dim, hidden_dim, ub, rng);
    p.U_g = uniform_init(hidden_dim, hidden_dim, ub, rng);
    p.b_z = Tensor::zeros(hidden_dim);
    p.b_r = Tensor::zeros(hidden_dim);
    p.b_g = Tensor::zeros(hidden_dim);
    return p;
}

void GruCellParams::validate() const {
    const int H = hidden_dim();
    const int F = input_dim();
    auto req = [](const Tensor& t, int r, int c, const char* name) {
        if (t.rows != r || t.cols != c)
            throw ShapeError(std::string("GruCellParams::") + name + " is " + t.shape_str() + ", expected " +
                             std::to_string(r) + "x" + std::to_string(c));
        if (!t.all_finite()) throw NumericError(std::string("GruCellParams::") + name + " has non-finite entries");
    };
    req(W_z, H, F, "W_z");
    req(W_r, H, F, "W_r");
    req(W_g, H, F, "W_g");
    req(U_z, H, H, "U_z");
    req(U_r, H, H, "U_r");
    req(U_g, H, H, "U_g");
    req(b_z, H, 1, "b_z");
    req(b_r, H, 1, "b_r");
    req(b_g, H, 1, "b_g");
}

GruCellVars GruCellVars::bind(ad::Tape& tape, const GruCellParams& p) {
    return GruCellVars{tape.leaf(p.W_z), tape.leaf(p.W_r), tape.leaf(p.W_g), tape.leaf(p.U_z), tape.leaf(p.U_r),
                       tape.leaf(p.U_g), tape.leaf(p.b_z), tape.leaf(p.b_r), tape.leaf(p.b_g)};
}

GruCellVars GruCellVars::wrap(const GruCellParams& p) {
    using ad::constant;
    return GruCellVars{constant(p.W_z), constant(p.W_r), constant(p.W_g), constant(p.U_z), constant(p.U_r),
                       constant(p.U_g), constant(p.b_z), constant(p.b_r), constant(p.b_g)};
}

GateState gate_states(const GruCellVars& cell, const ad::Var& x, const LagState& lag) {
    using namespace ad;
    GateState s;
    s.A = add(add(matvec(cell.W_z, x), matvec(cell.U_z, lag.h_lag)), cell.b_z);
    s.C = add(add(matvec(cell.W_r, x), matvec(cell.U_r, lag.h_lag)), cell.b_r);
    s.r = sigmoid(s.C);
    s.B = add(add(matvec(cell.W_g, x), matvec(cell.U_g, mul(s.r, lag.h_lag))), cell.b_g);
    s.z = sigmoid(s.A);
    s.g = tanh_v(s.B);
    s.zeta = sub(lag.h_lag, s.g);
    return s;
}

GateDerivs gate_derivatives(const GruCellVars& cell, const ad::Var& x, const ad::Var& dx_dt, const LagState& lag,
                            const GateState& gates) {
    using namespace ad;
    GateDerivs d;
    const Var dA = add(matvec(cell.W_z, dx_dt), matvec(cell.U_z, lag.dh_lag));
    const Var dC = add(matvec(cell.W_r, dx_dt), matvec(cell.U_r, lag.dh_lag));
    d.dr_dt = mul(mul(gates.r, rsub_scalar(1.0, gates.r)), dC);
    const Var dB = add(matvec(cell.W_g, dx_dt),
                       add(matvec(cell.U_g, mul(d.dr_dt, lag.h_lag)), matvec(cell.U_g, mul(gates.r, lag.dh_lag))));
    d.dz_dt = mul(mul(gates.z, rsub_scalar(1.0, gates.z)), dA);
    d.dg_dt = mul(rsub_scalar(1.0, square(gates.g)), dB);
    return d;
}

ad::Var hidden_derivative(const GateState& gates, const GateDerivs& derivs, const LagState& lag) {
    using namespace ad;
    return add(add(mul(derivs.dz_dt, gates.zeta), mul(gates.z, sub(lag.dh_lag, derivs.dg_dt))), derivs.dg_dt);
}

} // namespace contime
