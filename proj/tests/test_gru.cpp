#include <doctest.h>

#include <cmath>
#include <random>

#include "contime/gru.hpp"

using namespace contime;
using ad::Var;

namespace {

GruCellParams random_cell(int H, int F, unsigned seed) {
    std::mt19937_64 rng(seed);
    return GruCellParams::init(H, F, rng);
}

Tensor smooth_vec(int n, double t, double phase) {
    Tensor v(n, 1);
    for (int i = 0; i < n; ++i) v[i] = std::sin(0.7 * t + phase + 0.3 * i);
    return v;
}

Tensor smooth_vec_dt(int n, double t, double phase) {
    Tensor v(n, 1);
    for (int i = 0; i < n; ++i) v[i] = 0.7 * std::cos(0.7 * t + phase + 0.3 * i);
    return v;
}

} // namespace

TEST_CASE("zero weights center the gates") {
    GruCellParams p;
    p.W_z = p.W_r = p.W_g = Tensor(3, 2);
    p.U_z = p.U_r = p.U_g = Tensor(3, 3);
    p.b_z = p.b_r = p.b_g = Tensor(3, 1);
    const auto cell = GruCellVars::wrap(p);
    const LagState lag{ad::constant(smooth_vec(3, 0.4, 0.0)), ad::constant(Tensor(3, 1))};
    const auto gs = gate_states(cell, ad::constant(smooth_vec(2, 0.4, 1.0)), lag);
    for (int i = 0; i < 3; ++i) {
        CHECK(gs.z.value()[i] == 0.5);
        CHECK(gs.r.value()[i] == 0.5);
        CHECK(gs.g.value()[i] == 0.0);
        CHECK(gs.zeta.value()[i] == lag.h_lag.value()[i]);
    }
}

TEST_CASE("gates stay in range under random inputs") {
    const auto p = random_cell(4, 3, 21);
    const auto cell = GruCellVars::wrap(p);
    std::mt19937_64 rng(22);
    std::uniform_real_distribution<double> dist(-5.0, 5.0);
    for (int trial = 0; trial < 200; ++trial) {
        Tensor x(3, 1), hl(4, 1);
        for (int i = 0; i < 3; ++i) x[i] = dist(rng);
        for (int i = 0; i < 4; ++i) hl[i] = dist(rng);
        const auto gs = gate_states(cell, ad::constant(x), {ad::constant(hl), ad::constant(Tensor(4, 1))});
        for (int i = 0; i < 4; ++i) {
            CHECK(gs.z.value()[i] > 0.0);
            CHECK(gs.z.value()[i] < 1.0);
            CHECK(gs.r.value()[i] > 0.0);
            CHECK(gs.r.value()[i] < 1.0);
            CHECK(std::abs(gs.g.value()[i]) < 1.0);
        }
    }
}

TEST_CASE("saturating pre-activations pin the gates") {
    GruCellParams p;
    p.W_z = p.W_r = p.W_g = Tensor(2, 1);
    p.U_z = p.U_r = p.U_g = Tensor(2, 2);
    p.b_z = Tensor::vec({50.0, -50.0});
    p.b_r = Tensor::vec({-50.0, 50.0});
    p.b_g = Tensor::vec({50.0, -50.0});
    const auto cell = GruCellVars::wrap(p);
    const auto gs = gate_states(cell, ad::constant(Tensor(1, 1)),
                                {ad::constant(Tensor(2, 1)), ad::constant(Tensor(2, 1))});
    CHECK(gs.z.value()[0] == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(gs.z.value()[1] == doctest::Approx(0.0).epsilon(1e-12));
    CHECK(gs.r.value()[0] == doctest::Approx(0.0).epsilon(1e-12));
    CHECK(gs.g.value()[0] == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(gs.g.value()[1] == doctest::Approx(-1.0).epsilon(1e-12));
}

TEST_CASE("gate time-derivatives match finite differences along a smooth trajectory") {
    const int H = 4, F = 3;
    const auto p = random_cell(H, F, 31);
    const auto cell = GruCellVars::wrap(p);

    auto gates_at = [&](double t) {
        const LagState lag{ad::constant(smooth_vec(H, t, 2.0)), ad::constant(smooth_vec_dt(H, t, 2.0))};
        return gate_states(cell, ad::constant(smooth_vec(F, t, 0.0)), lag);
    };

    const double h = 1e-5;
    for (double t : {0.0, 0.4, 1.3, 2.9}) {
        const LagState lag{ad::constant(smooth_vec(H, t, 2.0)), ad::constant(smooth_vec_dt(H, t, 2.0))};
        const Var x = ad::constant(smooth_vec(F, t, 0.0));
        const Var dx = ad::constant(smooth_vec_dt(F, t, 0.0));
        const auto gs = gates_at(t);
        const auto gd = gate_derivatives(cell, x, dx, lag, gs);
        const auto plus = gates_at(t + h);
        const auto minus = gates_at(t - h);
        for (int i = 0; i < H; ++i) {
            const double fz = (plus.z.value()[i] - minus.z.value()[i]) / (2 * h);
            const double fr = (plus.r.value()[i] - minus.r.value()[i]) / (2 * h);
            const double fg = (plus.g.value()[i] - minus.g.value()[i]) / (2 * h);
            CHECK(gd.dz_dt.value()[i] == doctest::Approx(fz).epsilon(1e-4));
            CHECK(gd.dr_dt.value()[i] == doctest::Approx(fr).epsilon(1e-4));
            CHECK(gd.dg_dt.value()[i] == doctest::Approx(fg).epsilon(1e-4));
        }
    }
}

TEST_CASE("hidden derivative is the exact derivative of z(.)zeta + g") {
    const int H = 3, F = 2;
    const auto p = random_cell(H, F, 41);
    const auto cell = GruCellVars::wrap(p);

    // h(t) = z(t) (.) (h_lag(t) - g(t)) + g(t), all driven by smooth signals.
    auto h_of = [&](double t) {
        const LagState lag{ad::constant(smooth_vec(H, t, 1.5)), ad::constant(smooth_vec_dt(H, t, 1.5))};
        const auto gs = gate_states(cell, ad::constant(smooth_vec(F, t, 0.2)), lag);
        Tensor out(H, 1);
        for (int i = 0; i < H; ++i)
            out[i] = gs.z.value()[i] * gs.zeta.value()[i] + gs.g.value()[i];
        return out;
    };

    const double fd_h = 1e-5;
    for (double t : {0.3, 1.1, 2.7}) {
        const LagState lag{ad::constant(smooth_vec(H, t, 1.5)), ad::constant(smooth_vec_dt(H, t, 1.5))};
        const Var x = ad::constant(smooth_vec(F, t, 0.2));
        const Var dx = ad::constant(smooth_vec_dt(F, t, 0.2));
        const auto gs = gate_states(cell, x, lag);
        const auto gd = gate_derivatives(cell, x, dx, lag, gs);
        const Var dh = hidden_derivative(gs, gd, lag);
        const Tensor hp = h_of(t + fd_h), hm = h_of(t - fd_h);
        for (int i = 0; i < H; ++i) {
            const double fd = (hp[i] - hm[i]) / (2 * fd_h);
            CHECK(dh.value()[i] == doctest::Approx(fd).epsilon(1e-4));
        }
    }
}

TEST_CASE("hidden derivative is bounded when inputs are bounded") {
    const auto p = random_cell(5, 2, 51);
    const auto cell = GruCellVars::wrap(p);
    std::mt19937_64 rng(52);
    std::uniform_real_distribution<double> dist(-1.0, 1.0);
    double worst = 0.0;
    for (int trial = 0; trial < 300; ++trial) {
        Tensor x(2, 1), dx(2, 1), hl(5, 1), dhl(5, 1);
        for (int i = 0; i < 2; ++i) { x[i] = dist(rng); dx[i] = dist(rng); }
        for (int i = 0; i < 5; ++i) { hl[i] = dist(rng); dhl[i] = dist(rng); }
        const LagState lag{ad::constant(hl), ad::constant(dhl)};
        const auto gs = gate_states(cell, ad::constant(x), lag);
        const auto gd = gate_derivatives(cell, ad::constant(x), ad::constant(dx), lag, gs);
        const Var dh = hidden_derivative(gs, gd, lag);
        CHECK(dh.value().all_finite());
        for (int i = 0; i < 5; ++i) worst = std::max(worst, std::abs(dh.value()[i]));
    }
    // crude Lipschitz-style bound for unit-box inputs and init-scale weights
    CHECK(worst < 50.0);
}

TEST_CASE("cell parameter validation") {
    auto p = random_cell(3, 2, 61);
    CHECK_NOTHROW(p.validate());
    p.U_r = Tensor(2, 3);
    CHECK_THROWS_AS(p.validate(), ShapeError);
}
