#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <random>

#include "contime/model.hpp"

using namespace contime;

namespace {

ModelDims small_dims() {
    ModelDims d;
    d.hidden_dim = 4;
    d.input_len = 6;
    d.pred_len = 3;
    d.features = 2;
    d.solver_step = 1.0;
    return d;
}

TimeSeriesSample sample_for(const ModelDims& d, unsigned seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> dist(-1.0, 1.0);
    TimeSeriesSample s;
    Tensor vals(d.input_len, d.features);
    for (int i = 0; i < d.input_len; ++i) {
        s.times.push_back(static_cast<double>(i));
        for (int j = 0; j < d.features; ++j) vals(i, j) = dist(rng);
    }
    s.values = vals;
    return s;
}

} // namespace

TEST_CASE("forward output shapes") {
    const auto dims = small_dims();
    std::mt19937_64 rng(201);
    const auto params = ContimeParams::init(dims, rng);
    const auto out = forward(params, sample_for(dims, 1));
    CHECK(out.y_hat.rows == dims.pred_len);
    CHECK(out.y_hat.cols == dims.features);
    CHECK(out.y_hat_dt.rows == dims.pred_len);
    CHECK(out.y_hat_dt.cols == dims.features);
    CHECK(out.h_terminal.rows == dims.hidden_dim);
    CHECK(out.y_hat.all_finite());
}

TEST_CASE("zero head gives bias-only prediction and zero derivative output") {
    const auto dims = small_dims();
    std::mt19937_64 rng(202);
    auto params = ContimeParams::init(dims, rng);
    params.head_W = Tensor(dims.pred_len * dims.features, dims.hidden_dim);
    params.head_b = Tensor(dims.pred_len * dims.features, 1);
    for (int i = 0; i < params.head_b.rows; ++i) params.head_b[i] = 0.25 * i;
    const auto out = forward(params, sample_for(dims, 2));
    for (int i = 0; i < dims.pred_len; ++i)
        for (int j = 0; j < dims.features; ++j) {
            CHECK(out.y_hat(i, j) == doctest::Approx(0.25 * (i * dims.features + j)));
            CHECK(out.y_hat_dt(i, j) == 0.0); // head bias never reaches the derivative output
        }
}

TEST_CASE("prediction equals head applied to the summed terminal states") {
    const auto dims = small_dims();
    std::mt19937_64 rng(203);
    const auto params = ContimeParams::init(dims, rng);
    const auto out = forward(params, sample_for(dims, 3));
    const Tensor flat = matvec_value(params.head_W, out.h_terminal);
    for (int i = 0; i < dims.pred_len; ++i)
        for (int j = 0; j < dims.features; ++j) {
            const int k = i * dims.features + j;
            CHECK(out.y_hat(i, j) == doctest::Approx(flat[k] + params.head_b[k]).epsilon(1e-12));
        }
    const Tensor dflat = matvec_value(params.head_W, out.dh_terminal);
    for (int i = 0; i < dims.pred_len; ++i)
        for (int j = 0; j < dims.features; ++j)
            CHECK(out.y_hat_dt(i, j) == doctest::Approx(dflat[i * dims.features + j]).epsilon(1e-12));
}

TEST_CASE("the two cells are not interchangeable") {
    const auto dims = small_dims();
    std::mt19937_64 rng(204);
    auto params = ContimeParams::init(dims, rng);
    const auto base = forward(params, sample_for(dims, 4));
    std::swap(params.cell1, params.cell2);
    const auto swapped = forward(params, sample_for(dims, 4));
    double diff = 0.0;
    for (int k = 0; k < base.y_hat.size(); ++k) diff = std::max(diff, std::abs(base.y_hat[k] - swapped.y_hat[k]));
    CHECK(diff > 1e-9);
}

TEST_CASE("shift anchors the first step to the last observation") {
    const Tensor y_hat(3, 2, {1.0, 2.0, 1.5, 2.5, 2.0, 3.0});
    const Tensor last = Tensor::vec({0.5, 4.0});
    const Tensor shifted = apply_shift(y_hat, last);
    CHECK(shifted(0, 0) == 0.5);
    CHECK(shifted(0, 1) == 4.0);
    // the correction is constant across the horizon
    CHECK(shifted(2, 0) == doctest::Approx(2.0 + (0.5 - 1.0)));
    CHECK(shifted(2, 1) == doctest::Approx(3.0 + (4.0 - 2.0)));
    // shifting an already anchored forecast is a no-op
    const Tensor twice = apply_shift(shifted, last);
    for (int k = 0; k < twice.size(); ++k) CHECK(twice[k] == shifted[k]);
    // tracked version agrees with the tensor version
    ad::Tape tape;
    const ad::Var yv = tape.leaf(y_hat);
    const Tensor via_var = apply_shift(yv, last).value();
    for (int k = 0; k < via_var.size(); ++k) CHECK(via_var[k] == doctest::Approx(shifted[k]).epsilon(1e-14));
}

TEST_CASE("difference targets telescope back to the series") {
    const Tensor y(3, 2, {1.0, 5.0, 2.5, 4.0, 2.0, 6.0});
    const Tensor last = Tensor::vec({0.5, 4.5});
    const Tensor d = target_differences(y, last);
    CHECK(d(0, 0) == doctest::Approx(0.5));
    CHECK(d(0, 1) == doctest::Approx(0.5));
    for (int j = 0; j < 2; ++j) {
        double acc = last[j];
        for (int i = 0; i < 3; ++i) {
            acc += d(i, j);
            CHECK(acc == doctest::Approx(y(i, j)).epsilon(1e-14));
        }
    }
}

TEST_CASE("forward is deterministic") {
    const auto dims = small_dims();
    std::mt19937_64 rng(205);
    const auto params = ContimeParams::init(dims, rng);
    const auto s = sample_for(dims, 5);
    const auto a = forward(params, s);
    const auto b = forward(params, s);
    for (int k = 0; k < a.y_hat.size(); ++k) CHECK(a.y_hat[k] == b.y_hat[k]);
    for (int k = 0; k < a.y_hat_dt.size(); ++k) CHECK(a.y_hat_dt[k] == b.y_hat_dt[k]);
}

TEST_CASE("parameter order is stable and named") {
    const auto dims = small_dims();
    std::mt19937_64 rng(206);
    auto params = ContimeParams::init(dims, rng);
    const auto names = ContimeParams::tensor_names();
    CHECK(params.tensors().size() == names.size());
    ad::Tape tape;
    const auto vars = ContimeVars::bind(tape, params);
    CHECK(vars.leaves().size() == names.size());
    // leaves() mirrors tensors() so optimizer slots line up by index
    const auto ptrs = params.tensors();
    const auto leaves = vars.leaves();
    for (std::size_t k = 0; k < ptrs.size(); ++k) {
        CHECK(leaves[k].value().rows == ptrs[k]->rows);
        CHECK(leaves[k].value().cols == ptrs[k]->cols);
        CHECK(leaves[k].value()[0] == (*ptrs[k])[0]);
    }
}

TEST_CASE("checkpoint round-trips bit-exactly") {
    const auto dims = small_dims();
    std::mt19937_64 rng(207);
    Checkpoint ck;
    ck.params = ContimeParams::init(dims, rng);
    ck.norm.mean = {0.123456789012345, -3.25};
    ck.norm.stddev = {1.0 / 3.0, 2.718281828459045};
    ck.shift = false;
    ck.config_hash = "abc123";

    const std::string path = "checkpoint_roundtrip_test.json";
    ck.save(path);
    const auto back = Checkpoint::load(path);
    std::remove(path.c_str());

    CHECK(back.shift == false);
    CHECK(back.config_hash == "abc123");
    CHECK(back.params.dims.hidden_dim == dims.hidden_dim);
    CHECK(back.params.dims.solver_step == dims.solver_step);
    const auto a = ck.params.tensors();
    const auto b = back.params.tensors();
    REQUIRE(a.size() == b.size());
    for (std::size_t k = 0; k < a.size(); ++k) {
        REQUIRE(a[k]->size() == b[k]->size());
        for (int i = 0; i < a[k]->size(); ++i) CHECK((*a[k])[i] == (*b[k])[i]);
    }
    for (int i = 0; i < 2; ++i) {
        CHECK(back.norm.mean[i] == ck.norm.mean[i]);
        CHECK(back.norm.stddev[i] == ck.norm.stddev[i]);
    }
    // a loaded model predicts identically
    const auto s = sample_for(dims, 7);
    const auto y0 = forward(ck.params, s);
    const auto y1 = forward(back.params, s);
    for (int k = 0; k < y0.y_hat.size(); ++k) CHECK(y0.y_hat[k] == y1.y_hat[k]);
}

TEST_CASE("validation rejects inconsistent dimensions") {
    const auto dims = small_dims();
    std::mt19937_64 rng(208);
    auto params = ContimeParams::init(dims, rng);
    CHECK_NOTHROW(params.validate());
    params.head_W = Tensor(2, 2);
    CHECK_THROWS_AS(params.validate(), ShapeError);
}

TEST_CASE("forward rejects a sample with the wrong length") {
    const auto dims = small_dims();
    std::mt19937_64 rng(209);
    const auto params = ContimeParams::init(dims, rng);
    auto bad = sample_for(dims, 9);
    bad.times.pop_back();
    Tensor vals(dims.input_len - 1, dims.features);
    for (int i = 0; i < vals.rows; ++i)
        for (int j = 0; j < vals.cols; ++j) vals(i, j) = bad.values(i, j);
    bad.values = vals;
    CHECK_THROWS_AS(forward(params, bad), ConfigError);
}
