#pragma once

#include <string>
#include <vector>

#include "contime/norm.hpp"
#include "contime/spline.hpp"

namespace contime {

/// Parsed CSV: a date column kept for reporting plus numeric feature columns.
struct RawTable {
    std::vector<std::string> dates;
    std::vector<std::string> feature_names;
    Tensor values; // N x F
};

RawTable load_csv(const std::string& path);

struct SplitRanges {
    int train_begin = 0, train_end = 0;
    int val_begin = 0, val_end = 0;
    int test_begin = 0, test_end = 0;
    int train_len() const { return train_end - train_begin; }
    int val_len() const { return val_end - val_begin; }
    int test_len() const { return test_end - test_begin; }
};

/// Contiguous, temporally ordered 70/10/20 split (floor rule, remainder to test).
SplitRanges split_70_10_20(int rows);

struct Dataset {
    std::string name;
    std::vector<std::string> feature_names;
    Tensor train, val, test; // standardized rows
    NormStats norm;          // fitted on train only
    int features() const { return train.cols; }
};

/// Split + z-score a raw table; throws ConfigError on constant features.
Dataset make_dataset(std::string name, const RawTable& raw);

/// One training/evaluation window. Input times are normalized to 0..T-1.
struct Window {
    TimeSeriesSample input; // T x F
    Tensor target;          // P x F
    Tensor last_obs;        // F (final input row)
};

std::vector<Window> make_windows(const Tensor& split, int input_len, int pred_len, int stride = 1);

/// Seeded univariate sinusoid with random regime flips: lag-one copying gets
/// a low MSE but a high TDI. flip_rate 0 degenerates to a pure sinusoid.
Dataset synth_lagged_regime(int length, int period, unsigned seed, double flip_rate = 0.01);

/// Raw (pre-standardization) series of the synthetic generator, for tests.
std::vector<double> synth_lagged_regime_series(int length, int period, unsigned seed, double flip_rate = 0.01);

} // namespace contime
