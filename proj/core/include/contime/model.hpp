#pragma once

#include <random>
#include <string>

#include "contime/integrate.hpp"
#include "contime/norm.hpp"

namespace contime {

/// Affine feature extractor (F -> H).
struct AffineParams {
    Tensor W;
    Tensor b;
    static AffineParams init(int out_dim, int in_dim, std::mt19937_64& rng);
};

struct ModelDims {
    int hidden_dim = 0;
    int input_len = 0; // T
    int pred_len = 0;  // P
    int features = 0;  // F
    double solver_step = 1.0;
};

/// All trainable tensors of the model.
struct ContimeParams {
    AffineParams phi1, phi2;   // feature extractors for the two directions
    GruCellParams cell1, cell2; // independent forward / backward cells
    Tensor head_W;              // (P*F) x H
    Tensor head_b;              // P*F
    ModelDims dims;

    static ContimeParams init(const ModelDims& dims, std::mt19937_64& rng);
    void validate() const;

    /// Stable field order, shared by the optimizer and checkpoint format.
    std::vector<Tensor*> tensors();
    std::vector<const Tensor*> tensors() const;
    static std::vector<std::string> tensor_names();
};

struct ContimeVars {
    ad::Var phi1_W, phi1_b, phi2_W, phi2_b;
    GruCellVars cell1, cell2;
    ad::Var head_W, head_b;

    static ContimeVars bind(ad::Tape& tape, const ContimeParams& p);
    static ContimeVars wrap(const ContimeParams& p);
    std::vector<ad::Var> leaves() const;
};

struct ForecastVars {
    ad::Var y_hat;    // P x F
    ad::Var y_hat_dt; // P x F
    ad::Var h_terminal;
    ad::Var dh_terminal;
};

struct ForecastOutput {
    Tensor y_hat;
    Tensor y_hat_dt;
    Tensor h_terminal;
    Tensor dh_terminal;
};

/// Full forward pass: feature extraction, bi-directional integration,
/// reverse layer, summation, prediction head, head-derivative output.
ForecastVars forward(const ContimeVars& vars, const ModelDims& dims, const TimeSeriesSample& sample);

/// Eager convenience wrapper.
ForecastOutput forward(const ContimeParams& params, const TimeSeriesSample& sample);

/// shifted[i] = y_hat[i] + (last_obs - y_hat[0]); anchors row 0 to the last
/// observation.
Tensor apply_shift(const Tensor& y_hat, const Tensor& last_obs);
ad::Var apply_shift(const ad::Var& y_hat, const Tensor& last_obs);

/// Difference targets: row 0 = y[0] - last_obs, row i = y[i] - y[i-1].
Tensor target_differences(const Tensor& y, const Tensor& last_obs);

/// Self-describing model checkpoint (JSON). Round-trips bit-exactly.
struct Checkpoint {
    ContimeParams params;
    NormStats norm;
    bool shift = true;
    std::string config_hash;

    void save(const std::string& path) const;
    static Checkpoint load(const std::string& path);
};

} // namespace contime
