#pragma once

#include <span>
#include <string>
#include <vector>

#include "contime/data.hpp"
#include "contime/model.hpp"

namespace contime {

enum class LossMode { TaskOnly, TaskDelta, TaskTdi };

struct LossConfig {
    double alpha = 0.9;
    double beta = 0.1;
    LossMode mode = LossMode::TaskDelta;
    double gamma = 0.01; // soft-DTW temperature for TaskTdi

    void validate() const;
};

struct TrainConfig {
    double learning_rate = 0.005;
    int epochs = 100;
    int batch_size = 32;
    unsigned seed = 0;
    int hidden_dim = 16;
    int input_len = 36;
    int pred_len = 12;
    double solver_step = 1.0;
    bool shift = true;
    double clip_norm = 10.0;

    void validate() const;
};

// Losses operate on Vars so the same code drives training and validation.
ad::Var loss_task(const ad::Var& y_hat, const Tensor& y);
ad::Var loss_delta_t(const ad::Var& y_hat_dt, const Tensor& y_dt);
ad::Var loss_total(const LossConfig& cfg, const ad::Var& task, const ad::Var& aux);

/// Differentiable temporal-distortion surrogate: inner product of the
/// soft-DTW expected alignment with the off-diagonal penalty, built entirely
/// from taped primitives.
ad::Var loss_tdi_soft(const ad::Var& y_hat_seq, std::span<const double> y, double gamma);

struct AdamState {
    std::vector<Tensor> m, v;
    long step = 0;
    double beta1 = 0.9, beta2 = 0.999, eps = 1e-8;

    static AdamState init(const std::vector<Tensor*>& params);
};

void adam_step(std::vector<Tensor*>& params, const std::vector<Tensor>& grads, AdamState& state, double lr,
               const std::vector<std::string>& names);

/// Scales gradients in place so their global L2 norm is at most max_norm.
void clip_global_norm(std::vector<Tensor>& grads, double max_norm);

struct EpochRecord {
    int epoch = 0;
    double train_loss = 0.0;
    double val_loss = 0.0;
    double task = 0.0;
    double delta_t = 0.0;
    long wall_ms = 0;
};

std::string history_to_jsonl(const std::vector<EpochRecord>& history);

struct TrainResult {
    ContimeParams best_params;
    int best_epoch = -1;
    double best_val_loss = 0.0;
    std::vector<EpochRecord> history;
};

struct LossParts {
    double total = 0.0, task = 0.0, aux = 0.0;
};

/// Loss of one set of windows under fixed parameters (no tape).
LossParts evaluate_loss(const ContimeParams& params, const std::vector<Window>& windows, const TrainConfig& tcfg,
                        const LossConfig& lcfg);

/// Mini-batch Adam training with per-epoch validation; returns the parameter
/// snapshot of the epoch with minimum validation loss.
TrainResult train(const std::vector<Window>& train_windows, const std::vector<Window>& val_windows,
                  const ContimeParams& initial, const TrainConfig& tcfg, const LossConfig& lcfg);

} // namespace contime
