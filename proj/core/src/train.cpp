#include "contime/train.hpp"

#include "contime/metrics.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>
#include <random>
#include <sstream>

#include <json.hpp>

namespace contime {

using ad::Var;

void LossConfig::validate() const {
    if (alpha < 0.0 || beta < 0.0) throw ConfigError("loss coefficients must be non-negative");
    if (alpha + beta <= 0.0) throw ConfigError("alpha + beta must be positive");
    if (mode == LossMode::TaskTdi && gamma <= 0.0) throw ConfigError("gamma must be positive for the TDI loss");
}

void TrainConfig::validate() const {
    if (learning_rate <= 0.0) throw ConfigError("learning rate must be positive");
    if (epochs < 0) throw ConfigError("epochs must be >= 0");
    if (batch_size < 1) throw ConfigError("batch size must be >= 1");
    if (hidden_dim < 1 || input_len < 2 || pred_len < 1) throw ConfigError("bad model dimensions");
    if (solver_step <= 0.0) throw ConfigError("solver step must be positive");
}

Var loss_task(const Var& y_hat, const Tensor& y) {
    check_same_shape(y_hat.value(), y, "loss_task");
    return ad::mean(ad::square(ad::sub(y_hat, ad::constant(y))));
}

Var loss_delta_t(const Var& y_hat_dt, const Tensor& y_dt) {
    check_same_shape(y_hat_dt.value(), y_dt, "loss_delta_t");
    return ad::mean(ad::square(ad::sub(y_hat_dt, ad::constant(y_dt))));
}

Var loss_total(const LossConfig& cfg, const Var& task, const Var& aux) {
    if (cfg.mode == LossMode::TaskOnly) return ad::scale(task, cfg.alpha);
    return ad::add(ad::scale(task, cfg.alpha), ad::scale(aux, cfg.beta));
}

Var loss_tdi_soft(const Var& y_hat_seq, std::span<const double> y, double gamma) {
    using namespace ad;
    if (gamma <= 0.0) throw ConfigError("loss_tdi_soft: gamma must be positive");
    const int n = y_hat_seq.value().size();
    if (n != static_cast<int>(y.size())) throw ShapeError("loss_tdi_soft: length mismatch");
    if (n == 1) return scale(square(at(y_hat_seq, 0)), 0.0); // 1x1 penalty matrix is zero

    const Tensor omega = penalty_matrix(n);

    // Taped cost matrix Delta(i,j) = (yhat_i - y_j)^2.
    std::vector<Var> delta(static_cast<std::size_t>(n) * n);
    auto D = [&](int i, int j) -> Var& { return delta[static_cast<std::size_t>(i) * n + j]; };
    for (int i = 0; i < n; ++i) {
        const Var yi = at(y_hat_seq, i);
        for (int j = 0; j < n; ++j) D(i, j) = square(sub(yi, constant(y[static_cast<std::size_t>(j)])));
    }

    // Soft-min accumulated cost.
    std::vector<Var> r(static_cast<std::size_t>(n) * n);
    auto R = [&](int i, int j) -> Var& { return r[static_cast<std::size_t>(i) * n + j]; };
    R(0, 0) = D(0, 0);
    for (int i = 1; i < n; ++i) R(i, 0) = add(R(i - 1, 0), D(i, 0));
    for (int j = 1; j < n; ++j) R(0, j) = add(R(0, j - 1), D(0, j));
    for (int i = 1; i < n; ++i)
        for (int j = 1; j < n; ++j)
            R(i, j) = add(D(i, j), softmin3(R(i - 1, j - 1), R(i - 1, j), R(i, j - 1), gamma));

    // Expected alignment via the reverse recursion; every step stays on the
    // tape so the loss is differentiable end to end.
    const double inv_gamma = 1.0 / gamma;
    std::vector<Var> e(static_cast<std::size_t>(n) * n);
    auto E = [&](int i, int j) -> Var& { return e[static_cast<std::size_t>(i) * n + j]; };
    auto weight_into = [&](int si, int sj, int i, int j) {
        // transition weight from predecessor (i,j) to successor (si,sj)
        return exp_v(scale(sub(sub(R(si, sj), R(i, j)), D(si, sj)), inv_gamma));
    };
    E(n - 1, n - 1) = constant(1.0);
    for (int i = n - 1; i >= 0; --i)
        for (int j = n - 1; j >= 0; --j) {
            if (i == n - 1 && j == n - 1) continue;
            Var acc = constant(0.0);
            if (i + 1 < n) acc = add(acc, mul(E(i + 1, j), weight_into(i + 1, j, i, j)));
            if (j + 1 < n) acc = add(acc, mul(E(i, j + 1), weight_into(i, j + 1, i, j)));
            if (i + 1 < n && j + 1 < n) acc = add(acc, mul(E(i + 1, j + 1), weight_into(i + 1, j + 1, i, j)));
            E(i, j) = acc;
        }

    Var loss = constant(0.0);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j)
            if (omega(i, j) != 0.0) loss = add(loss, scale(E(i, j), omega(i, j)));
    return loss;
}

AdamState AdamState::init(const std::vector<Tensor*>& params) {
    AdamState s;
    for (const Tensor* p : params) {
        s.m.push_back(Tensor::zeros(p->rows, p->cols));
        s.v.push_back(Tensor::zeros(p->rows, p->cols));
    }
    return s;
}

void adam_step(std::vector<Tensor*>& params, const std::vector<Tensor>& grads, AdamState& state, double lr,
               const std::vector<std::string>& names) {
    if (params.size() != grads.size() || params.size() != state.m.size())
        throw ShapeError("adam_step: parameter/gradient count mismatch");
    ++state.step;
    const double bc1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.step));
    const double bc2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.step));
    for (std::size_t k = 0; k < params.size(); ++k) {
        Tensor& p = *params[k];
        const Tensor& g = grads[k];
        check_same_shape(p, g, "adam_step");
        if (!g.all_finite()) {
            const std::string name = k < names.size() ? names[k] : ("param#" + std::to_string(k));
            throw NumericError("non-finite gradient for " + name);
        }
        Tensor& m = state.m[k];
        Tensor& v = state.v[k];
        for (int i = 0; i < p.size(); ++i) {
            m[i] = state.beta1 * m[i] + (1.0 - state.beta1) * g[i];
            v[i] = state.beta2 * v[i] + (1.0 - state.beta2) * g[i] * g[i];
            const double mhat = m[i] / bc1;
            const double vhat = v[i] / bc2;
            p[i] -= lr * mhat / (std::sqrt(vhat) + state.eps);
        }
    }
}

void clip_global_norm(std::vector<Tensor>& grads, double max_norm) {
    double sq = 0.0;
    for (const Tensor& g : grads) sq += dot(g, g);
    const double norm = std::sqrt(sq);
    if (norm <= max_norm || norm == 0.0) return;
    const double s = max_norm / norm;
    for (Tensor& g : grads)
        for (int i = 0; i < g.size(); ++i) g[i] *= s;
}

namespace {

struct SampleLoss {
    Var total, task, aux;
};

/// Forward + loss for one window, on whatever tape the vars live on.
SampleLoss sample_loss(const ContimeVars& vars, const ModelDims& dims, const Window& w, const TrainConfig& tcfg,
                       const LossConfig& lcfg) {
    const ForecastVars out = forward(vars, dims, w.input);
    const Var y_used = tcfg.shift ? apply_shift(out.y_hat, w.last_obs) : out.y_hat;

    SampleLoss l;
    l.task = loss_task(y_used, w.target);
    switch (lcfg.mode) {
        case LossMode::TaskOnly:
            l.aux = ad::constant(0.0);
            break;
        case LossMode::TaskDelta:
            l.aux = loss_delta_t(out.y_hat_dt, target_differences(w.target, w.last_obs));
            break;
        case LossMode::TaskTdi: {
            // Per feature channel, averaged across F. The shift cancels in
            // neither term here, so use the same prediction as the task loss.
            Var acc = ad::constant(0.0);
            const int P = dims.pred_len, F = dims.features;
            std::vector<double> truth(static_cast<std::size_t>(P));
            for (int f = 0; f < F; ++f) {
                std::vector<int> idx(static_cast<std::size_t>(P));
                for (int i = 0; i < P; ++i) idx[static_cast<std::size_t>(i)] = i * F + f;
                for (int i = 0; i < P; ++i) truth[static_cast<std::size_t>(i)] = w.target(i, f);
                acc = ad::add(acc, loss_tdi_soft(ad::gather(y_used, idx), truth, lcfg.gamma));
            }
            l.aux = ad::scale(acc, 1.0 / F);
            break;
        }
    }
    l.total = loss_total(lcfg, l.task, l.aux);
    return l;
}

ModelDims dims_from(const TrainConfig& tcfg, int features) {
    return ModelDims{tcfg.hidden_dim, tcfg.input_len, tcfg.pred_len, features, tcfg.solver_step};
}

} // namespace

LossParts evaluate_loss(const ContimeParams& params, const std::vector<Window>& windows, const TrainConfig& tcfg,
                        const LossConfig& lcfg) {
    if (windows.empty()) throw ConfigError("evaluate_loss: no windows");
    const ContimeVars vars = ContimeVars::wrap(params);
    LossParts parts;
    for (const Window& w : windows) {
        const SampleLoss l = sample_loss(vars, params.dims, w, tcfg, lcfg);
        parts.total += l.total.scalar();
        parts.task += l.task.scalar();
        parts.aux += l.aux.scalar();
    }
    const double n = static_cast<double>(windows.size());
    parts.total /= n;
    parts.task /= n;
    parts.aux /= n;
    return parts;
}

std::string history_to_jsonl(const std::vector<EpochRecord>& history) {
    std::ostringstream out;
    for (const EpochRecord& r : history) {
        // wall_ms stays out of the file: reruns of the same config+seed must
        // produce byte-identical histories. Timing goes to the log line.
        nlohmann::json j{{"epoch", r.epoch},
                         {"train_loss", r.train_loss},
                         {"val_loss", r.val_loss},
                         {"task", r.task},
                         {"delta_t", r.delta_t}};
        out << j.dump() << "\n";
    }
    return out.str();
}

TrainResult train(const std::vector<Window>& train_windows, const std::vector<Window>& val_windows,
                  const ContimeParams& initial, const TrainConfig& tcfg, const LossConfig& lcfg) {
    tcfg.validate();
    lcfg.validate();
    if (train_windows.empty() || val_windows.empty()) throw ConfigError("train: empty data");
    initial.validate();

    TrainResult result;
    result.best_params = initial;
    ContimeParams params = initial;
    auto tensor_ptrs = params.tensors();
    const auto names = ContimeParams::tensor_names();
    AdamState adam = AdamState::init(tensor_ptrs);
    std::mt19937_64 rng(tcfg.seed);

    std::vector<std::size_t> order(train_windows.size());
    std::iota(order.begin(), order.end(), std::size_t{0});

    for (int epoch = 0; epoch < tcfg.epochs; ++epoch) {
        const auto t0 = std::chrono::steady_clock::now();
        std::shuffle(order.begin(), order.end(), rng);

        double epoch_total = 0.0, epoch_task = 0.0, epoch_aux = 0.0;
        std::size_t seen = 0;

        for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(tcfg.batch_size)) {
            const std::size_t end = std::min(order.size(), start + static_cast<std::size_t>(tcfg.batch_size));
            ad::Tape tape;
            const ContimeVars vars = ContimeVars::bind(tape, params);

            Var batch_total;
            double batch_task = 0.0, batch_aux = 0.0;
            for (std::size_t k = start; k < end; ++k) {
                const SampleLoss l = sample_loss(vars, params.dims, train_windows[order[k]], tcfg, lcfg);
                batch_total = (k == start) ? l.total : ad::add(batch_total, l.total);
                batch_task += l.task.scalar();
                batch_aux += l.aux.scalar();
            }
            const double bn = static_cast<double>(end - start);
            batch_total = ad::scale(batch_total, 1.0 / bn);

            const std::vector<Tensor> node_grads = tape.backward(batch_total);
            std::vector<Tensor> grads;
            grads.reserve(tensor_ptrs.size());
            for (const ad::Var& leaf : vars.leaves()) grads.push_back(ad::Tape::grad_of(node_grads, leaf));
            clip_global_norm(grads, tcfg.clip_norm);
            adam_step(tensor_ptrs, grads, adam, tcfg.learning_rate, names);

            epoch_total += batch_total.scalar() * bn;
            epoch_task += batch_task;
            epoch_aux += batch_aux;
            seen += end - start;
        }

        const LossParts val = evaluate_loss(params, val_windows, tcfg, lcfg);
        const auto t1 = std::chrono::steady_clock::now();

        EpochRecord rec;
        rec.epoch = epoch;
        rec.train_loss = epoch_total / static_cast<double>(seen);
        rec.val_loss = val.total;
        rec.task = epoch_task / static_cast<double>(seen);
        rec.delta_t = epoch_aux / static_cast<double>(seen);
        rec.wall_ms = std::chrono::duration_cast<std::chrono::milliseconds>(t1 - t0).count();
        result.history.push_back(rec);

        if (result.best_epoch < 0 || val.total < result.best_val_loss) {
            result.best_epoch = epoch;
            result.best_val_loss = val.total;
            result.best_params = params;
        }
    }
    return result;
}

} // namespace contime
