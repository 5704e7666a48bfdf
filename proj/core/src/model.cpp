#include "contime/model.hpp"

#include <fstream>

#include <json.hpp>

namespace contime {

using nlohmann::json;

AffineParams AffineParams::init(int out_dim, int in_dim, std::mt19937_64& rng) {
    std::uniform_real_distribution<double> dist(-1.0 / std::sqrt(in_dim), 1.0 / std::sqrt(in_dim));
    AffineParams p;
    p.W = Tensor(out_dim, in_dim);
    for (int i = 0; i < p.W.size(); ++i) p.W[i] = dist(rng);
    p.b = Tensor::zeros(out_dim);
    return p;
}

ContimeParams ContimeParams::init(const ModelDims& dims, std::mt19937_64& rng) {
    if (dims.hidden_dim < 1 || dims.input_len < 2 || dims.pred_len < 1 || dims.features < 1)
        throw ConfigError("ContimeParams::init: bad dims");
    ContimeParams p;
    p.dims = dims;
    p.phi1 = AffineParams::init(dims.hidden_dim, dims.features, rng);
    p.phi2 = AffineParams::init(dims.hidden_dim, dims.features, rng);
    p.cell1 = GruCellParams::init(dims.hidden_dim, dims.features, rng);
    p.cell2 = GruCellParams::init(dims.hidden_dim, dims.features, rng);
    const int out = dims.pred_len * dims.features;
    std::uniform_real_distribution<double> dist(-1.0 / std::sqrt(dims.hidden_dim), 1.0 / std::sqrt(dims.hidden_dim));
    p.head_W = Tensor(out, dims.hidden_dim);
    for (int i = 0; i < p.head_W.size(); ++i) p.head_W[i] = dist(rng);
    p.head_b = Tensor::zeros(out);
    return p;
}

void ContimeParams::validate() const {
    cell1.validate();
    cell2.validate();
    const int H = dims.hidden_dim;
    const int out = dims.pred_len * dims.features;
    if (phi1.W.rows != H || phi1.W.cols != dims.features || phi2.W.rows != H || phi2.W.cols != dims.features)
        throw ShapeError("feature extractor shape mismatch");
    if (head_W.rows != out || head_W.cols != H || head_b.rows != out)
        throw ShapeError("prediction head must map H -> P*F");
}

std::vector<Tensor*> ContimeParams::tensors() {
    std::vector<Tensor*> out;
    for (GruCellParams* c : {&cell1, &cell2})
        for (Tensor* t : {&c->W_z, &c->W_r, &c->W_g, &c->U_z, &c->U_r, &c->U_g, &c->b_z, &c->b_r, &c->b_g})
            out.push_back(t);
    out.push_back(&phi1.W);
    out.push_back(&phi1.b);
    out.push_back(&phi2.W);
    out.push_back(&phi2.b);
    out.push_back(&head_W);
    out.push_back(&head_b);
    return out;
}

std::vector<const Tensor*> ContimeParams::tensors() const {
    auto mut = const_cast<ContimeParams*>(this)->tensors();
    return {mut.begin(), mut.end()};
}

std::vector<std::string> ContimeParams::tensor_names() {
    std::vector<std::string> names;
    for (const char* c : {"cell1", "cell2"})
        for (const char* t : {"W_z", "W_r", "W_g", "U_z", "U_r", "U_g", "b_z", "b_r", "b_g"})
            names.push_back(std::string(c) + "." + t);
    names.insert(names.end(), {"phi1.W", "phi1.b", "phi2.W", "phi2.b", "head.W", "head.b"});
    return names;
}

ContimeVars ContimeVars::bind(ad::Tape& tape, const ContimeParams& p) {
    ContimeVars v;
    v.phi1_W = tape.leaf(p.phi1.W);
    v.phi1_b = tape.leaf(p.phi1.b);
    v.phi2_W = tape.leaf(p.phi2.W);
    v.phi2_b = tape.leaf(p.phi2.b);
    v.cell1 = GruCellVars::bind(tape, p.cell1);
    v.cell2 = GruCellVars::bind(tape, p.cell2);
    v.head_W = tape.leaf(p.head_W);
    v.head_b = tape.leaf(p.head_b);
    return v;
}

ContimeVars ContimeVars::wrap(const ContimeParams& p) {
    using ad::constant;
    ContimeVars v;
    v.phi1_W = constant(p.phi1.W);
    v.phi1_b = constant(p.phi1.b);
    v.phi2_W = constant(p.phi2.W);
    v.phi2_b = constant(p.phi2.b);
    v.cell1 = GruCellVars::wrap(p.cell1);
    v.cell2 = GruCellVars::wrap(p.cell2);
    v.head_W = constant(p.head_W);
    v.head_b = constant(p.head_b);
    return v;
}

std::vector<ad::Var> ContimeVars::leaves() const {
    std::vector<ad::Var> out;
    for (const GruCellVars* c : {&cell1, &cell2})
        for (const ad::Var* v : {&c->W_z, &c->W_r, &c->W_g, &c->U_z, &c->U_r, &c->U_g, &c->b_z, &c->b_r, &c->b_g})
            out.push_back(*v);
    out.insert(out.end(), {phi1_W, phi1_b, phi2_W, phi2_b, head_W, head_b});
    return out;
}

ForecastVars forward(const ContimeVars& vars, const ModelDims& dims, const TimeSeriesSample& sample) {
    using namespace ad;
    if (sample.length() != dims.input_len)
        throw ConfigError("sample length " + std::to_string(sample.length()) + " != configured input_len " +
                          std::to_string(dims.input_len));
    if (sample.features() != dims.features) throw ConfigError("sample feature count mismatch");

    const ContinuousPath path = ContinuousPath::fit_hermite(sample);
    const double t_first = sample.times.front();
    const double t_last = sample.times.back();

    std::vector<double> first_row(static_cast<std::size_t>(dims.features)), last_row(first_row);
    for (int f = 0; f < dims.features; ++f) {
        first_row[static_cast<std::size_t>(f)] = sample.values(0, f);
        last_row[static_cast<std::size_t>(f)] = sample.values(sample.length() - 1, f);
    }

    const Var h1_0 = add(matvec(vars.phi1_W, constant(Tensor::vec(first_row))), vars.phi1_b);
    const Var h2_0 = add(matvec(vars.phi2_W, constant(Tensor::vec(last_row))), vars.phi2_b);

    IntegrationConfig fwd{dims.solver_step, Direction::Forward, t_first, t_last};
    IntegrationConfig bwd{dims.solver_step, Direction::Backward, t_last, t_first};

    const HiddenTrajectory traj1 = integrate_hidden(vars.cell1, path, h1_0, fwd);
    const HiddenTrajectory traj2 = integrate_hidden(vars.cell2, path, h2_0, bwd);

    // Reverse layer: the backward trajectory read in forward order ends at
    // its own terminal state h2(T - s).
    ForecastVars out;
    out.h_terminal = add(traj1.terminal_state(), traj2.terminal_state());
    out.dh_terminal = traj1.terminal_deriv();

    const Var y_flat = add(matvec(vars.head_W, out.h_terminal), vars.head_b);
    const Var ydt_flat = matvec(vars.head_W, out.dh_terminal); // bias drops out of the derivative
    out.y_hat = reshape(y_flat, dims.pred_len, dims.features);
    out.y_hat_dt = reshape(ydt_flat, dims.pred_len, dims.features);
    return out;
}

ForecastOutput forward(const ContimeParams& params, const TimeSeriesSample& sample) {
    const ForecastVars v = forward(ContimeVars::wrap(params), params.dims, sample);
    return ForecastOutput{v.y_hat.value(), v.y_hat_dt.value(), v.h_terminal.value(), v.dh_terminal.value()};
}

Tensor apply_shift(const Tensor& y_hat, const Tensor& last_obs) {
    if (last_obs.rows != y_hat.cols || last_obs.cols != 1)
        throw ShapeError("apply_shift: last_obs " + last_obs.shape_str() + " vs prediction " + y_hat.shape_str());
    Tensor out = y_hat;
    for (int f = 0; f < y_hat.cols; ++f) {
        const double shift = last_obs[f] - y_hat(0, f);
        for (int i = 0; i < y_hat.rows; ++i) out(i, f) += shift;
    }
    return out;
}

ad::Var apply_shift(const ad::Var& y_hat, const Tensor& last_obs) {
    using namespace ad;
    if (last_obs.rows != y_hat.cols() || last_obs.cols != 1)
        throw ShapeError("apply_shift: last_obs " + last_obs.shape_str() + " vs prediction " + y_hat.value().shape_str());
    std::vector<int> row0(static_cast<std::size_t>(y_hat.cols()));
    for (int f = 0; f < y_hat.cols(); ++f) row0[static_cast<std::size_t>(f)] = f;
    const Var shift = sub(constant(last_obs), gather(y_hat, row0));
    return add_rowbcast(y_hat, shift);
}

Tensor target_differences(const Tensor& y, const Tensor& last_obs) {
    if (last_obs.rows != y.cols || last_obs.cols != 1)
        throw ShapeError("target_differences: last_obs " + last_obs.shape_str() + " vs target " + y.shape_str());
    Tensor out(y.rows, y.cols);
    for (int f = 0; f < y.cols; ++f) {
        out(0, f) = y(0, f) - last_obs[f];
        for (int i = 1; i < y.rows; ++i) out(i, f) = y(i, f) - y(i - 1, f);
    }
    return out;
}

namespace {

json tensor_to_json(const Tensor& t) {
    return json{{"rows", t.rows}, {"cols", t.cols}, {"data", t.data}};
}

Tensor tensor_from_json(const json& j) {
    return Tensor(j.at("rows").get<int>(), j.at("cols").get<int>(), j.at("data").get<std::vector<double>>());
}

} // namespace

void Checkpoint::save(const std::string& path) const {
    json j;
    j["format"] = "contime-checkpoint-v1";
    j["dims"] = {{"hidden_dim", params.dims.hidden_dim}, {"input_len", params.dims.input_len},
                 {"pred_len", params.dims.pred_len},     {"features", params.dims.features},
                 {"solver_step", params.dims.solver_step}};
    json tensors = json::object();
    auto names = ContimeParams::tensor_names();
    auto ptrs = params.tensors();
    for (std::size_t i = 0; i < names.size(); ++i) tensors[names[i]] = tensor_to_json(*ptrs[i]);
    j["tensors"] = tensors;
    j["shift"] = shift;
    j["config_hash"] = config_hash;
    if (!norm.empty()) j["norm"] = {{"mean", norm.mean}, {"stddev", norm.stddev}};

    std::ofstream out(path);
    if (!out) throw IngestError("cannot write checkpoint " + path);
    out << j.dump(2) << "\n";
}

Checkpoint Checkpoint::load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IngestError("cannot read checkpoint " + path);
    json j = json::parse(in);
    if (j.value("format", "") != std::string("contime-checkpoint-v1"))
        throw IngestError("unrecognized checkpoint format in " + path);

    Checkpoint ck;
    const json& d = j.at("dims");
    ck.params.dims = ModelDims{d.at("hidden_dim").get<int>(), d.at("input_len").get<int>(), d.at("pred_len").get<int>(),
                               d.at("features").get<int>(), d.at("solver_step").get<double>()};
    auto names = ContimeParams::tensor_names();
    auto ptrs = ck.params.tensors();
    for (std::size_t i = 0; i < names.size(); ++i) *ptrs[i] = tensor_from_json(j.at("tensors").at(names[i]));
    ck.shift = j.value("shift", true);
    ck.config_hash = j.value("config_hash", "");
    if (j.contains("norm")) {
        ck.norm.mean = j["norm"].at("mean").get<std::vector<double>>();
        ck.norm.stddev = j["norm"].at("stddev").get<std::vector<double>>();
    }
    ck.params.validate();
    return ck;
}

} // namespace contime
