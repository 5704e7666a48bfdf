#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "contime/data.hpp"
#include "contime/metrics.hpp"
#include "contime/model.hpp"
#include "contime/train.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace contime;

namespace {

/// Fully resolved run description: training + loss settings, data source and
/// output directory. Serializable as one JSON document.
struct RunConfig {
    TrainConfig tcfg;
    LossConfig lcfg;
    std::string dataset = "synth";
    std::string out_dir = "out";
    int synth_length = 3000;
    int synth_period = 24;
    double synth_flip_rate = 0.01;

    json to_json() const {
        return json{{"dataset", dataset},
                    {"out", out_dir},
                    {"lr", tcfg.learning_rate},
                    {"epochs", tcfg.epochs},
                    {"batch_size", tcfg.batch_size},
                    {"seed", tcfg.seed},
                    {"hidden_dim", tcfg.hidden_dim},
                    {"input_len", tcfg.input_len},
                    {"pred_len", tcfg.pred_len},
                    {"solver_step", tcfg.solver_step},
                    {"shift", tcfg.shift},
                    {"clip_norm", tcfg.clip_norm},
                    {"alpha", lcfg.alpha},
                    {"beta", lcfg.beta},
                    {"gamma", lcfg.gamma},
                    {"loss_mode", lcfg.mode == LossMode::TaskOnly   ? "task"
                                  : lcfg.mode == LossMode::TaskDelta ? "task_delta"
                                                                     : "task_tdi"},
                    {"synth_length", synth_length},
                    {"synth_period", synth_period},
                    {"synth_flip_rate", synth_flip_rate}};
    }
};

LossMode parse_loss_mode(const std::string& s) {
    if (s == "task") return LossMode::TaskOnly;
    if (s == "task_delta") return LossMode::TaskDelta;
    if (s == "task_tdi") return LossMode::TaskTdi;
    throw ConfigError("unknown loss mode '" + s + "' (expected task, task_delta or task_tdi)");
}

void merge_config_file(RunConfig& rc, const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IngestError("cannot open config " + path);
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw ConfigError(path + ": " + e.what());
    }
    if (j.contains("dataset")) rc.dataset = j["dataset"].get<std::string>();
    if (j.contains("out")) rc.out_dir = j["out"].get<std::string>();
    if (j.contains("lr")) rc.tcfg.learning_rate = j["lr"].get<double>();
    if (j.contains("epochs")) rc.tcfg.epochs = j["epochs"].get<int>();
    if (j.contains("batch_size")) rc.tcfg.batch_size = j["batch_size"].get<int>();
    if (j.contains("seed")) rc.tcfg.seed = j["seed"].get<unsigned>();
    if (j.contains("hidden_dim")) rc.tcfg.hidden_dim = j["hidden_dim"].get<int>();
    if (j.contains("input_len")) rc.tcfg.input_len = j["input_len"].get<int>();
    if (j.contains("pred_len")) rc.tcfg.pred_len = j["pred_len"].get<int>();
    if (j.contains("solver_step")) rc.tcfg.solver_step = j["solver_step"].get<double>();
    if (j.contains("shift")) rc.tcfg.shift = j["shift"].get<bool>();
    if (j.contains("clip_norm")) rc.tcfg.clip_norm = j["clip_norm"].get<double>();
    if (j.contains("alpha")) rc.lcfg.alpha = j["alpha"].get<double>();
    if (j.contains("beta")) rc.lcfg.beta = j["beta"].get<double>();
    if (j.contains("gamma")) rc.lcfg.gamma = j["gamma"].get<double>();
    if (j.contains("loss_mode")) rc.lcfg.mode = parse_loss_mode(j["loss_mode"].get<std::string>());
    if (j.contains("synth_length")) rc.synth_length = j["synth_length"].get<int>();
    if (j.contains("synth_period")) rc.synth_period = j["synth_period"].get<int>();
    if (j.contains("synth_flip_rate")) rc.synth_flip_rate = j["synth_flip_rate"].get<double>();
}

std::string dataset_stem(const std::string& dataset) {
    if (dataset == "synth") return "synth_lagged_regime";
    return fs::path(dataset).stem().string();
}

Dataset load_dataset(const RunConfig& rc) {
    if (rc.dataset == "synth")
        return synth_lagged_regime(rc.synth_length, rc.synth_period, rc.tcfg.seed, rc.synth_flip_rate);
    return make_dataset(dataset_stem(rc.dataset), load_csv(rc.dataset));
}

std::string config_hash(const json& j) {
    std::ostringstream out;
    out << std::hex << std::hash<std::string>{}(j.dump());
    return out.str();
}

std::string run_tag(const std::string& dataset_name, int pred_len, unsigned seed) {
    return dataset_name + "_P" + std::to_string(pred_len) + "_seed" + std::to_string(seed);
}

void write_text(const fs::path& path, const std::string& body) {
    std::ofstream out(path);
    if (!out) throw IngestError("cannot write " + path.string());
    out << body;
    if (!out) throw IngestError("write failed for " + path.string());
}

Tensor predict_window(const ContimeParams& params, const Window& w, bool shift) {
    const ForecastOutput out = forward(params, w.input);
    return shift ? apply_shift(out.y_hat, w.last_obs) : out.y_hat;
}

int cmd_train(const RunConfig& rc) {
    rc.tcfg.validate();
    rc.lcfg.validate();
    const Dataset data = load_dataset(rc);
    const auto train_w = make_windows(data.train, rc.tcfg.input_len, rc.tcfg.pred_len);
    const auto val_w = make_windows(data.val, rc.tcfg.input_len, rc.tcfg.pred_len);

    const ModelDims dims{rc.tcfg.hidden_dim, rc.tcfg.input_len, rc.tcfg.pred_len, data.features(),
                         rc.tcfg.solver_step};
    std::mt19937_64 rng(rc.tcfg.seed);
    const ContimeParams initial = ContimeParams::init(dims, rng);

    const TrainResult result = train(train_w, val_w, initial, rc.tcfg, rc.lcfg);

    fs::create_directories(rc.out_dir);
    const std::string tag = run_tag(data.name, rc.tcfg.pred_len, rc.tcfg.seed);
    const json resolved = rc.to_json();

    Checkpoint ck;
    ck.params = result.best_params;
    ck.norm = data.norm;
    ck.shift = rc.tcfg.shift;
    ck.config_hash = config_hash(resolved);
    ck.save((fs::path(rc.out_dir) / ("checkpoint_" + tag + ".json")).string());
    write_text(fs::path(rc.out_dir) / ("history_" + tag + ".jsonl"), history_to_jsonl(result.history));
    write_text(fs::path(rc.out_dir) / ("resolved_config_" + tag + ".json"), resolved.dump(2) + "\n");

    long wall_ms = 0;
    for (const EpochRecord& r : result.history) wall_ms += r.wall_ms;
    std::cout << "trained " << tag << ": best epoch " << result.best_epoch << ", val loss " << result.best_val_loss
              << ", wall " << wall_ms << " ms\n";
    return 0;
}

int cmd_eval(const RunConfig& rc, const std::string& checkpoint_path) {
    const Checkpoint ck = Checkpoint::load(checkpoint_path);
    RunConfig data_rc = rc;
    data_rc.tcfg.seed = rc.tcfg.seed;
    const Dataset data = load_dataset(data_rc);
    if (data.features() != ck.params.dims.features)
        throw ConfigError("checkpoint expects " + std::to_string(ck.params.dims.features) + " features, dataset has " +
                          std::to_string(data.features()));
    const int T = ck.params.dims.input_len;
    const int P = ck.params.dims.pred_len;
    const auto windows = make_windows(data.test, T, P);

    std::vector<Tensor> preds, truths;
    preds.reserve(windows.size());
    for (const Window& w : windows) {
        preds.push_back(predict_window(ck.params, w, ck.shift));
        truths.push_back(w.target);
    }
    const RunMetrics run = evaluate(preds, truths);
    const MetricReport report = MetricReport::aggregate(data.name, P, {rc.tcfg.seed}, {run});

    fs::create_directories(rc.out_dir);
    const std::string tag = run_tag(data.name, P, rc.tcfg.seed);
    write_text(fs::path(rc.out_dir) / ("report_" + tag + ".json"), report.to_json() + "\n");

    std::ostringstream trace;
    trace << "window,step,feature,truth,prediction\n";
    trace << std::setprecision(17);
    for (std::size_t wi = 0; wi < windows.size(); ++wi)
        for (int i = 0; i < P; ++i)
            for (int f = 0; f < data.features(); ++f)
                trace << wi << "," << i << "," << f << "," << truths[wi](i, f) << "," << preds[wi](i, f) << "\n";
    write_text(fs::path(rc.out_dir) / ("trace_" + tag + ".csv"), trace.str());

    std::cout << "eval " << tag << ": mse " << run.mse << ", dtw " << run.dtw << ", tdi " << run.tdi << " over "
              << run.samples << " windows\n";
    return 0;
}

int cmd_compare(const RunConfig& rc, const std::vector<std::string>& report_paths) {
    if (report_paths.size() < 2) throw ConfigError("compare needs at least two report files");
    std::vector<MetricReport> reports;
    std::vector<std::string> labels;
    for (const std::string& p : report_paths) {
        std::ifstream in(p);
        if (!in) throw IngestError("cannot open report " + p);
        std::stringstream ss;
        ss << in.rdbuf();
        reports.push_back(MetricReport::from_json(ss.str()));
        labels.push_back(fs::path(p).stem().string());
    }
    for (std::size_t i = 1; i < reports.size(); ++i) {
        if (reports[i].dataset != reports[0].dataset)
            throw ConfigError("reports cover different datasets: " + reports[0].dataset + " vs " +
                              reports[i].dataset);
        if (reports[i].pred_len != reports[0].pred_len)
            throw ConfigError("reports cover different horizons: " + std::to_string(reports[0].pred_len) + " vs " +
                              std::to_string(reports[i].pred_len));
    }

    auto best_index = [&](auto pick) {
        std::size_t best = 0;
        for (std::size_t i = 1; i < reports.size(); ++i)
            if (pick(reports[i]) < pick(reports[best])) best = i;
        return best;
    };
    const std::size_t best_mse = best_index([](const MetricReport& r) { return r.mse.mean; });
    const std::size_t best_dtw = best_index([](const MetricReport& r) { return r.dtw.mean; });
    const std::size_t best_tdi = best_index([](const MetricReport& r) { return r.tdi.mean; });

    std::ostringstream table;
    table << "dataset: " << reports[0].dataset << "  P=" << reports[0].pred_len << "\n";
    table << std::left << std::setw(40) << "run" << std::right << std::setw(14) << "MSE" << std::setw(14) << "DTW"
          << std::setw(14) << "TDI" << "\n";
    json mirror;
    mirror["dataset"] = reports[0].dataset;
    mirror["pred_len"] = reports[0].pred_len;
    mirror["runs"] = json::array();
    for (std::size_t i = 0; i < reports.size(); ++i) {
        auto cell = [&](double v, bool best) {
            std::ostringstream c;
            c << std::fixed << std::setprecision(6) << v << (best ? "*" : " ");
            return c.str();
        };
        // ties mark every run that attains the minimum
        const bool m = reports[i].mse.mean == reports[best_mse].mse.mean;
        const bool d = reports[i].dtw.mean == reports[best_dtw].dtw.mean;
        const bool t = reports[i].tdi.mean == reports[best_tdi].tdi.mean;
        table << std::left << std::setw(40) << labels[i] << std::right << std::setw(14) << cell(reports[i].mse.mean, m)
              << std::setw(14) << cell(reports[i].dtw.mean, d) << std::setw(14) << cell(reports[i].tdi.mean, t)
              << "\n";
        mirror["runs"].push_back(json{{"label", labels[i]},
                                      {"mse", reports[i].mse.mean},
                                      {"dtw", reports[i].dtw.mean},
                                      {"tdi", reports[i].tdi.mean},
                                      {"best_mse", m},
                                      {"best_dtw", d},
                                      {"best_tdi", t}});
    }

    fs::create_directories(rc.out_dir);
    const std::string tag = run_tag(reports[0].dataset, reports[0].pred_len, rc.tcfg.seed);
    write_text(fs::path(rc.out_dir) / ("compare_" + tag + ".txt"), table.str());
    write_text(fs::path(rc.out_dir) / ("compare_" + tag + ".json"), mirror.dump(2) + "\n");
    std::cout << table.str();
    return 0;
}

int cmd_forecast(const RunConfig& rc, const std::string& checkpoint_path, const std::string& window_csv,
                 bool shift_override_set, bool shift_override) {
    const Checkpoint ck = Checkpoint::load(checkpoint_path);
    const RawTable raw = load_csv(window_csv);
    const int T = ck.params.dims.input_len;
    if (raw.values.rows != T)
        throw ConfigError("forecast window has " + std::to_string(raw.values.rows) + " rows, checkpoint expects " +
                          std::to_string(T));
    if (raw.values.cols != ck.params.dims.features)
        throw ConfigError("forecast window feature count mismatch");

    Window w;
    w.input.times.resize(static_cast<std::size_t>(T));
    for (int i = 0; i < T; ++i) w.input.times[static_cast<std::size_t>(i)] = i;
    w.input.values = ck.norm.transform(raw.values);
    w.last_obs = Tensor(raw.values.cols, 1);
    for (int f = 0; f < raw.values.cols; ++f) w.last_obs[f] = w.input.values(T - 1, f);

    const bool shift = shift_override_set ? shift_override : ck.shift;
    const ForecastOutput out = forward(ck.params, w.input);
    const Tensor pred_std = shift ? apply_shift(out.y_hat, w.last_obs) : out.y_hat;
    const Tensor pred = ck.norm.inverse(pred_std);

    fs::create_directories(rc.out_dir);
    std::ostringstream csv;
    csv << "step";
    for (const std::string& name : raw.feature_names) csv << "," << name;
    csv << "\n" << std::setprecision(17);
    for (int i = 0; i < pred.rows; ++i) {
        csv << (i + 1);
        for (int f = 0; f < pred.cols; ++f) csv << "," << pred(i, f);
        csv << "\n";
    }
    const fs::path out_path = fs::path(rc.out_dir) / ("forecast_" + fs::path(window_csv).stem().string() + ".csv");
    write_text(out_path, csv.str());
    std::cout << "wrote " << out_path.string() << "\n";
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Continuous-time bi-directional GRU forecaster with delay-aware evaluation"};
    app.require_subcommand(1);

    RunConfig rc;
    std::string config_path;
    std::string loss_mode = "task_delta";
    std::string checkpoint_path;
    std::string window_csv;
    std::vector<std::string> report_paths;
    bool shift_flag = true;

    auto add_common = [&](CLI::App* cmd) {
        cmd->add_option("--config", config_path, "JSON config file; flags override its values");
        cmd->add_option("--out", rc.out_dir, "output directory");
        cmd->add_option("--data", rc.dataset, "dataset CSV path, or 'synth' for the built-in generator");
        cmd->add_option("--seed", rc.tcfg.seed, "random seed");
        cmd->add_option("--input-len", rc.tcfg.input_len, "input window length T");
        cmd->add_option("--pred-len", rc.tcfg.pred_len, "prediction horizon P");
        cmd->add_option("--alpha", rc.lcfg.alpha, "task loss weight");
        cmd->add_option("--beta", rc.lcfg.beta, "auxiliary loss weight");
        cmd->add_option("--lr", rc.tcfg.learning_rate, "learning rate");
        cmd->add_option("--solver-step", rc.tcfg.solver_step, "fixed solver step");
        cmd->add_option("--hidden-dim", rc.tcfg.hidden_dim, "hidden state dimension");
        cmd->add_option("--gamma", rc.lcfg.gamma, "soft alignment temperature");
        cmd->add_option("--loss-mode", loss_mode, "task | task_delta | task_tdi");
        cmd->add_flag("--shift,!--no-shift", shift_flag, "anchor forecasts to the last observation");
        cmd->add_option("--epochs", rc.tcfg.epochs, "training epochs");
        cmd->add_option("--batch-size", rc.tcfg.batch_size, "mini-batch size");
        cmd->add_option("--synth-length", rc.synth_length, "synthetic series length");
        cmd->add_option("--synth-period", rc.synth_period, "synthetic series period");
        cmd->add_option("--synth-flip-rate", rc.synth_flip_rate, "synthetic regime flip rate");
    };

    CLI::App* c_train = app.add_subcommand("train", "train a model and write checkpoint + history");
    add_common(c_train);
    CLI::App* c_eval = app.add_subcommand("eval", "evaluate a checkpoint on a dataset's test split");
    add_common(c_eval);
    c_eval->add_option("--checkpoint", checkpoint_path, "checkpoint file")->required();
    CLI::App* c_compare = app.add_subcommand("compare", "side-by-side table of metric reports");
    c_compare->add_option("--out", rc.out_dir, "output directory");
    c_compare->add_option("--seed", rc.tcfg.seed, "seed tag for output filenames");
    c_compare->add_option("reports", report_paths, "metric report JSON files")->expected(-2);
    CLI::App* c_forecast = app.add_subcommand("forecast", "predict P steps from a T-row CSV window");
    add_common(c_forecast);
    c_forecast->add_option("--checkpoint", checkpoint_path, "checkpoint file")->required();
    c_forecast->add_option("--window", window_csv, "CSV with exactly T rows")->required();

    CLI11_PARSE(app, argc, argv);

    try {
        CLI::App* cmd = app.get_subcommands().front();
        // precedence: defaults < config file < explicit flags
        const CLI::Option* config_opt = cmd->get_option_no_throw("--config");
        if (config_opt != nullptr && config_opt->count() > 0) {
            RunConfig from_file; // reparse flags on top of the file values
            merge_config_file(from_file, config_path);
            auto keep = [&](const char* flag, auto& target, const auto& source) {
                if (!cmd->count(flag)) target = source;
            };
            keep("--out", rc.out_dir, from_file.out_dir);
            keep("--data", rc.dataset, from_file.dataset);
            keep("--seed", rc.tcfg.seed, from_file.tcfg.seed);
            keep("--input-len", rc.tcfg.input_len, from_file.tcfg.input_len);
            keep("--pred-len", rc.tcfg.pred_len, from_file.tcfg.pred_len);
            keep("--alpha", rc.lcfg.alpha, from_file.lcfg.alpha);
            keep("--beta", rc.lcfg.beta, from_file.lcfg.beta);
            keep("--lr", rc.tcfg.learning_rate, from_file.tcfg.learning_rate);
            keep("--solver-step", rc.tcfg.solver_step, from_file.tcfg.solver_step);
            keep("--hidden-dim", rc.tcfg.hidden_dim, from_file.tcfg.hidden_dim);
            keep("--gamma", rc.lcfg.gamma, from_file.lcfg.gamma);
            keep("--epochs", rc.tcfg.epochs, from_file.tcfg.epochs);
            keep("--batch-size", rc.tcfg.batch_size, from_file.tcfg.batch_size);
            keep("--synth-length", rc.synth_length, from_file.synth_length);
            keep("--synth-period", rc.synth_period, from_file.synth_period);
            keep("--synth-flip-rate", rc.synth_flip_rate, from_file.synth_flip_rate);
            if (!cmd->count("--shift") && !cmd->count("--no-shift")) shift_flag = from_file.tcfg.shift;
            if (!cmd->count("--loss-mode"))
                rc.lcfg.mode = from_file.lcfg.mode;
            else
                rc.lcfg.mode = parse_loss_mode(loss_mode);
        } else {
            rc.lcfg.mode = parse_loss_mode(loss_mode);
        }
        rc.tcfg.shift = shift_flag;

        if (cmd == c_train) return cmd_train(rc);
        if (cmd == c_eval) return cmd_eval(rc, checkpoint_path);
        if (cmd == c_compare) return cmd_compare(rc, report_paths);
        if (cmd == c_forecast)
            return cmd_forecast(rc, checkpoint_path, window_csv,
                                cmd->count("--shift") > 0 || cmd->count("--no-shift") > 0, shift_flag);
        return 1;
    } catch (const std::exception& e) {
        std::cerr << json{{"error", e.what()}}.dump() << "\n";
        return 1;
    }
}
