#include "contime/data.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <random>
#include <sstream>

namespace contime {

namespace {

std::vector<std::string> split_line(const std::string& line) {
    std::vector<std::string> out;
    std::string cell;
    std::stringstream ss(line);
    while (std::getline(ss, cell, ',')) out.push_back(cell);
    if (!line.empty() && line.back() == ',') out.emplace_back();
    return out;
}

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return "";
    const auto e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

} // namespace

RawTable load_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IngestError("cannot open " + path);

    std::string line;
    if (!std::getline(in, line)) throw IngestError(path + ": empty file");
    std::vector<std::string> header = split_line(line);
    if (header.size() < 2) throw IngestError(path + ": need a date column plus at least one feature column");

    RawTable table;
    for (std::size_t i = 1; i < header.size(); ++i) table.feature_names.push_back(trim(header[i]));
    const std::size_t ncols = header.size();

    std::vector<double> flat;
    int row = 0;
    while (std::getline(in, line)) {
        ++row;
        if (trim(line).empty()) continue;
        std::vector<std::string> cells = split_line(line);
        if (cells.size() != ncols)
            throw IngestError(path + ": row " + std::to_string(row) + " has " + std::to_string(cells.size()) +
                              " columns, expected " + std::to_string(ncols));
        table.dates.push_back(trim(cells[0]));
        for (std::size_t c = 1; c < ncols; ++c) {
            const std::string cell = trim(cells[c]);
            double v = 0.0;
            const auto [ptr, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), v);
            if (ec != std::errc{} || ptr != cell.data() + cell.size())
                throw IngestError(path + ": row " + std::to_string(row) + ", column '" + table.feature_names[c - 1] +
                                  "' is not numeric: '" + cell + "'");
            flat.push_back(v);
        }
    }
    if (table.dates.empty()) throw IngestError(path + ": no data rows");
    table.values = Tensor(static_cast<int>(table.dates.size()), static_cast<int>(ncols) - 1, std::move(flat));
    return table;
}

SplitRanges split_70_10_20(int rows) {
    if (rows < 10) throw ConfigError("split needs at least 10 rows, got " + std::to_string(rows));
    SplitRanges s;
    const int n_train = static_cast<int>(std::floor(0.7 * rows));
    const int n_val = static_cast<int>(std::floor(0.1 * rows));
    s.train_begin = 0;
    s.train_end = n_train;
    s.val_begin = n_train;
    s.val_end = n_train + n_val;
    s.test_begin = n_train + n_val;
    s.test_end = rows;
    return s;
}

NormStats NormStats::fit(const Tensor& rows) {
    NormStats st;
    st.mean.assign(static_cast<std::size_t>(rows.cols), 0.0);
    st.stddev.assign(static_cast<std::size_t>(rows.cols), 0.0);
    for (int f = 0; f < rows.cols; ++f) {
        double m = 0.0;
        for (int i = 0; i < rows.rows; ++i) m += rows(i, f);
        m /= rows.rows;
        double var = 0.0;
        for (int i = 0; i < rows.rows; ++i) var += (rows(i, f) - m) * (rows(i, f) - m);
        var /= rows.rows;
        const double sd = std::sqrt(var);
        if (sd <= 0.0) throw ConfigError("constant feature at column " + std::to_string(f) + ", cannot standardize");
        st.mean[static_cast<std::size_t>(f)] = m;
        st.stddev[static_cast<std::size_t>(f)] = sd;
    }
    return st;
}

Tensor NormStats::transform(const Tensor& rows) const {
    if (rows.cols != features()) throw ShapeError("NormStats::transform feature mismatch");
    Tensor out = rows;
    for (int i = 0; i < rows.rows; ++i)
        for (int f = 0; f < rows.cols; ++f)
            out(i, f) = (rows(i, f) - mean[static_cast<std::size_t>(f)]) / stddev[static_cast<std::size_t>(f)];
    return out;
}

Tensor NormStats::inverse(const Tensor& rows) const {
    if (rows.cols != features()) throw ShapeError("NormStats::inverse feature mismatch");
    Tensor out = rows;
    for (int i = 0; i < rows.rows; ++i)
        for (int f = 0; f < rows.cols; ++f)
            out(i, f) = rows(i, f) * stddev[static_cast<std::size_t>(f)] + mean[static_cast<std::size_t>(f)];
    return out;
}

namespace {

Tensor take_rows(const Tensor& m, int begin, int end) {
    Tensor out(end - begin, m.cols);
    for (int i = begin; i < end; ++i)
        for (int f = 0; f < m.cols; ++f) out(i - begin, f) = m(i, f);
    return out;
}

} // namespace

Dataset make_dataset(std::string name, const RawTable& raw) {
    const SplitRanges s = split_70_10_20(raw.values.rows);
    Dataset d;
    d.name = std::move(name);
    d.feature_names = raw.feature_names;
    const Tensor train_raw = take_rows(raw.values, s.train_begin, s.train_end);
    d.norm = NormStats::fit(train_raw);
    d.train = d.norm.transform(train_raw);
    d.val = d.norm.transform(take_rows(raw.values, s.val_begin, s.val_end));
    d.test = d.norm.transform(take_rows(raw.values, s.test_begin, s.test_end));
    return d;
}

std::vector<Window> make_windows(const Tensor& split, int input_len, int pred_len, int stride) {
    if (input_len < 2 || pred_len < 1 || stride < 1) throw ConfigError("make_windows: bad T/P/stride");
    if (split.rows < input_len + pred_len)
        throw ConfigError("split of " + std::to_string(split.rows) + " rows too short for T+P=" +
                          std::to_string(input_len + pred_len));

    std::vector<Window> out;
    for (int start = 0; start + input_len + pred_len <= split.rows; start += stride) {
        Window w;
        w.input.times.resize(static_cast<std::size_t>(input_len));
        for (int i = 0; i < input_len; ++i) w.input.times[static_cast<std::size_t>(i)] = i;
        w.input.values = take_rows(split, start, start + input_len);
        w.target = take_rows(split, start + input_len, start + input_len + pred_len);
        w.last_obs = Tensor(split.cols, 1);
        for (int f = 0; f < split.cols; ++f) w.last_obs[f] = w.input.values(input_len - 1, f);
        out.push_back(std::move(w));
    }
    return out;
}

std::vector<double> synth_lagged_regime_series(int length, int period, unsigned seed, double flip_rate) {
    if (length < 10 * period) throw ConfigError("synth series needs length >= 10*period");
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::uniform_real_distribution<double> amp_dist(0.6, 1.4);

    std::vector<double> series(static_cast<std::size_t>(length));
    double sign = 1.0;
    double amp = 1.0;
    const double two_pi = 2.0 * std::acos(-1.0);
    for (int t = 0; t < length; ++t) {
        if (flip_rate > 0.0 && unit(rng) < flip_rate) {
            sign = -sign;
            amp = amp_dist(rng);
        }
        series[static_cast<std::size_t>(t)] = sign * amp * std::sin(two_pi * t / period);
    }
    return series;
}

Dataset synth_lagged_regime(int length, int period, unsigned seed, double flip_rate) {
    const std::vector<double> series = synth_lagged_regime_series(length, period, seed, flip_rate);
    RawTable raw;
    raw.feature_names = {"value"};
    raw.values = Tensor(length, 1, series);
    raw.dates.resize(static_cast<std::size_t>(length));
    for (int t = 0; t < length; ++t) raw.dates[static_cast<std::size_t>(t)] = std::to_string(t);
    return make_dataset("synth_lagged_regime", raw);
}

} // namespace contime
