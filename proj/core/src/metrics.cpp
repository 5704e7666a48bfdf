#include "contime/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <json.hpp>

namespace contime {

using nlohmann::json;

Tensor penalty_matrix(int p) {
    if (p < 1) throw ShapeError("penalty_matrix: P must be >= 1");
    Tensor omega(p, p);
    for (int h = 0; h < p; ++h)
        for (int j = 0; j < p; ++j) omega(h, j) = static_cast<double>((h - j) * (h - j)) / (p * p);
    return omega;
}

namespace {

Tensor cost_matrix(std::span<const double> a, std::span<const double> b) {
    const int n = static_cast<int>(a.size());
    Tensor delta(n, n);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) {
            const double d = a[static_cast<std::size_t>(i)] - b[static_cast<std::size_t>(j)];
            delta(i, j) = d * d;
        }
    return delta;
}

void check_inputs(std::span<const double> a, std::span<const double> b) {
    if (a.empty() || b.empty()) throw ShapeError("dtw: empty sequence");
    if (a.size() != b.size()) throw ShapeError("dtw: sequences must have equal length");
}

} // namespace

DtwResult dtw(std::span<const double> a, std::span<const double> b) {
    check_inputs(a, b);
    const int n = static_cast<int>(a.size());
    const Tensor delta = cost_matrix(a, b);

    const double inf = std::numeric_limits<double>::infinity();
    Tensor acc(n, n);
    acc(0, 0) = delta(0, 0);
    for (int i = 1; i < n; ++i) acc(i, 0) = acc(i - 1, 0) + delta(i, 0);
    for (int j = 1; j < n; ++j) acc(0, j) = acc(0, j - 1) + delta(0, j);
    for (int i = 1; i < n; ++i)
        for (int j = 1; j < n; ++j)
            acc(i, j) = delta(i, j) + std::min({acc(i - 1, j - 1), acc(i - 1, j), acc(i, j - 1)});

    DtwResult res;
    res.cost = acc(n - 1, n - 1);
    res.path.matrix = Tensor(n, n);

    // Backtrack with a fixed tie order: diagonal, vertical, horizontal.
    int i = n - 1, j = n - 1;
    std::vector<std::pair<int, int>> rev;
    rev.emplace_back(i, j);
    while (i > 0 || j > 0) {
        const double diag = (i > 0 && j > 0) ? acc(i - 1, j - 1) : inf;
        const double vert = (i > 0) ? acc(i - 1, j) : inf;
        const double horz = (j > 0) ? acc(i, j - 1) : inf;
        if (diag <= vert && diag <= horz) {
            --i;
            --j;
        } else if (vert <= horz) {
            --i;
        } else {
            --j;
        }
        rev.emplace_back(i, j);
    }
    res.path.steps.assign(rev.rbegin(), rev.rend());
    for (const auto& [pi, pj] : res.path.steps) res.path.matrix(pi, pj) = 1.0;
    return res;
}

double tdi(std::span<const double> a, std::span<const double> b) {
    const DtwResult res = dtw(a, b);
    return dot(res.path.matrix, penalty_matrix(static_cast<int>(a.size())));
}

SoftDtwResult soft_dtw(std::span<const double> a, std::span<const double> b, double gamma) {
    check_inputs(a, b);
    if (gamma <= 0.0) throw ConfigError("soft_dtw: gamma must be positive");
    const int n = static_cast<int>(a.size());
    const Tensor delta = cost_matrix(a, b);

    auto softmin = [gamma](double x, double y, double z) {
        const double m = std::min({x, y, z});
        if (!std::isfinite(m)) return m;
        double s = 0.0;
        for (double v : {x, y, z})
            if (std::isfinite(v)) s += std::exp(-(v - m) / gamma);
        return m - gamma * std::log(s);
    };

    Tensor r(n, n);
    r(0, 0) = delta(0, 0);
    for (int i = 1; i < n; ++i) r(i, 0) = r(i - 1, 0) + delta(i, 0);
    for (int j = 1; j < n; ++j) r(0, j) = r(0, j - 1) + delta(0, j);
    for (int i = 1; i < n; ++i)
        for (int j = 1; j < n; ++j)
            r(i, j) = delta(i, j) + softmin(r(i - 1, j - 1), r(i - 1, j), r(i, j - 1));

    // Expected alignment by the reverse recursion of the soft-min DP.
    Tensor e(n, n);
    e(n - 1, n - 1) = 1.0;
    auto weight = [&](int i, int j, int pi, int pj) {
        // transition weight from cell (pi,pj) into its successor (i,j)
        return std::exp((r(i, j) - r(pi, pj) - delta(i, j)) / gamma);
    };
    for (int i = n - 1; i >= 0; --i)
        for (int j = n - 1; j >= 0; --j) {
            if (i == n - 1 && j == n - 1) continue;
            double acc = 0.0;
            if (i + 1 < n) acc += e(i + 1, j) * weight(i + 1, j, i, j);
            if (j + 1 < n) acc += e(i, j + 1) * weight(i, j + 1, i, j);
            if (i + 1 < n && j + 1 < n) acc += e(i + 1, j + 1) * weight(i + 1, j + 1, i, j);
            e(i, j) = acc;
        }
    return SoftDtwResult{r(n - 1, n - 1), std::move(e)};
}

RunMetrics evaluate(const std::vector<Tensor>& predictions, const std::vector<Tensor>& truths) {
    if (predictions.size() != truths.size() || predictions.empty())
        throw ShapeError("evaluate: prediction/truth sets must be non-empty and matched");
    RunMetrics m;
    m.samples = static_cast<int>(predictions.size());
    for (std::size_t s = 0; s < predictions.size(); ++s) {
        const Tensor& yh = predictions[s];
        const Tensor& y = truths[s];
        check_same_shape(yh, y, "evaluate");
        double mse = 0.0;
        for (int i = 0; i < y.size(); ++i) {
            const double d = yh[i] - y[i];
            mse += d * d;
        }
        m.mse += mse / y.size();

        // DTW and TDI per feature channel, averaged across features.
        double dtw_acc = 0.0, tdi_acc = 0.0;
        std::vector<double> ca(static_cast<std::size_t>(y.rows)), cb(ca);
        for (int f = 0; f < y.cols; ++f) {
            for (int i = 0; i < y.rows; ++i) {
                ca[static_cast<std::size_t>(i)] = yh(i, f);
                cb[static_cast<std::size_t>(i)] = y(i, f);
            }
            const DtwResult d = dtw(ca, cb);
            dtw_acc += d.cost;
            tdi_acc += dot(d.path.matrix, penalty_matrix(y.rows));
        }
        m.dtw += dtw_acc / y.cols;
        m.tdi += tdi_acc / y.cols;
    }
    m.mse /= m.samples;
    m.dtw /= m.samples;
    m.tdi /= m.samples;
    return m;
}

namespace {

MetricStat stat_of(const std::vector<double>& xs) {
    MetricStat s;
    for (double x : xs) s.mean += x;
    s.mean /= static_cast<double>(xs.size());
    if (xs.size() > 1) {
        double acc = 0.0;
        for (double x : xs) acc += (x - s.mean) * (x - s.mean);
        s.stddev = std::sqrt(acc / static_cast<double>(xs.size()));
    }
    return s;
}

} // namespace

MetricReport MetricReport::aggregate(std::string dataset, int pred_len, std::vector<unsigned> seeds,
                                     std::vector<RunMetrics> runs) {
    if (runs.empty()) throw ConfigError("MetricReport: no runs");
    MetricReport rep;
    rep.dataset = std::move(dataset);
    rep.pred_len = pred_len;
    rep.seeds = std::move(seeds);
    rep.runs = std::move(runs);
    std::vector<double> mses, dtws, tdis;
    for (const RunMetrics& r : rep.runs) {
        mses.push_back(r.mse);
        dtws.push_back(r.dtw);
        tdis.push_back(r.tdi);
    }
    rep.mse = stat_of(mses);
    rep.dtw = stat_of(dtws);
    rep.tdi = stat_of(tdis);
    return rep;
}

std::string MetricReport::to_json() const {
    json j;
    j["dataset"] = dataset;
    j["P"] = pred_len;
    j["seeds"] = seeds;
    j["per_metric"] = {{"mse", {{"mean", mse.mean}, {"std", mse.stddev}}},
                       {"dtw", {{"mean", dtw.mean}, {"std", dtw.stddev}}},
                       {"tdi", {{"mean", tdi.mean}, {"std", tdi.stddev}}}};
    json jruns = json::array();
    for (const RunMetrics& r : runs)
        jruns.push_back({{"mse", r.mse}, {"dtw", r.dtw}, {"tdi", r.tdi}, {"samples", r.samples}});
    j["runs"] = jruns;
    return j.dump(2);
}

MetricReport MetricReport::from_json(const std::string& text) {
    json j = json::parse(text);
    MetricReport rep;
    rep.dataset = j.at("dataset").get<std::string>();
    rep.pred_len = j.at("P").get<int>();
    rep.seeds = j.value("seeds", std::vector<unsigned>{});
    for (const json& r : j.at("runs"))
        rep.runs.push_back(RunMetrics{r.at("mse").get<double>(), r.at("dtw").get<double>(), r.at("tdi").get<double>(),
                                      r.value("samples", 0)});
    const json& pm = j.at("per_metric");
    rep.mse = MetricStat{pm.at("mse").at("mean").get<double>(), pm.at("mse").at("std").get<double>()};
    rep.dtw = MetricStat{pm.at("dtw").at("mean").get<double>(), pm.at("dtw").at("std").get<double>()};
    rep.tdi = MetricStat{pm.at("tdi").at("mean").get<double>(), pm.at("tdi").at("std").get<double>()};
    return rep;
}

} // namespace contime
