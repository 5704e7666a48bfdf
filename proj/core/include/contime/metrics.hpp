#pragma once

#include <span>
#include <string>
#include <utility>
#include <vector>

#include "contime/tensor.hpp"

namespace contime {

/// Monotone alignment from (0,0) to (P-1,P-1); steps in {(1,0),(0,1),(1,1)}.
struct WarpingPath {
    std::vector<std::pair<int, int>> steps;
    Tensor matrix; // binary P x P
};

/// Omega(h, j) = (h - j)^2 / P^2
Tensor penalty_matrix(int p);

struct DtwResult {
    double cost = 0.0;
    WarpingPath path;
};

/// Exact DTW with squared-difference cost and deterministic backtracking
/// (diagonal preferred over vertical over horizontal on ties).
DtwResult dtw(std::span<const double> a, std::span<const double> b);

/// Temporal distortion index: the DTW-optimal path scored against Omega.
double tdi(std::span<const double> a, std::span<const double> b);

struct SoftDtwResult {
    double value = 0.0;
    Tensor alignment; // expected alignment d(softDTW)/d(cost), entries in [0,1]
};

SoftDtwResult soft_dtw(std::span<const double> a, std::span<const double> b, double gamma);

struct MetricStat {
    double mean = 0.0;
    double stddev = 0.0;
};

/// Per-run aggregates over a prediction set (mean over features, then samples).
struct RunMetrics {
    double mse = 0.0;
    double dtw = 0.0;
    double tdi = 0.0;
    int samples = 0;
};

RunMetrics evaluate(const std::vector<Tensor>& predictions, const std::vector<Tensor>& truths);

/// Seed-level aggregate, serializable as JSON.
struct MetricReport {
    std::string dataset;
    int pred_len = 0;
    std::vector<unsigned> seeds;
    std::vector<RunMetrics> runs;
    MetricStat mse, dtw, tdi;

    static MetricReport aggregate(std::string dataset, int pred_len, std::vector<unsigned> seeds,
                                  std::vector<RunMetrics> runs);
    std::string to_json() const;
    static MetricReport from_json(const std::string& text);
};

} // namespace contime
