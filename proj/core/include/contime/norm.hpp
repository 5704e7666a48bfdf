#pragma once

#include <vector>

#include "contime/tensor.hpp"

namespace contime {

/// Per-feature z-score statistics, fitted on the training split only.
struct NormStats {
    std::vector<double> mean;
    std::vector<double> stddev;

    bool empty() const { return mean.empty(); }
    int features() const { return static_cast<int>(mean.size()); }

    static NormStats fit(const Tensor& rows);
    Tensor transform(const Tensor& rows) const;
    Tensor inverse(const Tensor& rows) const;
};

} // namespace contime
