#pragma once

#include <vector>

#include "contime/tensor.hpp"

namespace contime {

/// One observation window: strictly increasing stamps plus an L x F value matrix.
struct TimeSeriesSample {
    std::vector<double> times;
    Tensor values; // L x F

    int length() const { return values.rows; }
    int features() const { return values.cols; }
    void validate() const;
};

/// Piecewise-cubic Hermite interpolant of a sample. Knot tangents are
/// backward differences (first tangent zero), so appending an observation
/// never changes earlier segments.
class ContinuousPath {
  public:
    static ContinuousPath fit_hermite(const TimeSeriesSample& sample);

    std::vector<double> value(double t) const;
    std::vector<double> derivative(double t) const;

    double span_begin() const { return knots_.front(); }
    double span_end() const { return knots_.back(); }
    int features() const { return features_; }
    int segments() const { return static_cast<int>(knots_.size()) - 1; }

    /// Local cubic coefficients (c0..c3 in u = t - knot) of one segment/feature.
    const double* segment_coeffs(int segment, int feature) const {
        return &coeffs_[(static_cast<std::size_t>(segment) * features_ + feature) * 4];
    }

  private:
    ContinuousPath() = default;
    int locate(double t) const;

    std::vector<double> knots_;
    std::vector<double> coeffs_; // segments x F x 4, c0 + c1 u + c2 u^2 + c3 u^3
    int features_ = 0;
};

} // namespace contime
