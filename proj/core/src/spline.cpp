#include "contime/spline.hpp"

#include <algorithm>
#include <string>

namespace contime {

void TimeSeriesSample::validate() const {
    if (values.rows < 2) throw InvalidSampleError("sample needs at least 2 observations, got " + std::to_string(values.rows));
    if (static_cast<int>(times.size()) != values.rows)
        throw InvalidSampleError("times length " + std::to_string(times.size()) + " != value rows " + std::to_string(values.rows));
    for (std::size_t i = 1; i < times.size(); ++i)
        if (times[i] <= times[i - 1])
            throw InvalidSampleError("times not strictly increasing at index " + std::to_string(i));
    if (!values.all_finite()) throw InvalidSampleError("sample has non-finite values");
}

ContinuousPath ContinuousPath::fit_hermite(const TimeSeriesSample& sample) {
    sample.validate();
    const int L = sample.length();
    const int F = sample.features();

    // Backward-difference tangents; tangent_0 = 0 keeps the fit online.
    Tensor tangents(L, F);
    for (int i = 1; i < L; ++i) {
        const double dt = sample.times[static_cast<std::size_t>(i)] - sample.times[static_cast<std::size_t>(i) - 1];
        for (int f = 0; f < F; ++f) tangents(i, f) = (sample.values(i, f) - sample.values(i - 1, f)) / dt;
    }

    ContinuousPath path;
    path.knots_ = sample.times;
    path.features_ = F;
    path.coeffs_.resize(static_cast<std::size_t>(L - 1) * F * 4);

    for (int s = 0; s < L - 1; ++s) {
        const double h = sample.times[static_cast<std::size_t>(s) + 1] - sample.times[static_cast<std::size_t>(s)];
        for (int f = 0; f < F; ++f) {
            const double y0 = sample.values(s, f);
            const double y1 = sample.values(s + 1, f);
            const double m0 = tangents(s, f);
            const double m1 = tangents(s + 1, f);
            const double d = (y1 - y0) / h;
            double* c = &path.coeffs_[(static_cast<std::size_t>(s) * F + f) * 4];
            c[0] = y0;
            c[1] = m0;
            c[2] = (3.0 * d - 2.0 * m0 - m1) / h;
            c[3] = (m0 + m1 - 2.0 * d) / (h * h);
        }
    }
    return path;
}

int ContinuousPath::locate(double t) const {
    if (t < knots_.front() || t > knots_.back())
        throw OutOfSpanError("t=" + std::to_string(t) + " outside path span [" + std::to_string(knots_.front()) + ", " +
                             std::to_string(knots_.back()) + "]");
    // Last knot belongs to the last segment.
    auto it = std::upper_bound(knots_.begin(), knots_.end(), t);
    int seg = static_cast<int>(it - knots_.begin()) - 1;
    return std::min(seg, segments() - 1);
}

std::vector<double> ContinuousPath::value(double t) const {
    const int s = locate(t);
    const double u = t - knots_[static_cast<std::size_t>(s)];
    std::vector<double> out(static_cast<std::size_t>(features_));
    for (int f = 0; f < features_; ++f) {
        const double* c = segment_coeffs(s, f);
        out[static_cast<std::size_t>(f)] = c[0] + u * (c[1] + u * (c[2] + u * c[3]));
    }
    return out;
}

std::vector<double> ContinuousPath::derivative(double t) const {
    const int s = locate(t);
    const double u = t - knots_[static_cast<std::size_t>(s)];
    std::vector<double> out(static_cast<std::size_t>(features_));
    for (int f = 0; f < features_; ++f) {
        const double* c = segment_coeffs(s, f);
        out[static_cast<std::size_t>(f)] = c[1] + u * (2.0 * c[2] + u * 3.0 * c[3]);
    }
    return out;
}

} // namespace contime
