#pragma once

#include <cmath>
#include <cstdint>
#include <memory>
#include <numbers>
#include <random>
#include <vector>

#include "selab/dsp.hpp"
#include "selab/matrix.hpp"
#include "selab/objectives.hpp"

namespace testsupport {

inline selab::Matrix random_matrix(std::mt19937_64& rng, std::size_t rows, std::size_t cols, double lo = -1.0,
                                   double hi = 1.0) {
    std::uniform_real_distribution<double> u(lo, hi);
    selab::Matrix m(rows, cols);
    for (double& v : m.flat()) v = u(rng);
    return m;
}

inline selab::dsp::Waveform random_waveform(std::mt19937_64& rng, std::size_t n, double scale = 1.0) {
    std::normal_distribution<double> g(0.0, scale);
    selab::dsp::Waveform w{std::vector<double>(n), selab::dsp::kSampleRate};
    for (double& s : w.samples) s = g(rng);
    return w;
}

inline double rms(const std::vector<double>& v, std::size_t begin, std::size_t end) {
    double acc = 0.0;
    for (std::size_t i = begin; i < end; ++i) acc += v[i] * v[i];
    return std::sqrt(acc / static_cast<double>(end - begin));
}

inline double relative_rms_error(const std::vector<double>& ref, const std::vector<double>& est, std::size_t begin,
                                 std::size_t end) {
    double num = 0.0;
    double den = 0.0;
    for (std::size_t i = begin; i < end; ++i) {
        num += (ref[i] - est[i]) * (ref[i] - est[i]);
        den += ref[i] * ref[i];
    }
    return std::sqrt(num / den);
}

inline double max_abs_diff(const selab::Matrix& a, const selab::Matrix& b) {
    double m = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a.data()[i] - b.data()[i]));
    return m;
}

/// Random Q x F nonnegative weights wrapped as a filterbank.
inline std::shared_ptr<const selab::dsp::MelFilterbank> random_filterbank(std::mt19937_64& rng, std::size_t q,
                                                                          std::size_t f) {
    return std::make_shared<const selab::dsp::MelFilterbank>(
        selab::dsp::MelFilterbank::from_weights(random_matrix(rng, q, f, 0.05, 1.0)));
}

/// Context with A, R in [lo, hi] and theta uniform on (-pi, pi].
inline selab::objectives::LossContext random_context(std::mt19937_64& rng, std::size_t f, std::size_t t,
                                                     std::size_t q, double lo = 0.5, double hi = 2.0) {
    auto a = random_matrix(rng, f, t, lo, hi);
    auto r = random_matrix(rng, f, t, lo, hi);
    auto th = random_matrix(rng, f, t, -std::numbers::pi, std::numbers::pi);
    return selab::objectives::LossContext({std::move(a)}, {std::move(r)}, {std::move(th)},
                                          random_filterbank(rng, q, f));
}

} // namespace testsupport
