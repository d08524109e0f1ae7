#include "selab/dsp.hpp"

#include <fftw3.h>

#include <algorithm>
#include <cmath>
#include <map>
#include <mutex>
#include <numbers>
#include <string>

#include "selab/error.hpp"

namespace selab::dsp {
namespace {

// FFTW planning is not thread-safe; executing an existing plan on new arrays is.
struct FftPlans {
    fftw_plan forward = nullptr;
    fftw_plan inverse = nullptr;
};

const FftPlans& plans_for(std::size_t n) {
    static std::mutex mutex;
    static std::map<std::size_t, FftPlans> cache;
    std::lock_guard lock(mutex);
    auto it = cache.find(n);
    if (it != cache.end()) return it->second;
    std::vector<double> real(n);
    std::vector<fftw_complex> cplx(n / 2 + 1);
    const int size = static_cast<int>(n);
    FftPlans plans;
    plans.forward = fftw_plan_dft_r2c_1d(size, real.data(), cplx.data(), FFTW_ESTIMATE | FFTW_UNALIGNED);
    plans.inverse = fftw_plan_dft_c2r_1d(size, cplx.data(), real.data(), FFTW_ESTIMATE | FFTW_UNALIGNED);
    return cache.emplace(n, plans).first->second;
}

const std::vector<double>& default_window() {
    static const std::vector<double> window = hamming_window(kWindowLength);
    return window;
}

void analyze_frame(const Waveform& wav, std::size_t frame, const std::vector<double>& window,
                   const FftPlans& plans, std::vector<double>& buf, std::vector<fftw_complex>& out,
                   ComplexSpectrogram& spec) {
    const double* x = wav.samples.data() + frame * kHop;
    for (std::size_t n = 0; n < kWindowLength; ++n) buf[n] = window[n] * x[n];
    fftw_execute_dft_r2c(plans.forward, buf.data(), out.data());
    for (std::size_t k = 0; k < kNumBins; ++k) spec(k, frame) = {out[k][0], out[k][1]};
}

// Inverse FFT of one frame, multiplied by the synthesis window.
void synthesize_frame(const ComplexSpectrogram& spec, std::size_t frame, const std::vector<double>& window,
                      const FftPlans& plans, std::vector<fftw_complex>& buf, double* dest) {
    for (std::size_t k = 0; k < kNumBins; ++k) {
        buf[k][0] = spec(k, frame).real();
        buf[k][1] = spec(k, frame).imag();
    }
    fftw_execute_dft_c2r(plans.inverse, buf.data(), dest);
    const double scale = 1.0 / static_cast<double>(kFftSize);
    for (std::size_t n = 0; n < kWindowLength; ++n) dest[n] *= scale * window[n];
}

void check_spec_layout(const ComplexSpectrogram& spec) {
    if (spec.num_bins() != kNumBins || spec.fft_size() != kFftSize || spec.hop() != kHop)
        throw ShapeError("istft: spectrogram was not produced with the 640/160 configuration");
}

} // namespace

double hz_to_mel(double hz) noexcept { return 2595.0 * std::log10(1.0 + hz / 700.0); }
double mel_to_hz(double mel) noexcept { return 700.0 * (std::pow(10.0, mel / 2595.0) - 1.0); }

std::vector<double> hamming_window(std::size_t length) {
    std::vector<double> w(length, 1.0);
    if (length < 2) return w;
    const double denom = static_cast<double>(length - 1);
    for (std::size_t n = 0; n < length; ++n)
        w[n] = 0.54 - 0.46 * std::cos(2.0 * std::numbers::pi * static_cast<double>(n) / denom);
    return w;
}

Waveform peak_normalize(const Waveform& wav) {
    double peak = 0.0;
    for (double s : wav.samples) peak = std::max(peak, std::abs(s));
    Waveform out = wav;
    if (peak == 0.0) return out;
    for (double& s : out.samples) s /= peak;
    return out;
}

std::size_t num_frames_for(std::size_t num_samples) noexcept {
    if (num_samples < kWindowLength) return 0;
    return (num_samples - kWindowLength) / kHop + 1;
}

ComplexSpectrogram stft(const Waveform& wav, kernels::Exec exec) {
    if (wav.sample_rate_hz != kSampleRate)
        throw InvalidInput("stft: expected 16 kHz audio, got " + std::to_string(wav.sample_rate_hz) + " Hz");
    const std::size_t frames = num_frames_for(wav.size());
    if (frames == 0)
        throw InvalidInput("stft: signal of " + std::to_string(wav.size()) +
                           " samples is shorter than one 640-sample window");
    ComplexSpectrogram spec(kNumBins, frames);
    const auto& window = default_window();
    const auto& plans = plans_for(kFftSize);

    if (exec == kernels::Exec::serial) {
        std::vector<double> buf(kFftSize);
        std::vector<fftw_complex> out(kNumBins);
        for (std::size_t l = 0; l < frames; ++l) analyze_frame(wav, l, window, plans, buf, out, spec);
        return spec;
    }
#pragma omp parallel
    {
        std::vector<double> buf(kFftSize);
        std::vector<fftw_complex> out(kNumBins);
#pragma omp for schedule(static)
        for (long l = 0; l < static_cast<long>(frames); ++l)
            analyze_frame(wav, static_cast<std::size_t>(l), window, plans, buf, out, spec);
    }
    return spec;
}

Waveform istft(const ComplexSpectrogram& spec, std::size_t num_samples, kernels::Exec exec) {
    check_spec_layout(spec);
    const std::size_t frames = spec.num_frames();
    if (num_frames_for(num_samples) != frames)
        throw ShapeError("istft: " + std::to_string(num_samples) + " samples is inconsistent with " +
                         std::to_string(frames) + " frames");
    const auto& window = default_window();
    const auto& plans = plans_for(kFftSize);

    // Frames are synthesized independently, then overlap-added in frame order.
    std::vector<double> segments(frames * kWindowLength);
    if (exec == kernels::Exec::serial) {
        std::vector<fftw_complex> buf(kNumBins);
        for (std::size_t l = 0; l < frames; ++l)
            synthesize_frame(spec, l, window, plans, buf, segments.data() + l * kWindowLength);
    } else {
#pragma omp parallel
        {
            std::vector<fftw_complex> buf(kNumBins);
#pragma omp for schedule(static)
            for (long l = 0; l < static_cast<long>(frames); ++l)
                synthesize_frame(spec, static_cast<std::size_t>(l), window, plans, buf,
                                 segments.data() + static_cast<std::size_t>(l) * kWindowLength);
        }
    }

    std::vector<double> acc(num_samples, 0.0);
    std::vector<double> norm(num_samples, 0.0);
    for (std::size_t l = 0; l < frames; ++l) {
        const std::size_t offset = l * kHop;
        const double* seg = segments.data() + l * kWindowLength;
        for (std::size_t n = 0; n < kWindowLength; ++n) {
            acc[offset + n] += seg[n];
            norm[offset + n] += window[n] * window[n];
        }
    }
    Waveform out{std::move(acc), kSampleRate};
    for (std::size_t i = 0; i < num_samples; ++i) out.samples[i] = norm[i] > 1e-12 ? out.samples[i] / norm[i] : 0.0;
    return out;
}

MagnitudeSpectrogram magnitude(const ComplexSpectrogram& spec) {
    Matrix mag(spec.num_bins(), spec.num_frames());
    for (std::size_t k = 0; k < spec.num_bins(); ++k)
        for (std::size_t l = 0; l < spec.num_frames(); ++l) mag(k, l) = std::abs(spec(k, l));
    return {std::move(mag)};
}

namespace {

Matrix slice_frames(const Matrix& m, std::size_t first, std::size_t count, std::size_t chunk_len) {
    Matrix chunk(m.rows(), chunk_len, 0.0);
    for (std::size_t k = 0; k < m.rows(); ++k)
        for (std::size_t j = 0; j < count; ++j) chunk(k, j) = m(k, first + j);
    return chunk;
}

} // namespace

std::vector<Matrix> chunk_frames(const MagnitudeSpectrogram& mag, std::size_t chunk_len) {
    if (chunk_len == 0) throw InvalidInput("chunk_frames: chunk length must be positive");
    const std::size_t frames = mag.values.cols();
    if (frames < chunk_len)
        throw InvalidInput("chunk_frames: " + std::to_string(frames) + " frames is fewer than one chunk of " +
                           std::to_string(chunk_len));
    std::vector<Matrix> chunks;
    for (std::size_t first = 0; first + chunk_len <= frames; first += chunk_len)
        chunks.push_back(slice_frames(mag.values, first, chunk_len, chunk_len));
    return chunks;
}

std::vector<Matrix> chunk_frames_padded(const MagnitudeSpectrogram& mag, std::size_t& last_valid,
                                        std::size_t chunk_len) {
    if (chunk_len == 0) throw InvalidInput("chunk_frames_padded: chunk length must be positive");
    const std::size_t frames = mag.values.cols();
    std::vector<Matrix> chunks;
    last_valid = 0;
    for (std::size_t first = 0; first < frames; first += chunk_len) {
        const std::size_t count = std::min(chunk_len, frames - first);
        chunks.push_back(slice_frames(mag.values, first, count, chunk_len));
        last_valid = count;
    }
    return chunks;
}

MelFilterbank MelFilterbank::from_weights(Matrix weights, double f_min_hz, double f_max_hz) {
    MelFilterbank fb;
    for (std::size_t q = 0; q < weights.rows(); ++q) {
        std::size_t begin = weights.cols();
        std::size_t end = 0;
        for (std::size_t k = 0; k < weights.cols(); ++k) {
            const double w = weights(q, k);
            if (!(w >= 0.0) || !std::isfinite(w))
                throw InvalidInput("MelFilterbank: weights must be finite and nonnegative");
            if (w > 0.0) {
                begin = std::min(begin, k);
                end = k + 1;
            }
        }
        if (end == 0) throw InvalidInput("MelFilterbank: row " + std::to_string(q) + " has no positive weight");
        fb.bands_.push_back({begin, end});
        // Weighted mean frequency index stands in for a centre when none is given.
        double num = 0.0;
        double den = 0.0;
        for (std::size_t k = begin; k < end; ++k) {
            num += static_cast<double>(k) * weights(q, k);
            den += weights(q, k);
        }
        fb.centers_.push_back(num / den);
    }
    fb.weights_ = std::move(weights);
    fb.f_min_ = f_min_hz;
    fb.f_max_ = f_max_hz;
    return fb;
}

MelFilterbank mel_filterbank(std::size_t num_mel, std::size_t fft_size, int sample_rate_hz, double f_min_hz,
                             double f_max_hz) {
    if (num_mel == 0 || fft_size < 2 || sample_rate_hz <= 0 || !(f_max_hz > f_min_hz) || f_min_hz < 0.0)
        throw InvalidInput("mel_filterbank: invalid configuration");
    const std::size_t bins = fft_size / 2 + 1;
    const double mel_lo = hz_to_mel(f_min_hz);
    const double mel_hi = hz_to_mel(f_max_hz);
    std::vector<double> edges(num_mel + 2);
    for (std::size_t i = 0; i < edges.size(); ++i)
        edges[i] = mel_to_hz(mel_lo + (mel_hi - mel_lo) * static_cast<double>(i) / static_cast<double>(num_mel + 1));

    Matrix weights(num_mel, bins, 0.0);
    const double bin_hz = static_cast<double>(sample_rate_hz) / static_cast<double>(fft_size);
    for (std::size_t q = 0; q < num_mel; ++q) {
        const double left = edges[q];
        const double centre = edges[q + 1];
        const double right = edges[q + 2];
        for (std::size_t k = 0; k < bins; ++k) {
            const double f = static_cast<double>(k) * bin_hz;
            const double rise = (f - left) / (centre - left);
            const double fall = (right - f) / (right - centre);
            weights(q, k) = std::max(0.0, std::min(rise, fall));
        }
    }
    MelFilterbank fb = MelFilterbank::from_weights(std::move(weights), f_min_hz, f_max_hz);
    fb.centers_.assign(edges.begin() + 1, edges.end() - 1);
    return fb;
}

Matrix mel_apply(const MelFilterbank& fb, const Matrix& x, kernels::Exec exec) {
    if (x.rows() != fb.num_bins())
        throw ShapeError("mel_project: magnitude has " + std::to_string(x.rows()) + " bins, filterbank expects " +
                         std::to_string(fb.num_bins()));
    Matrix out(fb.num_mel(), x.cols());
    const auto project = exec == kernels::Exec::serial ? &kernels::serial::banded_project
                                                       : &kernels::omp::banded_project;
    project(fb.num_mel(), fb.num_bins(), x.cols(), fb.weights().flat(), fb.bands(), x.flat(), out.flat());
    return out;
}

Matrix mel_apply_transposed(const MelFilterbank& fb, const Matrix& g, kernels::Exec exec) {
    if (g.rows() != fb.num_mel()) throw ShapeError("mel back-projection: row count does not match Q");
    Matrix out(fb.num_bins(), g.cols());
    const auto back = exec == kernels::Exec::serial ? &kernels::serial::banded_backproject
                                                    : &kernels::omp::banded_backproject;
    back(fb.num_mel(), fb.num_bins(), g.cols(), fb.weights().flat(), fb.bands(), g.flat(), out.flat());
    return out;
}

MelSpectrogram mel_project(const MelFilterbank& fb, const MagnitudeSpectrogram& mag, kernels::Exec exec) {
    return {mel_apply(fb, mag.values, exec)};
}

} // namespace selab::dsp
