#pragma once

#include <complex>
#include <cstddef>
#include <vector>

#include "selab/kernels.hpp"
#include "selab/matrix.hpp"

namespace selab::dsp {

inline constexpr int kSampleRate = 16000;
inline constexpr std::size_t kFftSize = 640;
inline constexpr std::size_t kWindowLength = 640;
inline constexpr std::size_t kHop = 160;
inline constexpr std::size_t kNumBins = kFftSize / 2 + 1; // 321
inline constexpr std::size_t kChunkFrames = 20;           // 200 ms
inline constexpr std::size_t kNumMel = 80;
inline constexpr double kMelMinHz = 0.0;
inline constexpr double kMelMaxHz = 8000.0;

struct Waveform {
    std::vector<double> samples;
    int sample_rate_hz = kSampleRate;

    std::size_t size() const noexcept { return samples.size(); }
};

/// F x T complex half-spectrum. Element (k, l) is bin k of frame l.
class ComplexSpectrogram {
public:
    ComplexSpectrogram() = default;
    ComplexSpectrogram(std::size_t bins, std::size_t frames, std::size_t fft_size = kFftSize,
                       std::size_t hop = kHop)
        : bins_(bins), frames_(frames), fft_size_(fft_size), hop_(hop), data_(bins * frames) {}

    std::size_t num_bins() const noexcept { return bins_; }
    std::size_t num_frames() const noexcept { return frames_; }
    std::size_t fft_size() const noexcept { return fft_size_; }
    std::size_t hop() const noexcept { return hop_; }

    std::complex<double>& operator()(std::size_t k, std::size_t l) noexcept { return data_[k * frames_ + l]; }
    const std::complex<double>& operator()(std::size_t k, std::size_t l) const noexcept {
        return data_[k * frames_ + l];
    }
    bool same_shape(const ComplexSpectrogram& o) const noexcept {
        return bins_ == o.bins_ && frames_ == o.frames_;
    }

private:
    std::size_t bins_ = 0;
    std::size_t frames_ = 0;
    std::size_t fft_size_ = kFftSize;
    std::size_t hop_ = kHop;
    std::vector<std::complex<double>> data_;
};

/// Nonnegative F x T magnitudes (A for clean speech, R for the mixture).
struct MagnitudeSpectrogram {
    Matrix values;
};

/// Nonnegative Q x T Mel-band magnitudes.
struct MelSpectrogram {
    Matrix values;
};

/// Q x F nonnegative projection onto Mel bands. Each row is a triangle, so
/// the nonzero support of row q is the contiguous range bands[q].
class MelFilterbank {
public:
    /// Wraps arbitrary nonnegative weights; every row needs a positive entry.
    static MelFilterbank from_weights(Matrix weights, double f_min_hz = 0.0, double f_max_hz = 0.0);

    const Matrix& weights() const noexcept { return weights_; }
    std::size_t num_mel() const noexcept { return weights_.rows(); }
    std::size_t num_bins() const noexcept { return weights_.cols(); }
    double f_min_hz() const noexcept { return f_min_; }
    double f_max_hz() const noexcept { return f_max_; }
    const std::vector<double>& center_hz() const noexcept { return centers_; }
    const std::vector<kernels::RowBand>& bands() const noexcept { return bands_; }

private:
    friend MelFilterbank mel_filterbank(std::size_t, std::size_t, int, double, double);
    Matrix weights_;
    double f_min_ = 0.0;
    double f_max_ = 0.0;
    std::vector<double> centers_;
    std::vector<kernels::RowBand> bands_;
};

double hz_to_mel(double hz) noexcept;
double mel_to_hz(double mel) noexcept;

/// Symmetric Hamming window 0.54 - 0.46 cos(2 pi n / (L - 1)).
std::vector<double> hamming_window(std::size_t length = kWindowLength);

/// Scales so that max |sample| = 1. Silence passes through unchanged.
Waveform peak_normalize(const Waveform& wav);

/// Number of fully contained analysis frames; 0 when shorter than one window.
std::size_t num_frames_for(std::size_t num_samples) noexcept;

/// 640-point STFT, Hamming window, hop 160, no padding. Throws InvalidInput
/// for signals shorter than one window or sampled at another rate.
ComplexSpectrogram stft(const Waveform& wav, kernels::Exec exec = kernels::Exec::parallel);

/// Weighted overlap-add synthesis normalized per sample by the summed squared
/// window. Samples no frame covers come out as 0.
Waveform istft(const ComplexSpectrogram& spec, std::size_t num_samples,
               kernels::Exec exec = kernels::Exec::parallel);

MagnitudeSpectrogram magnitude(const ComplexSpectrogram& spec);

/// Non-overlapping F x chunk_len slices; a trailing partial chunk is dropped.
std::vector<Matrix> chunk_frames(const MagnitudeSpectrogram& mag, std::size_t chunk_len = kChunkFrames);

/// Like chunk_frames, but the last partial chunk is zero-padded. Returns the
/// number of valid frames in the final chunk through `last_valid`.
std::vector<Matrix> chunk_frames_padded(const MagnitudeSpectrogram& mag, std::size_t& last_valid,
                                        std::size_t chunk_len = kChunkFrames);

/// Triangular filters with centres uniformly spaced on the Mel scale
/// m = 2595 log10(1 + f / 700) between f_min and f_max.
MelFilterbank mel_filterbank(std::size_t num_mel = kNumMel, std::size_t fft_size = kFftSize,
                             int sample_rate_hz = kSampleRate, double f_min_hz = kMelMinHz,
                             double f_max_hz = kMelMaxHz);

/// B * mag, frame by frame.
MelSpectrogram mel_project(const MelFilterbank& fb, const MagnitudeSpectrogram& mag,
                           kernels::Exec exec = kernels::Exec::parallel);

/// Raw-matrix forms used on the loss path: out = B x and out = B^T g.
Matrix mel_apply(const MelFilterbank& fb, const Matrix& x, kernels::Exec exec = kernels::Exec::serial);
Matrix mel_apply_transposed(const MelFilterbank& fb, const Matrix& g,
                            kernels::Exec exec = kernels::Exec::serial);

} // namespace selab::dsp
