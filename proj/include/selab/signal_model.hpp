#pragma once

#include "selab/dsp.hpp"
#include "selab/matrix.hpp"

namespace selab::signal {

/// Guard applied to noisy magnitudes before division.
inline constexpr double kDivisionFloor = 1e-8;

inline constexpr double kIamMin = 0.0;
inline constexpr double kIamMax = 10.0;
inline constexpr double kPsmMin = -10.0;
inline constexpr double kPsmMax = 10.0;

/// y = x + g d, with g chosen so that the clean-to-scaled-noise power ratio
/// over the whole utterance equals snr_db.
struct Mixture {
    dsp::Waveform clean;
    dsp::Waveform noise_scaled;
    dsp::Waveform noisy;
    double snr_db = 0.0;
    double noise_gain = 1.0;
};

/// Per-bin phase of Y minus phase of X, wrapped to (-pi, pi].
struct PhaseDiff {
    Matrix theta;
};

enum class MaskKind { iam, psm };

struct Mask {
    Matrix values;
    MaskKind kind = MaskKind::iam;
    double clip_lo = kIamMin;
    double clip_hi = kIamMax;
};

/// Mean squared amplitude.
double mean_power(const dsp::Waveform& wav);

Mixture mix_at_snr(const dsp::Waveform& clean, const dsp::Waveform& noise, double snr_db);

/// Measured 10 log10(P_clean / P_noise) of a mixture's components.
double measured_snr_db(const Mixture& mix);

/// Scales all three signals by the same factor; SNR and y = x + d are kept.
Mixture scale_mixture(const Mixture& mix, double gain);

PhaseDiff phase_difference(const dsp::ComplexSpectrogram& noisy, const dsp::ComplexSpectrogram& clean);

Mask compute_iam(const dsp::MagnitudeSpectrogram& clean, const dsp::MagnitudeSpectrogram& noisy);
Mask compute_psm(const dsp::MagnitudeSpectrogram& clean, const dsp::MagnitudeSpectrogram& noisy,
                 const PhaseDiff& theta);

/// Clips an estimated mask into the target range of its kind.
Mask clip_mask(Matrix values, MaskKind kind);

/// mask * R element-wise, with negative products floored at zero.
dsp::MagnitudeSpectrogram apply_mask(const Mask& mask, const dsp::MagnitudeSpectrogram& noisy);

} // namespace selab::signal
