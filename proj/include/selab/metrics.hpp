#pragma once

#include "selab/dsp.hpp"

namespace selab::metrics {

/// Cap reported when the residual (or the projection) vanishes.
inline constexpr double kSiSdrCapDb = 100.0;
inline constexpr double kSegSnrFloorDb = -10.0;
inline constexpr double kSegSnrCeilDb = 35.0;

/// Waveform-domain quality proxies standing in for PESQ / ESTOI.
struct MetricReport {
    double si_sdr_db = 0.0;
    double seg_snr_db = 0.0;
    double lsd_db = 0.0;
};

/// Scale-invariant SDR, clamped to +-100 dB. Throws for a silent reference.
double si_sdr(const dsp::Waveform& reference, const dsp::Waveform& estimate);

/// Mean over 640/160 frames of the per-frame SNR clamped to [-10, 35] dB.
/// Frames whose reference is silent are skipped; 0 if every frame is.
double segmental_snr(const dsp::Waveform& reference, const dsp::Waveform& estimate,
                     std::size_t frame = dsp::kWindowLength, std::size_t hop = dsp::kHop);

/// RMS over frames of the per-frame RMS of 20 (log10 |X_ref| - log10 |X_est|).
double log_spectral_distance(const dsp::Waveform& reference, const dsp::Waveform& estimate);

MetricReport evaluate(const dsp::Waveform& reference, const dsp::Waveform& estimate);

} // namespace selab::metrics
