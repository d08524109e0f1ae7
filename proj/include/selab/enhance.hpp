#pragma once

#include <optional>
#include <vector>

#include "selab/dsp.hpp"
#include "selab/estimator.hpp"
#include "selab/objectives.hpp"
#include "selab/signal_model.hpp"

namespace selab::enhance {

struct EnhanceResult {
    dsp::Waveform enhanced;
    dsp::MagnitudeSpectrogram enhanced_mag;
    std::optional<signal::Mask> mask_used;
};

/// Turns a full-length F x T network output (post-activation) into audio.
/// IM and MA outputs are clipped to their mask range and applied to |Y|;
/// DM outputs are the magnitude, floored at zero. The waveform is
/// resynthesized with the noisy phase and has `noisy`'s length.
EnhanceResult reconstruct(objectives::ObjectiveId id, const dsp::Waveform& noisy,
                          const dsp::ComplexSpectrogram& noisy_spec, const Matrix& net_output);

/// STFT, per-chunk forward pass over non-overlapping 20-frame segments (the
/// last one zero-padded), concatenation, then reconstruct(). `aux` carries
/// one vector per chunk when the model expects auxiliary features.
EnhanceResult enhance_utterance(const estimator::EstimatorModel& model, objectives::ObjectiveId id,
                                const dsp::Waveform& noisy, const std::vector<std::vector<double>>& aux = {});

/// Complex spectrogram with the given magnitudes and the phases of `phase_source`.
dsp::ComplexSpectrogram with_phase(const Matrix& magnitude, const dsp::ComplexSpectrogram& phase_source);

} // namespace selab::enhance
