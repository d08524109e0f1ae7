#include "selab/enhance.hpp"

#include <algorithm>
#include <complex>

#include "selab/error.hpp"

namespace selab::enhance {

using objectives::Approach;

dsp::ComplexSpectrogram with_phase(const Matrix& magnitude, const dsp::ComplexSpectrogram& phase_source) {
    if (magnitude.rows() != phase_source.num_bins() || magnitude.cols() != phase_source.num_frames())
        throw ShapeError("with_phase: magnitude and spectrogram shapes differ");
    dsp::ComplexSpectrogram out(phase_source.num_bins(), phase_source.num_frames(), phase_source.fft_size(),
                                phase_source.hop());
    for (std::size_t k = 0; k < magnitude.rows(); ++k)
        for (std::size_t l = 0; l < magnitude.cols(); ++l) {
            const auto y = phase_source(k, l);
            const double r = std::abs(y);
            // A bin with no energy has no phase; treat it as zero phase.
            out(k, l) = r > 0.0 ? magnitude(k, l) * (y / r) : std::complex<double>(magnitude(k, l), 0.0);
        }
    return out;
}

EnhanceResult reconstruct(objectives::ObjectiveId id, const dsp::Waveform& noisy,
                          const dsp::ComplexSpectrogram& noisy_spec, const Matrix& net_output) {
    objectives::require_valid(id);
    const auto noisy_mag = dsp::magnitude(noisy_spec);
    require_same_shape(net_output, noisy_mag.values, "reconstruct");
    if (!all_finite(net_output)) throw NonFiniteError("reconstruct: non-finite network output");

    EnhanceResult res;
    if (id.approach == Approach::dm) {
        Matrix mag = net_output;
        for (double& v : mag.flat()) v = std::max(v, 0.0);
        res.enhanced_mag = {std::move(mag)};
    } else {
        signal::Mask mask = signal::clip_mask(net_output, objectives::mask_kind_for(id));
        res.enhanced_mag = signal::apply_mask(mask, noisy_mag);
        res.mask_used = std::move(mask);
    }
    res.enhanced = dsp::istft(with_phase(res.enhanced_mag.values, noisy_spec), noisy.size());
    return res;
}

EnhanceResult enhance_utterance(const estimator::EstimatorModel& model, objectives::ObjectiveId id,
                                const dsp::Waveform& noisy, const std::vector<std::vector<double>>& aux) {
    objectives::require_valid(id);
    if (model.output_activation != objectives::output_activation_for(id))
        throw InvalidInput("enhance: model output activation does not match objective " + objectives::to_string(id));
    if (model.shape.bins != dsp::kNumBins) throw ShapeError("enhance: model was not built for 321-bin chunks");
    const auto spec = dsp::stft(noisy);
    const auto mag = dsp::magnitude(spec);

    std::size_t last_valid = 0;
    const auto chunks = dsp::chunk_frames_padded(mag, last_valid, model.shape.frames);
    if (model.shape.aux_dim > 0 && aux.size() != chunks.size())
        throw ShapeError("enhance: model expects one aux vector per chunk (" + std::to_string(chunks.size()) +
                         "), got " + std::to_string(aux.size()));

    std::vector<const Matrix*> chunk_ptrs;
    std::vector<const std::vector<double>*> aux_ptrs;
    for (std::size_t c = 0; c < chunks.size(); ++c) {
        chunk_ptrs.push_back(&chunks[c]);
        if (model.shape.aux_dim > 0) aux_ptrs.push_back(&aux[c]);
    }
    const auto preacts = estimator::forward_preactivation(model, chunk_ptrs, aux_ptrs);

    const std::size_t frames = mag.values.cols();
    Matrix output(mag.values.rows(), frames);
    for (std::size_t c = 0; c < preacts.size(); ++c) {
        const Matrix out = objectives::apply_activation(model.output_activation, preacts[c]);
        const std::size_t first = c * model.shape.frames;
        const std::size_t valid = c + 1 == preacts.size() ? last_valid : model.shape.frames;
        for (std::size_t k = 0; k < out.rows(); ++k)
            for (std::size_t j = 0; j < valid; ++j) output(k, first + j) = out(k, j);
    }
    return reconstruct(id, noisy, spec, output);
}

} // namespace selab::enhance
