#include "selab/signal_model.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "selab/error.hpp"

namespace selab::signal {
namespace {

void require_same_shape(const dsp::MagnitudeSpectrogram& a, const dsp::MagnitudeSpectrogram& b, const char* what) {
    selab::require_same_shape(a.values, b.values, what);
}

double safe_ratio(double clean, double noisy) { return clean / std::max(noisy, kDivisionFloor); }

} // namespace

double mean_power(const dsp::Waveform& wav) {
    if (wav.samples.empty()) return 0.0;
    double acc = 0.0;
    for (double s : wav.samples) acc += s * s;
    return acc / static_cast<double>(wav.samples.size());
}

Mixture mix_at_snr(const dsp::Waveform& clean, const dsp::Waveform& noise, double snr_db) {
    if (clean.size() != noise.size())
        throw ShapeError("mix_at_snr: clean has " + std::to_string(clean.size()) + " samples, noise has " +
                         std::to_string(noise.size()));
    if (clean.sample_rate_hz != noise.sample_rate_hz) throw InvalidInput("mix_at_snr: sample rates differ");
    if (!std::isfinite(snr_db)) throw InvalidInput("mix_at_snr: SNR must be finite");
    const double p_clean = mean_power(clean);
    const double p_noise = mean_power(noise);
    if (p_clean <= 0.0 || p_noise <= 0.0) throw InvalidInput("mix_at_snr: zero-power signal, SNR is undefined");

    Mixture mix;
    mix.snr_db = snr_db;
    mix.noise_gain = std::sqrt(p_clean / (p_noise * std::pow(10.0, snr_db / 10.0)));
    mix.clean = clean;
    mix.noise_scaled = noise;
    for (double& s : mix.noise_scaled.samples) s *= mix.noise_gain;
    mix.noisy = clean;
    for (std::size_t i = 0; i < mix.noisy.samples.size(); ++i) mix.noisy.samples[i] += mix.noise_scaled.samples[i];
    return mix;
}

double measured_snr_db(const Mixture& mix) {
    return 10.0 * std::log10(mean_power(mix.clean) / mean_power(mix.noise_scaled));
}

Mixture scale_mixture(const Mixture& mix, double gain) {
    Mixture out = mix;
    for (auto* wav : {&out.clean, &out.noise_scaled, &out.noisy})
        for (double& s : wav->samples) s *= gain;
    out.noise_gain *= gain;
    return out;
}

PhaseDiff phase_difference(const dsp::ComplexSpectrogram& noisy, const dsp::ComplexSpectrogram& clean) {
    if (!noisy.same_shape(clean)) throw ShapeError("phase_difference: spectrogram shapes differ");
    Matrix theta(noisy.num_bins(), noisy.num_frames());
    for (std::size_t k = 0; k < noisy.num_bins(); ++k)
        for (std::size_t l = 0; l < noisy.num_frames(); ++l) {
            // arg(Y conj(X)) is the wrapped difference; atan2 can only reach -pi via a signed zero.
            double t = std::arg(noisy(k, l) * std::conj(clean(k, l)));
            if (t <= -std::numbers::pi) t += 2.0 * std::numbers::pi;
            theta(k, l) = t;
        }
    return {std::move(theta)};
}

Mask compute_iam(const dsp::MagnitudeSpectrogram& clean, const dsp::MagnitudeSpectrogram& noisy) {
    require_same_shape(clean, noisy, "compute_iam");
    Matrix m(clean.values.rows(), clean.values.cols());
    for (std::size_t i = 0; i < m.size(); ++i)
        m.data()[i] = std::clamp(safe_ratio(clean.values.data()[i], noisy.values.data()[i]), kIamMin, kIamMax);
    return {std::move(m), MaskKind::iam, kIamMin, kIamMax};
}

Mask compute_psm(const dsp::MagnitudeSpectrogram& clean, const dsp::MagnitudeSpectrogram& noisy,
                 const PhaseDiff& theta) {
    require_same_shape(clean, noisy, "compute_psm");
    selab::require_same_shape(clean.values, theta.theta, "compute_psm");
    Matrix m(clean.values.rows(), clean.values.cols());
    for (std::size_t i = 0; i < m.size(); ++i) {
        const double raw = safe_ratio(clean.values.data()[i], noisy.values.data()[i]) * std::cos(theta.theta.data()[i]);
        m.data()[i] = std::clamp(raw, kPsmMin, kPsmMax);
    }
    return {std::move(m), MaskKind::psm, kPsmMin, kPsmMax};
}

Mask clip_mask(Matrix values, MaskKind kind) {
    const double lo = kind == MaskKind::iam ? kIamMin : kPsmMin;
    const double hi = kind == MaskKind::iam ? kIamMax : kPsmMax;
    for (double& v : values.flat()) v = std::clamp(v, lo, hi);
    return {std::move(values), kind, lo, hi};
}

dsp::MagnitudeSpectrogram apply_mask(const Mask& mask, const dsp::MagnitudeSpectrogram& noisy) {
    selab::require_same_shape(mask.values, noisy.values, "apply_mask");
    Matrix out(noisy.values.rows(), noisy.values.cols());
    for (std::size_t i = 0; i < out.size(); ++i)
        out.data()[i] = std::max(0.0, mask.values.data()[i] * noisy.values.data()[i]);
    return {std::move(out)};
}

} // namespace selab::signal
