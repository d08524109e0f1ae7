#include "selab/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "selab/error.hpp"
#include "selab/objectives.hpp"

namespace selab::metrics {
namespace {

void require_equal_length(const dsp::Waveform& a, const dsp::Waveform& b, const char* what) {
    if (a.size() != b.size())
        throw ShapeError(std::string(what) + ": reference has " + std::to_string(a.size()) + " samples, estimate has " +
                         std::to_string(b.size()));
}

} // namespace

double si_sdr(const dsp::Waveform& reference, const dsp::Waveform& estimate) {
    require_equal_length(reference, estimate, "si_sdr");
    double ref_energy = 0.0;
    double dot = 0.0;
    for (std::size_t i = 0; i < reference.size(); ++i) {
        ref_energy += reference.samples[i] * reference.samples[i];
        dot += reference.samples[i] * estimate.samples[i];
    }
    if (ref_energy <= 0.0) throw InvalidInput("si_sdr: reference signal is silent");
    const double alpha = dot / ref_energy;
    double target = 0.0;
    double residual = 0.0;
    for (std::size_t i = 0; i < reference.size(); ++i) {
        const double t = alpha * reference.samples[i];
        const double r = estimate.samples[i] - t;
        target += t * t;
        residual += r * r;
    }
    if (target <= 0.0) return -kSiSdrCapDb;
    if (residual <= 0.0) return kSiSdrCapDb;
    return std::clamp(10.0 * std::log10(target / residual), -kSiSdrCapDb, kSiSdrCapDb);
}

double segmental_snr(const dsp::Waveform& reference, const dsp::Waveform& estimate, std::size_t frame,
                     std::size_t hop) {
    require_equal_length(reference, estimate, "segmental_snr");
    if (frame == 0 || hop == 0) throw InvalidInput("segmental_snr: frame and hop must be positive");
    const std::size_t n = reference.size();
    // Signals shorter than a frame are scored as a single frame.
    const std::size_t length = std::min(frame, n);
    double sum = 0.0;
    std::size_t counted = 0;
    for (std::size_t start = 0; start + length <= n && length > 0; start += hop) {
        double p_ref = 0.0;
        double p_err = 0.0;
        for (std::size_t i = start; i < start + length; ++i) {
            const double e = reference.samples[i] - estimate.samples[i];
            p_ref += reference.samples[i] * reference.samples[i];
            p_err += e * e;
        }
        if (p_ref <= 0.0) continue;
        const double snr = p_err > 0.0 ? 10.0 * std::log10(p_ref / p_err) : kSegSnrCeilDb;
        sum += std::clamp(snr, kSegSnrFloorDb, kSegSnrCeilDb);
        ++counted;
    }
    return counted == 0 ? 0.0 : sum / static_cast<double>(counted);
}

double log_spectral_distance(const dsp::Waveform& reference, const dsp::Waveform& estimate) {
    require_equal_length(reference, estimate, "log_spectral_distance");
    const auto ref = dsp::magnitude(dsp::stft(reference)).values;
    const auto est = dsp::magnitude(dsp::stft(estimate)).values;
    double total = 0.0;
    for (std::size_t l = 0; l < ref.cols(); ++l) {
        double frame = 0.0;
        for (std::size_t k = 0; k < ref.rows(); ++k) {
            const double d = 20.0 * (std::log10(std::max(ref(k, l), objectives::kLogFloor)) -
                                     std::log10(std::max(est(k, l), objectives::kLogFloor)));
            frame += d * d;
        }
        total += frame / static_cast<double>(ref.rows());
    }
    return std::sqrt(total / static_cast<double>(ref.cols()));
}

MetricReport evaluate(const dsp::Waveform& reference, const dsp::Waveform& estimate) {
    return {si_sdr(reference, estimate), segmental_snr(reference, estimate), log_spectral_distance(reference, estimate)};
}

} // namespace selab::metrics
