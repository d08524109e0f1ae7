#include "selab/synthdata.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

#include "selab/error.hpp"

namespace selab::synth {
namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;
constexpr double kSyllableSeconds = 0.25; // 4 Hz syllable rate
constexpr double kMaxHarmonicHz = 7500.0;
constexpr int kMaxHarmonics = 96; // 7500 Hz over the lowest reachable f0

std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

std::size_t sample_count(double seconds, const char* what) {
    if (!std::isfinite(seconds) || seconds < kMinSeconds)
        throw InvalidInput(std::string(what) + ": duration must be at least 0.2 s");
    return static_cast<std::size_t>(std::lround(seconds * dsp::kSampleRate));
}

struct Syllable {
    std::array<double, 3> formant_hz;
    double gain;
    double pitch_offset;
};

double formant_gain(double f, const std::array<double, 3>& formants) {
    static constexpr std::array<double, 3> kAmp{1.0, 0.6, 0.3};
    static constexpr std::array<double, 3> kBandwidth{90.0, 120.0, 170.0};
    double g = 0.02;
    for (std::size_t i = 0; i < 3; ++i) {
        const double x = (f - formants[i]) / kBandwidth[i];
        g += kAmp[i] / (1.0 + x * x);
    }
    return g;
}

dsp::Waveform white_gaussian(std::mt19937_64& rng, std::size_t n) {
    std::normal_distribution<double> normal(0.0, 1.0);
    dsp::Waveform w{std::vector<double>(n), dsp::kSampleRate};
    for (double& s : w.samples) s = normal(rng);
    return w;
}

} // namespace

std::string to_string(NoiseKind kind) {
    switch (kind) {
    case NoiseKind::white: return "white";
    case NoiseKind::ssn_proxy: return "ssn_proxy";
    case NoiseKind::babble_proxy: return "babble_proxy";
    }
    return "?";
}

NoiseKind parse_noise_kind(std::string_view name) {
    for (auto k : {NoiseKind::white, NoiseKind::ssn_proxy, NoiseKind::babble_proxy})
        if (to_string(k) == name) return k;
    throw InvalidInput("unknown noise kind '" + std::string(name) + "' (expected white, ssn_proxy, babble_proxy)");
}

std::string to_string(Split split) {
    switch (split) {
    case Split::train: return "train";
    case Split::validation: return "validation";
    case Split::test: return "test";
    }
    return "?";
}

Split parse_split(std::string_view name) {
    for (auto s : {Split::train, Split::validation, Split::test})
        if (to_string(s) == name) return s;
    throw InvalidInput("unknown split '" + std::string(name) + "'");
}

std::vector<double> default_snr_grid() {
    std::vector<double> grid;
    for (int i = 0; i < 9; ++i) grid.push_back(-20.0 + 5.0 * i);
    return grid;
}

std::vector<double> default_test_snr_grid() {
    std::vector<double> grid;
    for (int i = 0; i < 7; ++i) grid.push_back(-15.0 + 5.0 * i);
    return grid;
}

dsp::Waveform gen_clean(std::uint64_t seed, double seconds) {
    const std::size_t n = sample_count(seconds, "gen_clean");
    std::mt19937_64 rng(splitmix64(seed));
    auto uniform = [&rng](double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng); };

    const double f0_base = uniform(95.0, 210.0);
    const double vibrato_hz = uniform(0.3, 1.2);
    const double vibrato_phase = uniform(0.0, kTwoPi);
    const double envelope_phase = uniform(0.0, kTwoPi);
    const std::size_t num_syllables = static_cast<std::size_t>(std::ceil(seconds / kSyllableSeconds)) + 2;
    std::vector<Syllable> syllables(num_syllables);
    for (auto& s : syllables) {
        s.formant_hz = {uniform(300.0, 850.0), uniform(900.0, 2300.0), uniform(2300.0, 3200.0)};
        s.gain = uniform(0.4, 1.0);
        s.pitch_offset = uniform(-0.1, 0.1);
    }
    std::normal_distribution<double> breath(0.0, 0.003);

    dsp::Waveform out{std::vector<double>(n), dsp::kSampleRate};
    const double fs = dsp::kSampleRate;
    double phase = 0.0;
    std::array<double, kMaxHarmonics + 1> weight{};
    for (std::size_t i = 0; i < n; ++i) {
        const double t = static_cast<double>(i) / fs;
        const double pos = t / kSyllableSeconds;
        const auto j = static_cast<std::size_t>(pos);
        const double blend = 0.5 - 0.5 * std::cos(std::numbers::pi * (pos - static_cast<double>(j)));
        const Syllable& a = syllables[j];
        const Syllable& b = syllables[j + 1];
        std::array<double, 3> formants{};
        for (std::size_t f = 0; f < 3; ++f) formants[f] = a.formant_hz[f] + blend * (b.formant_hz[f] - a.formant_hz[f]);
        const double gain = a.gain + blend * (b.gain - a.gain);
        const double pitch = a.pitch_offset + blend * (b.pitch_offset - a.pitch_offset);

        const double f0 = f0_base * (1.0 + 0.06 * std::sin(kTwoPi * vibrato_hz * t + vibrato_phase) + pitch);
        phase = std::fmod(phase + kTwoPi * f0 / fs, kTwoPi);
        const double env = std::pow(0.5 - 0.5 * std::cos(kTwoPi * t / kSyllableSeconds + envelope_phase), 1.5) * gain;

        const int harmonics = std::min(kMaxHarmonics, static_cast<int>(std::ceil(kMaxHarmonicHz / f0)) - 1);
        for (int h = 1; h <= harmonics; ++h) weight[h] = formant_gain(h * f0, formants) / h;
        // sin(h x) by the Chebyshev recurrence.
        const double two_cos = 2.0 * std::cos(phase);
        double s_prev = 0.0;
        double s_cur = std::sin(phase);
        double voiced = 0.0;
        for (int h = 1; h <= harmonics; ++h) {
            voiced += weight[h] * s_cur;
            const double s_next = two_cos * s_cur - s_prev;
            s_prev = s_cur;
            s_cur = s_next;
        }
        out.samples[i] = env * (voiced + breath(rng));
    }
    return dsp::peak_normalize(out);
}

std::array<std::uint64_t, kBabbleTalkers> babble_component_seeds(std::uint64_t seed) {
    std::array<std::uint64_t, kBabbleTalkers> seeds{};
    std::uint64_t state = seed ^ 0xbabb1e0000000000ULL;
    for (auto& s : seeds) s = state = splitmix64(state);
    return seeds;
}

const std::vector<double>& clean_long_term_spectrum() {
    static const std::vector<double> spectrum = [] {
        std::vector<double> acc(dsp::kNumBins, 0.0);
        std::size_t frames = 0;
        for (std::uint64_t s = 0; s < 8; ++s) {
            const auto mag = dsp::magnitude(dsp::stft(gen_clean(0x5eed0000ULL + s, 2.0))).values;
            for (std::size_t k = 0; k < mag.rows(); ++k)
                for (std::size_t l = 0; l < mag.cols(); ++l) acc[k] += mag(k, l) * mag(k, l);
            frames += mag.cols();
        }
        for (double& v : acc) v /= static_cast<double>(frames);
        return acc;
    }();
    return spectrum;
}

dsp::Waveform gen_noise(NoiseKind kind, std::uint64_t seed, double seconds) {
    const std::size_t n = sample_count(seconds, "gen_noise");
    switch (kind) {
    case NoiseKind::white: {
        std::mt19937_64 rng(splitmix64(seed ^ 0x1111ULL));
        return dsp::peak_normalize(white_gaussian(rng, n));
    }
    case NoiseKind::ssn_proxy: {
        // Shape white noise in the STFT domain; pad so the cropped region is fully covered by frames.
        std::mt19937_64 rng(splitmix64(seed ^ 0x2222ULL));
        const std::size_t pad = dsp::kWindowLength;
        const auto raw = white_gaussian(rng, n + 2 * pad + dsp::kHop);
        const std::size_t frames = dsp::num_frames_for(raw.size());
        const std::size_t used = (frames - 1) * dsp::kHop + dsp::kWindowLength;
        dsp::Waveform trimmed{std::vector<double>(raw.samples.begin(), raw.samples.begin() + static_cast<std::ptrdiff_t>(used)),
                              dsp::kSampleRate};
        auto spec = dsp::stft(trimmed);
        const auto& ltas = clean_long_term_spectrum();
        double mean = 0.0;
        for (double v : ltas) mean += v;
        mean /= static_cast<double>(ltas.size());
        for (std::size_t k = 0; k < spec.num_bins(); ++k) {
            const double h = std::sqrt(ltas[k] / mean);
            for (std::size_t l = 0; l < spec.num_frames(); ++l) spec(k, l) *= h;
        }
        const auto shaped = dsp::istft(spec, used);
        dsp::Waveform out{std::vector<double>(shaped.samples.begin() + static_cast<std::ptrdiff_t>(pad),
                                              shaped.samples.begin() + static_cast<std::ptrdiff_t>(pad + n)),
                          dsp::kSampleRate};
        return dsp::peak_normalize(out);
    }
    case NoiseKind::babble_proxy: {
        dsp::Waveform sum{std::vector<double>(n, 0.0), dsp::kSampleRate};
        for (auto s : babble_component_seeds(seed)) {
            const auto talker = gen_clean(s, seconds);
            for (std::size_t i = 0; i < n; ++i) sum.samples[i] += talker.samples[i];
        }
        return dsp::peak_normalize(sum);
    }
    }
    throw InvalidInput("gen_noise: unknown noise kind");
}

std::vector<std::vector<double>> envelope_aux(const dsp::MagnitudeSpectrogram& clean_mag, std::size_t chunk_len) {
    const Matrix& a = clean_mag.values;
    std::vector<double> energy(a.cols(), 0.0);
    for (std::size_t k = 0; k < a.rows(); ++k)
        for (std::size_t l = 0; l < a.cols(); ++l) energy[l] += a(k, l) * a(k, l);
    const double peak = energy.empty() ? 0.0 : *std::max_element(energy.begin(), energy.end());

    std::vector<std::vector<double>> chunks;
    for (std::size_t first = 0; first < a.cols(); first += chunk_len) {
        std::vector<double> aux(chunk_len, 0.0);
        for (std::size_t j = 0; j < chunk_len && first + j < a.cols(); ++j) {
            const double e = energy[first + j];
            if (peak <= 0.0 || e <= 0.0) continue;
            const double db = std::clamp(10.0 * std::log10(e / peak), -kAuxRangeDb, 0.0);
            const auto level = std::min<std::size_t>(
                kAuxLevels - 1, static_cast<std::size_t>((db + kAuxRangeDb) / kAuxRangeDb * kAuxLevels));
            aux[j] = static_cast<double>(level) / static_cast<double>(kAuxLevels - 1);
        }
        chunks.push_back(std::move(aux));
    }
    return chunks;
}

std::uint64_t material_seed(std::uint64_t corpus_seed, Split split, int role, std::size_t index) {
    if (index >= (std::size_t{1} << 26)) throw InvalidInput("material_seed: index out of range");
    return ((corpus_seed & 0xffffffffULL) << 32) | (static_cast<std::uint64_t>(split) << 28) |
           (static_cast<std::uint64_t>(role) << 26) | static_cast<std::uint64_t>(index);
}

std::vector<estimator::TrainingExample> make_examples(const signal::Mixture& mix,
                                                      const std::shared_ptr<const dsp::MelFilterbank>& fb,
                                                      bool with_aux) {
    const auto clean_spec = dsp::stft(mix.clean);
    const auto noisy_spec = dsp::stft(mix.noisy);
    const auto clean_mag = dsp::magnitude(clean_spec);
    const auto noisy_mag = dsp::magnitude(noisy_spec);
    const auto theta = signal::phase_difference(noisy_spec, clean_spec);
    const auto aux = with_aux ? envelope_aux(clean_mag) : std::vector<std::vector<double>>{};

    const std::size_t frames = clean_mag.values.cols();
    std::vector<estimator::TrainingExample> out;
    for (std::size_t c = 0; (c + 1) * dsp::kChunkFrames <= frames; ++c) {
        auto slice = [&](const Matrix& m) {
            Matrix s(m.rows(), dsp::kChunkFrames);
            for (std::size_t k = 0; k < m.rows(); ++k)
                for (std::size_t j = 0; j < dsp::kChunkFrames; ++j) s(k, j) = m(k, c * dsp::kChunkFrames + j);
            return s;
        };
        objectives::LossContext ctx({slice(clean_mag.values)}, {slice(noisy_mag.values)}, {slice(theta.theta)}, fb);
        out.push_back({std::move(ctx), with_aux ? aux[c] : std::vector<double>{}});
    }
    return out;
}

namespace {

std::vector<MixtureRecord> build_split(const CorpusSpec& spec, Split split, std::size_t utterances,
                                       const std::vector<double>& grid, Pairing pairing,
                                       const std::shared_ptr<const dsp::MelFilterbank>& fb, bool contexts) {
    if (grid.empty() || spec.noise_kinds.empty()) throw InvalidInput("build_dataset: empty SNR grid or noise kinds");
    struct Job {
        std::size_t utterance;
        std::size_t kind;
        double snr;
    };
    std::vector<Job> jobs;
    for (std::size_t u = 0; u < utterances; ++u) {
        if (pairing == Pairing::round_robin) {
            jobs.push_back({u, (u / grid.size()) % spec.noise_kinds.size(), grid[u % grid.size()]});
            continue;
        }
        for (std::size_t k = 0; k < spec.noise_kinds.size(); ++k)
            for (double snr : grid) jobs.push_back({u, k, snr});
    }

    std::vector<MixtureRecord> records(jobs.size());
    const auto n = static_cast<long>(jobs.size());
    std::vector<std::string> errors(jobs.size());
#pragma omp parallel for schedule(dynamic)
    for (long i = 0; i < n; ++i) {
        const auto u = static_cast<std::size_t>(i);
        try {
            const Job& job = jobs[u];
            MixtureRecord& rec = records[u];
            rec.split = split;
            rec.index = u;
            rec.utterance = job.utterance;
            rec.noise_kind = spec.noise_kinds[job.kind];
            rec.clean_seed = material_seed(spec.seed, split, 0, job.utterance);
            rec.noise_seed = material_seed(spec.seed, split, 1, job.utterance * spec.noise_kinds.size() + job.kind);
            const auto clean = gen_clean(rec.clean_seed, spec.utterance_seconds);
            const auto noise = gen_noise(rec.noise_kind, rec.noise_seed, spec.utterance_seconds);
            auto mix = signal::mix_at_snr(clean, noise, job.snr);
            // The mixture is what gets peak-normalized; clean and noise follow with the same gain.
            double peak = 0.0;
            for (double s : mix.noisy.samples) peak = std::max(peak, std::abs(s));
            rec.mixture = signal::scale_mixture(mix, 1.0 / peak);
            if (contexts) rec.examples = make_examples(rec.mixture, fb, spec.with_aux);
            if (spec.with_aux) rec.aux = envelope_aux(dsp::magnitude(dsp::stft(rec.mixture.clean)));
        } catch (const std::exception& e) {
            errors[u] = e.what();
        }
    }
    for (const auto& e : errors)
        if (!e.empty()) throw InvalidInput("build_dataset: " + e);
    return records;
}

} // namespace

Dataset build_dataset(const CorpusSpec& spec) {
    if (spec.num_utterances == 0 || spec.num_validation_utterances == 0)
        throw InvalidInput("build_dataset: train and validation splits need utterances");
    Dataset ds;
    ds.filterbank = std::make_shared<const dsp::MelFilterbank>(dsp::mel_filterbank());
    ds.train = build_split(spec, Split::train, spec.num_utterances, spec.snr_grid_db, spec.train_pairing, ds.filterbank, true);
    ds.validation = build_split(spec, Split::validation, spec.num_validation_utterances, spec.snr_grid_db,
                                spec.train_pairing, ds.filterbank, true);
    if (spec.num_test_utterances > 0)
        ds.test = build_split(spec, Split::test, spec.num_test_utterances, spec.test_snr_grid_db, spec.test_pairing,
                              ds.filterbank, spec.test_contexts);
    return ds;
}

std::vector<estimator::TrainingExample> collect_examples(const std::vector<MixtureRecord>& records) {
    std::vector<estimator::TrainingExample> out;
    for (const auto& rec : records) out.insert(out.end(), rec.examples.begin(), rec.examples.end());
    return out;
}

} // namespace selab::synth
