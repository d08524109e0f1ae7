#pragma once

#include <array>
#include <cstdint>
#include <memory>
#include <string>
#include <string_view>
#include <vector>

#include "selab/dsp.hpp"
#include "selab/estimator.hpp"
#include "selab/signal_model.hpp"

namespace selab::synth {

enum class NoiseKind { white, ssn_proxy, babble_proxy };
enum class Split { train, validation, test };
/// cartesian: every utterance at every SNR with every noise kind.
/// round_robin: utterance i gets SNR i mod |grid| and noise kind (i / |grid|) mod |kinds|.
enum class Pairing { cartesian, round_robin };

inline constexpr std::size_t kBabbleTalkers = 8;
inline constexpr std::size_t kAuxLevels = 8;
inline constexpr double kAuxRangeDb = 60.0;
inline constexpr double kMinSeconds = 0.2;

std::string to_string(NoiseKind kind);
NoiseKind parse_noise_kind(std::string_view name);
std::string to_string(Split split);
Split parse_split(std::string_view name);

/// -20, -15, ..., 20 dB.
std::vector<double> default_snr_grid();
/// -15, -10, ..., 15 dB.
std::vector<double> default_test_snr_grid();

/// Speech-like stand-in: a pitch-modulated harmonic source shaped by slowly
/// moving formant resonances, amplitude-modulated at the 4 Hz syllable rate.
/// Peak-normalized, deterministic per seed.
dsp::Waveform gen_clean(std::uint64_t seed, double seconds);

/// white: Gaussian; ssn_proxy: white noise shaped to the long-term spectrum
/// of gen_clean; babble_proxy: the sum of kBabbleTalkers gen_clean streams.
dsp::Waveform gen_noise(NoiseKind kind, std::uint64_t seed, double seconds);

std::array<std::uint64_t, kBabbleTalkers> babble_component_seeds(std::uint64_t seed);

/// Mean power per STFT bin over a fixed reference set of gen_clean outputs.
const std::vector<double>& clean_long_term_spectrum();

/// Per-chunk aux vectors: each frame's clean energy relative to the loudest
/// frame, clipped to [-60, 0] dB and quantized to 8 levels in [0, 1].
/// Chunks follow the padded chunking used at enhancement time.
std::vector<std::vector<double>> envelope_aux(const dsp::MagnitudeSpectrogram& clean_mag,
                                              std::size_t chunk_len = dsp::kChunkFrames);

struct CorpusSpec {
    std::size_t num_utterances = 200;
    std::size_t num_validation_utterances = 40;
    std::size_t num_test_utterances = 40;
    double utterance_seconds = 1.0;
    std::vector<NoiseKind> noise_kinds{NoiseKind::white, NoiseKind::ssn_proxy, NoiseKind::babble_proxy};
    std::vector<double> snr_grid_db = default_snr_grid();
    std::vector<double> test_snr_grid_db = default_test_snr_grid();
    Pairing train_pairing = Pairing::cartesian;
    Pairing test_pairing = Pairing::cartesian;
    bool with_aux = true;
    bool test_contexts = false;
    std::uint64_t seed = 0;
};

/// Material seed for one signal. Seeds are laid out as
/// (corpus seed mod 2^32) * 2^32 + split * 2^28 + role * 2^26 + index, so
/// different splits never share material.
std::uint64_t material_seed(std::uint64_t corpus_seed, Split split, int role, std::size_t index);

struct MixtureRecord {
    Split split = Split::train;
    std::size_t index = 0;
    std::size_t utterance = 0;
    NoiseKind noise_kind = NoiseKind::white;
    std::uint64_t clean_seed = 0;
    std::uint64_t noise_seed = 0;
    signal::Mixture mixture;
    /// One example per complete 20-frame chunk.
    std::vector<estimator::TrainingExample> examples;
    /// One aux vector per padded chunk, for enhancement. Empty in audio-only mode.
    std::vector<std::vector<double>> aux;
};

struct Dataset {
    std::shared_ptr<const dsp::MelFilterbank> filterbank;
    std::vector<MixtureRecord> train;
    std::vector<MixtureRecord> validation;
    std::vector<MixtureRecord> test;
};

/// Loss contexts and aux for every complete chunk of a mixture.
std::vector<estimator::TrainingExample> make_examples(const signal::Mixture& mix,
                                                      const std::shared_ptr<const dsp::MelFilterbank>& fb,
                                                      bool with_aux);

Dataset build_dataset(const CorpusSpec& spec);

/// Flattened examples of a split, in mixture order.
std::vector<estimator::TrainingExample> collect_examples(const std::vector<MixtureRecord>& records);

} // namespace selab::synth
