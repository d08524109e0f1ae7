#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "selab/synthdata.hpp"

namespace selab::corpus {

inline constexpr const char* kManifestName = "manifest.tsv";

/// One line of manifest.tsv. Paths are relative to the corpus directory.
/// Fields, tab-separated: split index utterance clean_path noise_path
/// noisy_path snr_db noise_kind clean_seed noise_seed.
struct ManifestEntry {
    synth::Split split = synth::Split::train;
    std::size_t index = 0;
    std::size_t utterance = 0;
    std::string clean_path;
    std::string noise_path;
    std::string noisy_path;
    double snr_db = 0.0;
    synth::NoiseKind noise_kind = synth::NoiseKind::white;
    std::uint64_t clean_seed = 0;
    std::uint64_t noise_seed = 0;

    bool operator==(const ManifestEntry&) const = default;
};

std::string format_manifest(const std::vector<ManifestEntry>& entries);
std::vector<ManifestEntry> parse_manifest(const std::string& text);

/// Writes <split>/<index>_{clean,noise,noisy}.wav for every mixture plus manifest.tsv.
std::vector<ManifestEntry> write_corpus(const std::filesystem::path& dir, const synth::Dataset& dataset);

/// Reloads a written corpus. Loss contexts are rebuilt from the clean and
/// noisy WAVs for the train and validation splits.
synth::Dataset read_corpus(const std::filesystem::path& dir, bool with_aux);

} // namespace selab::corpus
