#include "selab/corpus_io.hpp"

#include <charconv>
#include <fstream>
#include <sstream>

#include "selab/error.hpp"
#include "selab/wav.hpp"

namespace selab::corpus {
namespace {

std::string format_double(double v) {
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, res.ptr);
}

template <typename T>
T parse_number(const std::string& token, std::size_t line) {
    T v{};
    const auto res = std::from_chars(token.data(), token.data() + token.size(), v);
    if (res.ec != std::errc() || res.ptr != token.data() + token.size())
        throw FormatError("manifest line " + std::to_string(line) + ": bad number '" + token + "'");
    return v;
}

constexpr const char* kHeader =
    "#split\tindex\tutterance\tclean_path\tnoise_path\tnoisy_path\tsnr_db\tnoise_kind\tclean_seed\tnoise_seed";

std::string stem(const synth::MixtureRecord& rec) {
    return synth::to_string(rec.split) + "/" + std::to_string(rec.index);
}

} // namespace

std::string format_manifest(const std::vector<ManifestEntry>& entries) {
    std::ostringstream out;
    out << kHeader << '\n';
    for (const auto& e : entries)
        out << synth::to_string(e.split) << '\t' << e.index << '\t' << e.utterance << '\t' << e.clean_path << '\t'
            << e.noise_path << '\t' << e.noisy_path << '\t' << format_double(e.snr_db) << '\t'
            << synth::to_string(e.noise_kind) << '\t' << e.clean_seed << '\t' << e.noise_seed << '\n';
    return out.str();
}

std::vector<ManifestEntry> parse_manifest(const std::string& text) {
    std::vector<ManifestEntry> entries;
    std::istringstream in(text);
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty() || line.front() == '#') continue;
        std::vector<std::string> fields;
        std::size_t start = 0;
        while (true) {
            const auto tab = line.find('\t', start);
            fields.push_back(line.substr(start, tab - start));
            if (tab == std::string::npos) break;
            start = tab + 1;
        }
        if (fields.size() != 10)
            throw FormatError("manifest line " + std::to_string(line_no) + ": expected 10 tab-separated fields, got " +
                              std::to_string(fields.size()));
        ManifestEntry e;
        e.split = synth::parse_split(fields[0]);
        e.index = parse_number<std::size_t>(fields[1], line_no);
        e.utterance = parse_number<std::size_t>(fields[2], line_no);
        e.clean_path = fields[3];
        e.noise_path = fields[4];
        e.noisy_path = fields[5];
        e.snr_db = parse_number<double>(fields[6], line_no);
        e.noise_kind = synth::parse_noise_kind(fields[7]);
        e.clean_seed = parse_number<std::uint64_t>(fields[8], line_no);
        e.noise_seed = parse_number<std::uint64_t>(fields[9], line_no);
        entries.push_back(std::move(e));
    }
    return entries;
}

std::vector<ManifestEntry> write_corpus(const std::filesystem::path& dir, const synth::Dataset& dataset) {
    std::vector<ManifestEntry> entries;
    for (const auto* split : {&dataset.train, &dataset.validation, &dataset.test}) {
        for (const auto& rec : *split) {
            std::filesystem::create_directories(dir / synth::to_string(rec.split));
            ManifestEntry e{rec.split,
                            rec.index,
                            rec.utterance,
                            stem(rec) + "_clean.wav",
                            stem(rec) + "_noise.wav",
                            stem(rec) + "_noisy.wav",
                            rec.mixture.snr_db,
                            rec.noise_kind,
                            rec.clean_seed,
                            rec.noise_seed};
            wav::write(dir / e.clean_path, rec.mixture.clean);
            wav::write(dir / e.noise_path, rec.mixture.noise_scaled);
            wav::write(dir / e.noisy_path, rec.mixture.noisy);
            entries.push_back(std::move(e));
        }
    }
    std::ofstream out(dir / kManifestName, std::ios::binary | std::ios::trunc);
    if (!out) throw FormatError("cannot write manifest in " + dir.string());
    out << format_manifest(entries);
    return entries;
}

synth::Dataset read_corpus(const std::filesystem::path& dir, bool with_aux) {
    std::ifstream in(dir / kManifestName, std::ios::binary);
    if (!in) throw FormatError("no " + std::string(kManifestName) + " in " + dir.string());
    std::stringstream text;
    text << in.rdbuf();
    const auto entries = parse_manifest(text.str());

    synth::Dataset ds;
    ds.filterbank = std::make_shared<const dsp::MelFilterbank>(dsp::mel_filterbank());
    for (const auto& e : entries) {
        synth::MixtureRecord rec;
        rec.split = e.split;
        rec.index = e.index;
        rec.utterance = e.utterance;
        rec.noise_kind = e.noise_kind;
        rec.clean_seed = e.clean_seed;
        rec.noise_seed = e.noise_seed;
        rec.mixture.clean = wav::read(dir / e.clean_path);
        rec.mixture.noise_scaled = wav::read(dir / e.noise_path);
        rec.mixture.noisy = wav::read(dir / e.noisy_path);
        rec.mixture.snr_db = e.snr_db;
        if (rec.mixture.clean.size() != rec.mixture.noisy.size())
            throw FormatError("corpus entry " + e.noisy_path + ": clean and noisy lengths differ");
        if (e.split != synth::Split::test) rec.examples = synth::make_examples(rec.mixture, ds.filterbank, with_aux);
        if (with_aux) rec.aux = synth::envelope_aux(dsp::magnitude(dsp::stft(rec.mixture.clean)));
        auto& split = e.split == synth::Split::train        ? ds.train
                      : e.split == synth::Split::validation ? ds.validation
                                                            : ds.test;
        split.push_back(std::move(rec));
    }
    return ds;
}

} // namespace selab::corpus
