#include "selab/wav.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>

#include "selab/error.hpp"

namespace selab::wav {
namespace {

std::uint32_t read_u32(const std::vector<std::uint8_t>& b, std::size_t at) {
    return static_cast<std::uint32_t>(b[at]) | static_cast<std::uint32_t>(b[at + 1]) << 8 |
           static_cast<std::uint32_t>(b[at + 2]) << 16 | static_cast<std::uint32_t>(b[at + 3]) << 24;
}

std::uint16_t read_u16(const std::vector<std::uint8_t>& b, std::size_t at) {
    return static_cast<std::uint16_t>(b[at] | b[at + 1] << 8);
}

void put_u32(std::vector<std::uint8_t>& b, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) b.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

void put_u16(std::vector<std::uint8_t>& b, std::uint16_t v) {
    b.push_back(static_cast<std::uint8_t>(v));
    b.push_back(static_cast<std::uint8_t>(v >> 8));
}

bool tag_is(const std::vector<std::uint8_t>& b, std::size_t at, const char* tag) {
    return std::memcmp(b.data() + at, tag, 4) == 0;
}

} // namespace

dsp::Waveform decode(const std::vector<std::uint8_t>& bytes) {
    if (bytes.size() < 12 || !tag_is(bytes, 0, "RIFF") || !tag_is(bytes, 8, "WAVE"))
        throw FormatError("wav: missing RIFF/WAVE header");

    bool have_fmt = false;
    std::uint16_t channels = 0;
    std::uint16_t bits = 0;
    std::uint32_t rate = 0;
    std::size_t pos = 12;
    while (pos + 8 <= bytes.size()) {
        const std::uint32_t chunk_size = read_u32(bytes, pos + 4);
        const std::size_t body = pos + 8;
        if (chunk_size > bytes.size() - body) throw FormatError("wav: chunk extends past end of file");

        if (tag_is(bytes, pos, "fmt ")) {
            if (chunk_size < 16) throw FormatError("wav: fmt chunk too small");
            const std::uint16_t format = read_u16(bytes, body);
            channels = read_u16(bytes, body + 2);
            rate = read_u32(bytes, body + 4);
            bits = read_u16(bytes, body + 14);
            // WAVE_FORMAT_EXTENSIBLE carries the real format tag in its sub-format GUID.
            const bool pcm = format == 1 || (format == 0xFFFE && chunk_size >= 26 && read_u16(bytes, body + 24) == 1);
            if (!pcm) throw FormatError("wav: only integer PCM is supported (format tag " + std::to_string(format) + ")");
            if (channels != 1) throw FormatError("wav: expected mono, got " + std::to_string(channels) + " channels");
            if (bits != 16) throw FormatError("wav: expected 16-bit samples, got " + std::to_string(bits));
            if (rate != static_cast<std::uint32_t>(dsp::kSampleRate))
                throw FormatError("wav: expected 16000 Hz, got " + std::to_string(rate) + " Hz (resampling is not supported)");
            have_fmt = true;
        } else if (tag_is(bytes, pos, "data")) {
            if (!have_fmt) throw FormatError("wav: data chunk precedes fmt chunk");
            dsp::Waveform wav;
            wav.sample_rate_hz = dsp::kSampleRate;
            wav.samples.resize(chunk_size / 2);
            for (std::size_t i = 0; i < wav.samples.size(); ++i) {
                const auto raw = static_cast<std::int16_t>(read_u16(bytes, body + 2 * i));
                wav.samples[i] = static_cast<double>(raw) / 32768.0;
            }
            return wav;
        }
        pos = body + chunk_size + (chunk_size & 1u);
    }
    throw FormatError("wav: no data chunk found");
}

std::vector<std::uint8_t> encode(const dsp::Waveform& wav) {
    if (wav.sample_rate_hz != dsp::kSampleRate) throw InvalidInput("wav: only 16 kHz output is supported");
    const auto data_bytes = static_cast<std::uint32_t>(wav.samples.size() * 2);
    std::vector<std::uint8_t> out;
    out.reserve(44 + data_bytes);
    out.insert(out.end(), {'R', 'I', 'F', 'F'});
    put_u32(out, 36 + data_bytes);
    out.insert(out.end(), {'W', 'A', 'V', 'E', 'f', 'm', 't', ' '});
    put_u32(out, 16);
    put_u16(out, 1);
    put_u16(out, 1);
    put_u32(out, dsp::kSampleRate);
    put_u32(out, dsp::kSampleRate * 2);
    put_u16(out, 2);
    put_u16(out, 16);
    out.insert(out.end(), {'d', 'a', 't', 'a'});
    put_u32(out, data_bytes);
    for (double s : wav.samples) {
        const double scaled = std::isfinite(s) ? std::round(s * 32768.0) : 0.0;
        const auto q = static_cast<std::int16_t>(std::clamp(scaled, -32768.0, 32767.0));
        put_u16(out, static_cast<std::uint16_t>(q));
    }
    return out;
}

dsp::Waveform read(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw FormatError("wav: cannot open " + path.string());
    std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    try {
        return decode(bytes);
    } catch (const FormatError& e) {
        throw FormatError(path.string() + ": " + e.what());
    }
}

void write(const std::filesystem::path& path, const dsp::Waveform& wav) {
    const auto bytes = encode(wav);
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw FormatError("wav: cannot write " + path.string());
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
}

} // namespace selab::wav
