#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "selab/dsp.hpp"

namespace selab::wav {

/// Decodes a RIFF/WAVE byte stream. Only 16-bit PCM, mono, 16 kHz is
/// accepted; anything else raises FormatError. Samples map to s / 32768.
dsp::Waveform decode(const std::vector<std::uint8_t>& bytes);

/// Encodes as 16-bit PCM mono. Samples are scaled by 32768, rounded and
/// clamped, so decode(encode(decode(b))) reproduces the sample values.
std::vector<std::uint8_t> encode(const dsp::Waveform& wav);

dsp::Waveform read(const std::filesystem::path& path);
void write(const std::filesystem::path& path, const dsp::Waveform& wav);

} // namespace selab::wav
