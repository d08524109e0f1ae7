#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "selab/estimator.hpp"

namespace selab::checkpoint {

/// Layout:
///
///   selab-checkpoint 1
///   objective <id or none>
///   output_activation <rectifier|linear|exponential>
///   hidden_activation leaky_rectifier 0.01
///   chunk <bins> <frames>
///   aux_dim <n>
///   layers <count> <size_0> ... <size_count>
///   norm_mean <n> <v_0> ... (shortest round-trip decimal)
///   norm_std <n> <v_0> ...
///   parameters <total>
///   end_header
///
/// followed by little-endian IEEE-754 doubles: for each layer the weights
/// (fan_in x fan_out, row-major) then the bias.
inline constexpr int kFormatVersion = 1;

std::vector<std::uint8_t> serialize(const estimator::EstimatorModel& model);
estimator::EstimatorModel deserialize(const std::vector<std::uint8_t>& bytes);

void save(const std::filesystem::path& path, const estimator::EstimatorModel& model);
estimator::EstimatorModel load(const std::filesystem::path& path);

} // namespace selab::checkpoint
