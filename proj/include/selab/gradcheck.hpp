#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <vector>

#include "selab/estimator.hpp"
#include "selab/objectives.hpp"

namespace selab::gradcheck {

inline constexpr double kStep = 1e-6;
inline constexpr double kLossTolerance = 1e-5;
inline constexpr double kModelTolerance = 1e-4;

struct Report {
    objectives::ObjectiveId id;
    double loss_rel_error = 0.0;
    double model_rel_error = 0.0;
    bool passed = false;
};

/// Random F x T context with magnitudes in [0.5, 2], phases in (-pi, pi] and
/// a random nonnegative Q x F filterbank. Magnitude ratios stay inside the
/// mask clipping range and away from every log floor.
objectives::LossContext random_context(std::mt19937_64& rng, std::size_t bins, std::size_t frames,
                                       std::size_t mel_bands);

/// Network output in the natural range of the cell (positive for DM
/// magnitudes and rectified masks, signed otherwise).
Matrix random_output(objectives::ObjectiveId id, std::mt19937_64& rng, std::size_t bins, std::size_t frames);

/// ||a - b|| / max(||a||, ||b||), 0 when both vanish.
double relative_error(std::span<const double> a, std::span<const double> b);

/// Central differences of loss_value against loss_gradient on a 6 x 4
/// context, and of the mean batch loss against loss_and_gradient for every
/// parameter of a tiny model.
Report check(objectives::ObjectiveId id, std::uint64_t seed);

std::vector<Report> check_all(std::uint64_t seed);

} // namespace selab::gradcheck
