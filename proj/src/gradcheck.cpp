#include "selab/gradcheck.hpp"

#include <cmath>
#include <numbers>

namespace selab::gradcheck {
namespace {

constexpr std::size_t kBins = 6;
constexpr std::size_t kFrames = 4;
constexpr std::size_t kMel = 3;
constexpr std::size_t kAux = 2;
constexpr std::size_t kBatch = 3;

double uniform(std::mt19937_64& rng, double lo, double hi) {
    return std::uniform_real_distribution<double>(lo, hi)(rng);
}

Matrix random_matrix(std::mt19937_64& rng, std::size_t rows, std::size_t cols, double lo, double hi) {
    Matrix m(rows, cols);
    for (double& v : m.flat()) v = uniform(rng, lo, hi);
    return m;
}

double model_relative_error(objectives::ObjectiveId id, std::uint64_t seed) {
    std::mt19937_64 rng(seed ^ 0x6d6f64656cULL);
    estimator::ChunkShape shape{kBins, kFrames, kAux};
    const std::size_t hidden[] = {5};
    auto model = estimator::init_model(estimator::layer_sizes_for(shape, hidden),
                                       objectives::output_activation_for(id), seed, shape);
    for (auto& layer : model.layers)
        for (double& b : layer.bias) b = uniform(rng, -0.2, 0.2);
    for (double& m : model.input_norm.mean) m = uniform(rng, 0.5, 1.5);
    for (double& s : model.input_norm.std) s = uniform(rng, 0.5, 1.5);

    std::vector<estimator::TrainingExample> examples;
    for (std::size_t i = 0; i < kBatch; ++i)
        examples.push_back({random_context(rng, kBins, kFrames, kMel), {uniform(rng, 0, 1), uniform(rng, 0, 1)}});
    std::vector<const estimator::TrainingExample*> batch;
    for (const auto& ex : examples) batch.push_back(&ex);

    const auto analytic = estimator::loss_and_gradient(model, batch, id);
    std::vector<double> exact;
    std::vector<double> numeric;
    auto probe = [&](double& param) {
        const double saved = param;
        param = saved + kStep;
        const double plus = estimator::loss_and_gradient(model, batch, id).mean_loss;
        param = saved - kStep;
        const double minus = estimator::loss_and_gradient(model, batch, id).mean_loss;
        param = saved;
        numeric.push_back((plus - minus) / (2.0 * kStep));
    };
    for (std::size_t l = 0; l < model.layers.size(); ++l) {
        auto& layer = model.layers[l];
        for (std::size_t i = 0; i < layer.weights.size(); ++i) {
            exact.push_back(analytic.gradient.weights[l].data()[i]);
            probe(layer.weights.data()[i]);
        }
        for (std::size_t j = 0; j < layer.bias.size(); ++j) {
            exact.push_back(analytic.gradient.bias[l][j]);
            probe(layer.bias[j]);
        }
    }
    return relative_error(exact, numeric);
}

} // namespace

objectives::LossContext random_context(std::mt19937_64& rng, std::size_t bins, std::size_t frames,
                                       std::size_t mel_bands) {
    Matrix clean = random_matrix(rng, bins, frames, 0.5, 2.0);
    Matrix noisy = random_matrix(rng, bins, frames, 0.5, 2.0);
    Matrix theta = random_matrix(rng, bins, frames, -std::numbers::pi, std::numbers::pi);
    Matrix weights = random_matrix(rng, mel_bands, bins, 0.05, 1.0);
    auto fb = std::make_shared<const dsp::MelFilterbank>(dsp::MelFilterbank::from_weights(std::move(weights)));
    return objectives::LossContext({std::move(clean)}, {std::move(noisy)}, {std::move(theta)}, std::move(fb));
}

Matrix random_output(objectives::ObjectiveId id, std::mt19937_64& rng, std::size_t bins, std::size_t frames) {
    const bool signed_output = objectives::output_activation_for(id) == objectives::Activation::linear;
    return signed_output ? random_matrix(rng, bins, frames, -1.5, 1.5) : random_matrix(rng, bins, frames, 0.3, 1.8);
}

double relative_error(std::span<const double> a, std::span<const double> b) {
    double diff = 0.0;
    double na = 0.0;
    double nb = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        diff += (a[i] - b[i]) * (a[i] - b[i]);
        na += a[i] * a[i];
        nb += b[i] * b[i];
    }
    const double scale = std::sqrt(std::max(na, nb));
    return scale == 0.0 ? 0.0 : std::sqrt(diff) / scale;
}

Report check(objectives::ObjectiveId id, std::uint64_t seed) {
    std::mt19937_64 rng(seed * 1000003ULL + static_cast<std::uint64_t>(id.domain) * 7 +
                        static_cast<std::uint64_t>(id.approach));
    const auto ctx = random_context(rng, kBins, kFrames, kMel);
    Matrix out = random_output(id, rng, kBins, kFrames);
    const Matrix analytic = objectives::loss_gradient(id, ctx, out);
    std::vector<double> numeric;
    for (std::size_t i = 0; i < out.size(); ++i) {
        const double saved = out.data()[i];
        out.data()[i] = saved + kStep;
        const double plus = objectives::loss_value(id, ctx, out);
        out.data()[i] = saved - kStep;
        const double minus = objectives::loss_value(id, ctx, out);
        out.data()[i] = saved;
        numeric.push_back((plus - minus) / (2.0 * kStep));
    }
    Report r;
    r.id = id;
    r.loss_rel_error = relative_error(analytic.flat(), numeric);
    r.model_rel_error = model_relative_error(id, seed);
    r.passed = r.loss_rel_error < kLossTolerance && r.model_rel_error < kModelTolerance;
    return r;
}

std::vector<Report> check_all(std::uint64_t seed) {
    std::vector<Report> reports;
    for (const auto& id : objectives::all_objectives()) reports.push_back(check(id, seed));
    return reports;
}

} // namespace selab::gradcheck
