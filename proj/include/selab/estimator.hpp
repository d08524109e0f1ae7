#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <vector>

#include "selab/dsp.hpp"
#include "selab/matrix.hpp"
#include "selab/objectives.hpp"

namespace selab::estimator {

inline constexpr double kLeakySlope = 0.01;

/// y = x W + b for row vectors x; W is fan_in x fan_out, row-major.
struct DenseLayer {
    Matrix weights;
    std::vector<double> bias;

    std::size_t fan_in() const noexcept { return weights.rows(); }
    std::size_t fan_out() const noexcept { return weights.cols(); }
    bool operator==(const DenseLayer&) const = default;
};

/// Per-feature standardization over the flattened input (spectrogram then aux).
struct InputNorm {
    std::vector<double> mean;
    std::vector<double> std;

    bool operator==(const InputNorm&) const = default;
};

/// Geometry of one network input: an F x T magnitude chunk plus aux features.
struct ChunkShape {
    std::size_t bins = dsp::kNumBins;
    std::size_t frames = dsp::kChunkFrames;
    std::size_t aux_dim = 0;

    std::size_t spectral_size() const noexcept { return bins * frames; }
    bool operator==(const ChunkShape&) const = default;
};

/// Feedforward mask/magnitude estimator. Hidden layers use a leaky rectifier
/// with slope 0.01; the last layer uses `output_activation`.
struct EstimatorModel {
    std::vector<DenseLayer> layers;
    objectives::Activation output_activation = objectives::Activation::linear;
    InputNorm input_norm;
    ChunkShape shape;
    std::optional<objectives::ObjectiveId> objective;

    std::size_t input_size() const noexcept { return shape.spectral_size() + shape.aux_dim; }
    std::size_t output_size() const noexcept { return shape.spectral_size(); }
    std::vector<std::size_t> layer_sizes() const;
    std::size_t num_parameters() const noexcept;
    bool operator==(const EstimatorModel&) const = default;
};

/// Validates layer chaining, output activation and normalization vectors.
void validate(const EstimatorModel& model);

/// Output bias a rectifier model starts from, so the initial mask is near 1.
inline constexpr double kRectifierInitBias = 1.0;

/// Xavier-uniform weights in +-sqrt(6 / (fan_in + fan_out)), zero biases
/// (kRectifierInitBias on a rectifier output layer), identity normalization.
/// layer_sizes runs from the input width to F*T.
EstimatorModel init_model(std::span<const std::size_t> layer_sizes, objectives::Activation out_act,
                          std::uint64_t seed, ChunkShape shape = {});

/// {F*T + aux, hidden..., F*T}.
std::vector<std::size_t> layer_sizes_for(const ChunkShape& shape, std::span<const std::size_t> hidden);

/// One example: the loss context (whose noisy magnitude is the network input)
/// and the optional auxiliary feature vector.
struct TrainingExample {
    objectives::LossContext context;
    std::vector<double> aux;

    const Matrix& input() const noexcept { return context.noisy(); }
};

/// Post-activation network output for one chunk.
Matrix forward(const EstimatorModel& model, const Matrix& chunk, std::span<const double> aux = {});

/// Pre-activation outputs for a batch of chunks, one F x T matrix each.
std::vector<Matrix> forward_preactivation(const EstimatorModel& model, std::span<const Matrix* const> chunks,
                                          std::span<const std::vector<double>* const> aux);

/// Same layout as the model parameters.
struct ModelGradient {
    std::vector<Matrix> weights;
    std::vector<std::vector<double>> bias;
};

struct BatchGradient {
    double mean_loss = 0.0;
    ModelGradient gradient;
};

/// Mean loss over the batch and its gradient with respect to every parameter.
BatchGradient loss_and_gradient(const EstimatorModel& model, std::span<const TrainingExample* const> batch,
                                objectives::ObjectiveId id);

/// Mean loss only, evaluated in batches of `batch_size`.
double mean_loss(const EstimatorModel& model, std::span<const TrainingExample> examples, objectives::ObjectiveId id,
                 std::size_t batch_size = 64);

struct AdamState {
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
    long step = 0;
    std::vector<std::vector<double>> first_moment;
    std::vector<std::vector<double>> second_moment;
};

/// Zeroed moments mirroring the model's parameter blocks (W then b per layer).
AdamState make_adam_state(const EstimatorModel& model);

/// One Adam step on the batch. Returns the mean batch loss before the update.
double train_step(EstimatorModel& model, AdamState& optimizer, std::span<const TrainingExample* const> batch,
                  objectives::ObjectiveId id, double lr);

InputNorm compute_input_norm(std::span<const TrainingExample> examples, const ChunkShape& shape);

struct TrainConfig {
    std::size_t batch_size = 64;
    double initial_lr = 4e-4;
    double lr_decay_factor = 0.5;
    int validation_interval_epochs = 2;
    int early_stop_patience_epochs = 10;
    int max_epochs = 100;
    std::uint64_t seed = 0;
};

/// Learning-rate halving and early stopping driven by validation losses.
/// An evaluation improves when it beats the best loss so far; one that is
/// worse than the best decays the rate; training stops once the best is
/// `patience` or more epochs old.
class ValidationSchedule {
public:
    explicit ValidationSchedule(const TrainConfig& cfg);

    struct Decision {
        bool improved = false;
        bool decayed = false;
        bool stop = false;
    };

    bool due(int epoch) const noexcept;
    Decision observe(int epoch, double validation_loss);
    /// Checked after every epoch, evaluation or not.
    bool patience_exhausted(int epoch) const noexcept;

    double lr() const noexcept { return lr_; }
    double best_loss() const noexcept { return best_; }
    int best_epoch() const noexcept { return best_epoch_; }

private:
    TrainConfig cfg_;
    double lr_;
    double best_;
    int best_epoch_ = 0;
};

struct EpochRecord {
    int epoch = 0;
    double train_loss = 0.0;
    std::optional<double> validation_loss;
    double lr = 0.0;
};

struct FitHistory {
    std::vector<EpochRecord> epochs;
    int best_epoch = 0;
    double best_validation_loss = 0.0;
    bool stopped_early = false;
};

struct FitResult {
    EstimatorModel model;
    FitHistory history;
};

/// Replaces the validation-set loss, for scripted schedules.
using ValidationFn = std::function<double(const EstimatorModel&, int epoch)>;

/// Adam training with the validation schedule above. Input normalization is
/// recomputed from the training set first. Returns the best-validation
/// snapshot (or the last parameters if validation never ran).
FitResult fit(EstimatorModel model, std::span<const TrainingExample> train,
              std::span<const TrainingExample> validation, objectives::ObjectiveId id, const TrainConfig& cfg,
              const ValidationFn& validation_override = {});

/// Model whose output is the constant act(value) everywhere: the last layer
/// has zero weights and bias `value`. Used for identity-mask debugging.
EstimatorModel constant_output_model(std::span<const std::size_t> hidden, objectives::Activation out_act,
                                     double preactivation_value, ChunkShape shape = {}, std::uint64_t seed = 0);

} // namespace selab::estimator
