#include "selab/estimator.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>

#include "selab/error.hpp"
#include "selab/kernels.hpp"

namespace selab::estimator {

using objectives::Activation;
using objectives::ObjectiveId;

namespace {

double leaky(double z) { return z > 0.0 ? z : kLeakySlope * z; }
double leaky_slope(double z) { return z > 0.0 ? 1.0 : kLeakySlope; }

void check_aux(const EstimatorModel& model, std::span<const double> aux) {
    if (aux.size() != model.shape.aux_dim)
        throw ShapeError("estimator: aux vector has " + std::to_string(aux.size()) + " entries, model expects " +
                         std::to_string(model.shape.aux_dim));
}

void check_chunk(const EstimatorModel& model, const Matrix& chunk) {
    if (chunk.rows() != model.shape.bins || chunk.cols() != model.shape.frames)
        throw ShapeError("estimator: chunk is " + std::to_string(chunk.rows()) + "x" + std::to_string(chunk.cols()) +
                         ", model expects " + std::to_string(model.shape.bins) + "x" +
                         std::to_string(model.shape.frames));
}

// Normalized, flattened inputs, one row per example.
Matrix assemble_inputs(const EstimatorModel& model, std::span<const Matrix* const> chunks,
                       std::span<const std::vector<double>* const> aux) {
    const std::size_t n = chunks.size();
    const std::size_t width = model.input_size();
    const std::size_t spectral = model.shape.spectral_size();
    Matrix x(n, width);
    for (std::size_t i = 0; i < n; ++i) {
        check_chunk(model, *chunks[i]);
        const std::span<const double> a = aux.empty() || aux[i] == nullptr ? std::span<const double>{}
                                                                             : std::span<const double>(*aux[i]);
        check_aux(model, a);
        auto row = x.row(i);
        std::copy(chunks[i]->flat().begin(), chunks[i]->flat().end(), row.begin());
        std::copy(a.begin(), a.end(), row.begin() + static_cast<std::ptrdiff_t>(spectral));
        for (std::size_t j = 0; j < width; ++j)
            row[j] = (row[j] - model.input_norm.mean[j]) / model.input_norm.std[j];
    }
    return x;
}

struct ForwardCache {
    std::vector<Matrix> inputs;      // input to layer l
    std::vector<Matrix> preacts;     // x W + b of layer l
};

ForwardCache run_forward(const EstimatorModel& model, Matrix x) {
    ForwardCache cache;
    const std::size_t n = x.rows();
    for (std::size_t l = 0; l < model.layers.size(); ++l) {
        const auto& layer = model.layers[l];
        Matrix z(n, layer.fan_out());
        for (std::size_t i = 0; i < n; ++i) std::copy(layer.bias.begin(), layer.bias.end(), z.row(i).begin());
        kernels::omp::gemm(n, layer.fan_out(), layer.fan_in(), x.flat(), layer.weights.flat(), z.flat(), true);
        cache.inputs.push_back(std::move(x));
        if (l + 1 < model.layers.size()) {
            x = Matrix(n, layer.fan_out());
            for (std::size_t i = 0; i < z.size(); ++i) x.data()[i] = leaky(z.data()[i]);
        }
        cache.preacts.push_back(std::move(z));
    }
    return cache;
}

Matrix reshape_row(const Matrix& m, std::size_t row, const ChunkShape& shape) {
    auto r = m.row(row);
    return Matrix(shape.bins, shape.frames, std::vector<double>(r.begin(), r.end()));
}

void check_activation(const EstimatorModel& model, ObjectiveId id) {
    const Activation expected = objectives::output_activation_for(id);
    if (model.output_activation != expected)
        throw InvalidInput("objective " + objectives::to_string(id) + " trains with a " +
                           objectives::to_string(expected) + " output, model has " +
                           objectives::to_string(model.output_activation));
}

// Per-example losses, evaluated concurrently; the reduction happens serially.
std::vector<objectives::LossResult> example_losses(const EstimatorModel& model, const Matrix& preact,
                                                   std::span<const TrainingExample* const> batch, ObjectiveId id) {
    const auto n = static_cast<long>(batch.size());
    std::vector<objectives::LossResult> results(batch.size());
    std::vector<std::string> errors(batch.size());
#pragma omp parallel for schedule(static)
    for (long i = 0; i < n; ++i) {
        const auto u = static_cast<std::size_t>(i);
        try {
            results[u] = objectives::evaluate_preactivation(id, batch[u]->context, reshape_row(preact, u, model.shape),
                                                            model.output_activation);
        } catch (const std::exception& e) {
            errors[u] = e.what();
        }
    }
    for (std::size_t i = 0; i < batch.size(); ++i) {
        if (!errors[i].empty() || !std::isfinite(results[i].value))
            throw NonFiniteError("objective " + objectives::to_string(id) + ": non-finite loss at batch index " +
                                 std::to_string(i) + (errors[i].empty() ? "" : " (" + errors[i] + ")"));
    }
    return results;
}

std::vector<const Matrix*> inputs_of(std::span<const TrainingExample* const> batch) {
    std::vector<const Matrix*> out;
    for (const auto* ex : batch) out.push_back(&ex->input());
    return out;
}

std::vector<const std::vector<double>*> aux_of(std::span<const TrainingExample* const> batch) {
    std::vector<const std::vector<double>*> out;
    for (const auto* ex : batch) out.push_back(&ex->aux);
    return out;
}

} // namespace

std::vector<std::size_t> EstimatorModel::layer_sizes() const {
    std::vector<std::size_t> sizes;
    if (layers.empty()) return sizes;
    sizes.push_back(layers.front().fan_in());
    for (const auto& layer : layers) sizes.push_back(layer.fan_out());
    return sizes;
}

std::size_t EstimatorModel::num_parameters() const noexcept {
    std::size_t n = 0;
    for (const auto& layer : layers) n += layer.weights.size() + layer.bias.size();
    return n;
}

void validate(const EstimatorModel& model) {
    if (model.layers.empty()) throw InvalidInput("estimator: model has no layers");
    if (model.layers.front().fan_in() != model.input_size())
        throw ShapeError("estimator: first layer takes " + std::to_string(model.layers.front().fan_in()) +
                         " inputs, chunk shape implies " + std::to_string(model.input_size()));
    if (model.layers.back().fan_out() != model.output_size())
        throw ShapeError("estimator: last layer emits " + std::to_string(model.layers.back().fan_out()) +
                         " values, chunk shape implies " + std::to_string(model.output_size()));
    for (std::size_t l = 0; l < model.layers.size(); ++l) {
        const auto& layer = model.layers[l];
        if (layer.bias.size() != layer.fan_out()) throw ShapeError("estimator: bias size mismatch in layer " + std::to_string(l));
        if (l > 0 && model.layers[l - 1].fan_out() != layer.fan_in())
            throw ShapeError("estimator: layer " + std::to_string(l) + " does not chain onto its predecessor");
    }
    if (model.input_norm.mean.size() != model.input_size() || model.input_norm.std.size() != model.input_size())
        throw ShapeError("estimator: normalization vectors do not match the input width");
    for (double s : model.input_norm.std)
        if (!(s > 0.0)) throw InvalidInput("estimator: normalization std entries must be positive");
}

std::vector<std::size_t> layer_sizes_for(const ChunkShape& shape, std::span<const std::size_t> hidden) {
    std::vector<std::size_t> sizes{shape.spectral_size() + shape.aux_dim};
    sizes.insert(sizes.end(), hidden.begin(), hidden.end());
    sizes.push_back(shape.spectral_size());
    return sizes;
}

EstimatorModel init_model(std::span<const std::size_t> layer_sizes, Activation out_act, std::uint64_t seed,
                          ChunkShape shape) {
    if (layer_sizes.size() < 2) throw InvalidInput("init_model: need at least an input and an output size");
    if (std::find(layer_sizes.begin(), layer_sizes.end(), 0u) != layer_sizes.end())
        throw InvalidInput("init_model: layer sizes must be positive");
    EstimatorModel model;
    model.output_activation = out_act;
    model.shape = shape;
    if (layer_sizes.front() != model.input_size() || layer_sizes.back() != model.output_size())
        throw ShapeError("init_model: sizes must run from " + std::to_string(model.input_size()) + " inputs to " +
                         std::to_string(model.output_size()) + " outputs");
    std::mt19937_64 rng(seed);
    for (std::size_t l = 0; l + 1 < layer_sizes.size(); ++l) {
        const std::size_t fan_in = layer_sizes[l];
        const std::size_t fan_out = layer_sizes[l + 1];
        const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
        std::uniform_real_distribution<double> dist(-limit, limit);
        DenseLayer layer{Matrix(fan_in, fan_out), std::vector<double>(fan_out, 0.0)};
        for (double& w : layer.weights.flat()) w = dist(rng);
        model.layers.push_back(std::move(layer));
    }
    // Rectified mask outputs start at the unit mask. With zero bias about half
    // of them are negative for every input and never receive a gradient.
    if (out_act == Activation::rectifier)
        std::fill(model.layers.back().bias.begin(), model.layers.back().bias.end(), kRectifierInitBias);
    model.input_norm.mean.assign(model.input_size(), 0.0);
    model.input_norm.std.assign(model.input_size(), 1.0);
    return model;
}

std::vector<Matrix> forward_preactivation(const EstimatorModel& model, std::span<const Matrix* const> chunks,
                                          std::span<const std::vector<double>* const> aux) {
    validate(model);
    if (!aux.empty() && aux.size() != chunks.size()) throw ShapeError("forward: one aux vector per chunk expected");
    ForwardCache cache = run_forward(model, assemble_inputs(model, chunks, aux));
    std::vector<Matrix> outs;
    for (std::size_t i = 0; i < chunks.size(); ++i) outs.push_back(reshape_row(cache.preacts.back(), i, model.shape));
    return outs;
}

Matrix forward(const EstimatorModel& model, const Matrix& chunk, std::span<const double> aux) {
    const std::vector<double> aux_copy(aux.begin(), aux.end());
    const Matrix* chunks[] = {&chunk};
    const std::vector<double>* auxes[] = {&aux_copy};
    auto z = forward_preactivation(model, chunks, auxes);
    return objectives::apply_activation(model.output_activation, z.front());
}

BatchGradient loss_and_gradient(const EstimatorModel& model, std::span<const TrainingExample* const> batch,
                                ObjectiveId id) {
    validate(model);
    check_activation(model, id);
    if (batch.empty()) throw InvalidInput("loss_and_gradient: empty batch");
    const auto chunks = inputs_of(batch);
    const auto aux = aux_of(batch);
    ForwardCache cache = run_forward(model, assemble_inputs(model, chunks, aux));
    const auto losses = example_losses(model, cache.preacts.back(), batch, id);

    const std::size_t n = batch.size();
    const double inv_n = 1.0 / static_cast<double>(n);
    BatchGradient out;
    Matrix delta(n, model.output_size());
    for (std::size_t i = 0; i < n; ++i) {
        out.mean_loss += losses[i].value;
        auto row = delta.row(i);
        for (std::size_t j = 0; j < row.size(); ++j) row[j] = losses[i].gradient.data()[j] * inv_n;
    }
    out.mean_loss *= inv_n;

    const std::size_t num_layers = model.layers.size();
    out.gradient.weights.resize(num_layers);
    out.gradient.bias.resize(num_layers);
    for (std::size_t l = num_layers; l-- > 0;) {
        const auto& layer = model.layers[l];
        const Matrix& x = cache.inputs[l];
        Matrix xt(layer.fan_in(), n);
        kernels::omp::transpose(n, layer.fan_in(), x.flat(), xt.flat());
        Matrix dw(layer.fan_in(), layer.fan_out());
        kernels::omp::gemm(layer.fan_in(), layer.fan_out(), n, xt.flat(), delta.flat(), dw.flat());
        std::vector<double> db(layer.fan_out(), 0.0);
        for (std::size_t i = 0; i < n; ++i) {
            auto row = delta.row(i);
            for (std::size_t j = 0; j < db.size(); ++j) db[j] += row[j];
        }
        out.gradient.weights[l] = std::move(dw);
        out.gradient.bias[l] = std::move(db);
        if (l == 0) break;

        Matrix wt(layer.fan_out(), layer.fan_in());
        kernels::omp::transpose(layer.fan_in(), layer.fan_out(), layer.weights.flat(), wt.flat());
        Matrix dx(n, layer.fan_in());
        kernels::omp::gemm(n, layer.fan_in(), layer.fan_out(), delta.flat(), wt.flat(), dx.flat());
        const Matrix& z_prev = cache.preacts[l - 1];
        for (std::size_t i = 0; i < dx.size(); ++i) dx.data()[i] *= leaky_slope(z_prev.data()[i]);
        delta = std::move(dx);
    }
    return out;
}

double mean_loss(const EstimatorModel& model, std::span<const TrainingExample> examples, ObjectiveId id,
                 std::size_t batch_size) {
    validate(model);
    check_activation(model, id);
    if (examples.empty()) throw InvalidInput("mean_loss: no examples");
    if (batch_size == 0) batch_size = examples.size();
    double total = 0.0;
    for (std::size_t first = 0; first < examples.size(); first += batch_size) {
        const std::size_t count = std::min(batch_size, examples.size() - first);
        std::vector<const TrainingExample*> batch;
        for (std::size_t i = 0; i < count; ++i) batch.push_back(&examples[first + i]);
        ForwardCache cache = run_forward(model, assemble_inputs(model, inputs_of(batch), aux_of(batch)));
        for (const auto& r : example_losses(model, cache.preacts.back(), batch, id)) total += r.value;
    }
    return total / static_cast<double>(examples.size());
}

AdamState make_adam_state(const EstimatorModel& model) {
    AdamState state;
    for (const auto& layer : model.layers) {
        state.first_moment.emplace_back(layer.weights.size(), 0.0);
        state.first_moment.emplace_back(layer.bias.size(), 0.0);
        state.second_moment.emplace_back(layer.weights.size(), 0.0);
        state.second_moment.emplace_back(layer.bias.size(), 0.0);
    }
    return state;
}

double train_step(EstimatorModel& model, AdamState& optimizer, std::span<const TrainingExample* const> batch,
                  ObjectiveId id, double lr) {
    if (optimizer.first_moment.size() != 2 * model.layers.size())
        throw ShapeError("train_step: optimizer state does not mirror the model");
    BatchGradient bg = loss_and_gradient(model, batch, id);
    ++optimizer.step;
    for (std::size_t l = 0; l < model.layers.size(); ++l) {
        auto& layer = model.layers[l];
        kernels::omp::adam_update(layer.weights.flat(), bg.gradient.weights[l].flat(), optimizer.first_moment[2 * l],
                                  optimizer.second_moment[2 * l], lr, optimizer.beta1, optimizer.beta2,
                                  optimizer.epsilon, optimizer.step);
        kernels::omp::adam_update(layer.bias, bg.gradient.bias[l], optimizer.first_moment[2 * l + 1],
                                  optimizer.second_moment[2 * l + 1], lr, optimizer.beta1, optimizer.beta2,
                                  optimizer.epsilon, optimizer.step);
    }
    return bg.mean_loss;
}

InputNorm compute_input_norm(std::span<const TrainingExample> examples, const ChunkShape& shape) {
    if (examples.empty()) throw InvalidInput("compute_input_norm: no examples");
    const std::size_t width = shape.spectral_size() + shape.aux_dim;
    const std::size_t spectral = shape.spectral_size();
    std::vector<double> sum(width, 0.0);
    std::vector<double> sq(width, 0.0);
    for (const auto& ex : examples) {
        if (ex.input().size() != spectral || ex.aux.size() != shape.aux_dim)
            throw ShapeError("compute_input_norm: example does not match the chunk shape");
        for (std::size_t j = 0; j < spectral; ++j) sum[j] += ex.input().data()[j];
        for (std::size_t j = 0; j < shape.aux_dim; ++j) sum[spectral + j] += ex.aux[j];
    }
    const double n = static_cast<double>(examples.size());
    InputNorm norm;
    norm.mean.resize(width);
    for (std::size_t j = 0; j < width; ++j) norm.mean[j] = sum[j] / n;
    for (const auto& ex : examples) {
        for (std::size_t j = 0; j < spectral; ++j) {
            const double d = ex.input().data()[j] - norm.mean[j];
            sq[j] += d * d;
        }
        for (std::size_t j = 0; j < shape.aux_dim; ++j) {
            const double d = ex.aux[j] - norm.mean[spectral + j];
            sq[spectral + j] += d * d;
        }
    }
    norm.std.resize(width);
    for (std::size_t j = 0; j < width; ++j) {
        const double s = std::sqrt(sq[j] / n);
        norm.std[j] = s > 1e-12 ? s : 1.0;
    }
    return norm;
}

ValidationSchedule::ValidationSchedule(const TrainConfig& cfg)
    : cfg_(cfg), lr_(cfg.initial_lr), best_(std::numeric_limits<double>::infinity()) {
    if (cfg.batch_size == 0 || !(cfg.initial_lr > 0.0) || !(cfg.lr_decay_factor > 0.0) ||
        cfg.validation_interval_epochs <= 0 || cfg.early_stop_patience_epochs <= 0 || cfg.max_epochs <= 0)
        throw InvalidInput("TrainConfig: all settings must be positive");
}

bool ValidationSchedule::due(int epoch) const noexcept { return epoch % cfg_.validation_interval_epochs == 0; }

ValidationSchedule::Decision ValidationSchedule::observe(int epoch, double validation_loss) {
    Decision d;
    if (validation_loss < best_) {
        best_ = validation_loss;
        best_epoch_ = epoch;
        d.improved = true;
    } else if (validation_loss > best_) {
        lr_ *= cfg_.lr_decay_factor;
        d.decayed = true;
    }
    d.stop = patience_exhausted(epoch);
    return d;
}

bool ValidationSchedule::patience_exhausted(int epoch) const noexcept {
    return best_epoch_ > 0 && epoch - best_epoch_ >= cfg_.early_stop_patience_epochs;
}

FitResult fit(EstimatorModel model, std::span<const TrainingExample> train, std::span<const TrainingExample> validation,
              ObjectiveId id, const TrainConfig& cfg, const ValidationFn& validation_override) {
    if (train.empty()) throw InvalidInput("fit: empty training set");
    if (validation.empty() && !validation_override) throw InvalidInput("fit: empty validation set");
    check_activation(model, id);
    ValidationSchedule schedule(cfg);
    model.objective = id;
    model.input_norm = compute_input_norm(train, model.shape);
    validate(model);

    AdamState adam = make_adam_state(model);
    std::mt19937_64 rng(cfg.seed);
    std::vector<std::size_t> order(train.size());
    std::iota(order.begin(), order.end(), std::size_t{0});

    FitResult result{model, {}};
    bool have_snapshot = false;
    for (int epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
        std::shuffle(order.begin(), order.end(), rng);
        const double lr = schedule.lr();
        double total = 0.0;
        for (std::size_t first = 0; first < order.size(); first += cfg.batch_size) {
            const std::size_t count = std::min(cfg.batch_size, order.size() - first);
            std::vector<const TrainingExample*> batch;
            for (std::size_t i = 0; i < count; ++i) batch.push_back(&train[order[first + i]]);
            total += train_step(model, adam, batch, id, lr) * static_cast<double>(count);
        }
        EpochRecord rec{epoch, total / static_cast<double>(train.size()), std::nullopt, lr};

        bool stop = false;
        if (schedule.due(epoch)) {
            const double val = validation_override ? validation_override(model, epoch)
                                                   : mean_loss(model, validation, id, cfg.batch_size);
            rec.validation_loss = val;
            const auto decision = schedule.observe(epoch, val);
            if (decision.improved) {
                result.model = model;
                have_snapshot = true;
            }
            stop = decision.stop;
        } else {
            stop = schedule.patience_exhausted(epoch);
        }
        result.history.epochs.push_back(rec);
        if (stop) {
            result.history.stopped_early = true;
            break;
        }
    }
    if (!have_snapshot) result.model = model;
    result.history.best_epoch = schedule.best_epoch();
    result.history.best_validation_loss = schedule.best_loss();
    return result;
}

EstimatorModel constant_output_model(std::span<const std::size_t> hidden, Activation out_act,
                                     double preactivation_value, ChunkShape shape, std::uint64_t seed) {
    const auto sizes = layer_sizes_for(shape, hidden);
    EstimatorModel model = init_model(sizes, out_act, seed, shape);
    auto& last = model.layers.back();
    std::fill(last.weights.flat().begin(), last.weights.flat().end(), 0.0);
    std::fill(last.bias.begin(), last.bias.end(), preactivation_value);
    return model;
}

} // namespace selab::estimator
