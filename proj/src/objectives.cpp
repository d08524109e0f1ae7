#include "selab/objectives.hpp"

#include <algorithm>
#include <cmath>

#include "selab/error.hpp"

namespace selab::objectives {
namespace {

constexpr std::array<ObjectiveId, 12> kAll = {{
    {Domain::stsa, Approach::dm}, {Domain::lsa, Approach::dm},  {Domain::msa, Approach::dm},
    {Domain::lmsa, Approach::dm}, {Domain::pssa, Approach::dm}, {Domain::stsa, Approach::im},
    {Domain::lsa, Approach::im},  {Domain::msa, Approach::im},  {Domain::lmsa, Approach::im},
    {Domain::pssa, Approach::im}, {Domain::stsa, Approach::ma}, {Domain::pssa, Approach::ma},
}};

const char* domain_name(Domain d) {
    switch (d) {
    case Domain::stsa: return "stsa";
    case Domain::lsa: return "lsa";
    case Domain::msa: return "msa";
    case Domain::lmsa: return "lmsa";
    case Domain::pssa: return "pssa";
    }
    return "?";
}

const char* approach_name(Approach a) {
    switch (a) {
    case Approach::dm: return "dm";
    case Approach::im: return "im";
    case Approach::ma: return "ma";
    }
    return "?";
}

double safe_log(double x) { return std::log(std::max(x, kLogFloor)); }

bool is_mel(Domain d) { return d == Domain::msa || d == Domain::lmsa; }
bool is_log(Domain d) { return d == Domain::lsa || d == Domain::lmsa; }

void check_output(ObjectiveId id, const LossContext& ctx, const Matrix& out) {
    require_valid(id);
    if (out.rows() != ctx.bins() || out.cols() != ctx.frames())
        throw ShapeError("objective " + to_string(id) + ": network output is " + std::to_string(out.rows()) + "x" +
                         std::to_string(out.cols()) + ", context is " + std::to_string(ctx.bins()) + "x" +
                         std::to_string(ctx.frames()));
    if (!all_finite(out)) throw NonFiniteError("objective " + to_string(id) + ": non-finite network output");
}

// Target S that the estimate E is compared against, in the linear-frequency
// domain. Mel cells use the precomputed projection of A instead.
Matrix linear_target(ObjectiveId id, const LossContext& ctx) {
    if (id.approach == Approach::ma) return id.domain == Domain::pssa ? ctx.psm_target() : ctx.iam_target();
    if (id.domain == Domain::pssa) return ctx.phase_sensitive_clean();
    return ctx.clean();
}

// E: the quantity compared against the target, as a function of the output.
Matrix estimate_of(ObjectiveId id, const LossContext& ctx, const Matrix& out) {
    if (id.approach != Approach::im) return out;
    Matrix e(out.rows(), out.cols());
    for (std::size_t i = 0; i < e.size(); ++i) e.data()[i] = out.data()[i] * ctx.noisy().data()[i];
    return e;
}

// Squared-error comparison in the chosen domain. Returns J and fills dJ/dE
// when `grad` is non-null.
double compare(ObjectiveId id, const LossContext& ctx, const Matrix& estimate, Matrix* grad) {
    const Domain d = id.domain;
    if (!is_mel(d)) {
        const Matrix target = linear_target(id, ctx);
        const double a = ctx.a();
        const bool logd = is_log(d) && id.approach != Approach::ma;
        double sum = 0.0;
        if (grad) *grad = Matrix(estimate.rows(), estimate.cols());
        for (std::size_t i = 0; i < estimate.size(); ++i) {
            const double e = estimate.data()[i];
            if (logd) {
                const double r = safe_log(target.data()[i]) - safe_log(e);
                sum += r * r;
                if (grad) grad->data()[i] = e > kLogFloor ? -2.0 * a * r / e : 0.0;
            } else {
                const double r = target.data()[i] - e;
                sum += r * r;
                if (grad) grad->data()[i] = -2.0 * a * r;
            }
        }
        return a * sum;
    }

    const auto& fb = ctx.filterbank();
    const Matrix est_mel = dsp::mel_apply(fb, estimate);
    const Matrix& target_mel = ctx.clean_mel();
    const double b = ctx.b();
    Matrix g_mel(est_mel.rows(), est_mel.cols());
    double sum = 0.0;
    for (std::size_t i = 0; i < est_mel.size(); ++i) {
        const double e = est_mel.data()[i];
        if (d == Domain::lmsa) {
            const double r = safe_log(target_mel.data()[i]) - safe_log(e);
            sum += r * r;
            g_mel.data()[i] = e > kLogFloor ? -2.0 * b * r / e : 0.0;
        } else {
            const double r = target_mel.data()[i] - e;
            sum += r * r;
            g_mel.data()[i] = -2.0 * b * r;
        }
    }
    if (grad) *grad = dsp::mel_apply_transposed(fb, g_mel);
    return b * sum;
}

LossResult evaluate_impl(ObjectiveId id, const LossContext& ctx, const Matrix& out, bool want_grad) {
    check_output(id, ctx, out);
    const Matrix estimate = estimate_of(id, ctx, out);
    LossResult res;
    res.value = compare(id, ctx, estimate, want_grad ? &res.gradient : nullptr);
    if (!std::isfinite(res.value)) throw NonFiniteError("objective " + to_string(id) + ": non-finite loss");
    if (want_grad && id.approach == Approach::im)
        for (std::size_t i = 0; i < res.gradient.size(); ++i) res.gradient.data()[i] *= ctx.noisy().data()[i];
    return res;
}

} // namespace

bool is_valid(ObjectiveId id) noexcept {
    return std::find(kAll.begin(), kAll.end(), id) != kAll.end();
}

void require_valid(ObjectiveId id) {
    if (!is_valid(id))
        throw InvalidInput(std::string("invalid objective ") + domain_name(id.domain) + "-" +
                           approach_name(id.approach) + ": mask approximation exists only for stsa and pssa");
}

std::string to_string(ObjectiveId id) { return std::string(domain_name(id.domain)) + "-" + approach_name(id.approach); }

ObjectiveId parse_objective(std::string_view name) {
    for (const auto& id : kAll)
        if (to_string(id) == name) return id;
    throw InvalidInput("unknown objective '" + std::string(name) +
                       "' (expected one of stsa-dm, lsa-dm, msa-dm, lmsa-dm, pssa-dm, stsa-im, lsa-im, msa-im, "
                       "lmsa-im, pssa-im, stsa-ma, pssa-ma)");
}

const std::array<ObjectiveId, 12>& all_objectives() { return kAll; }

std::string to_string(Activation act) {
    switch (act) {
    case Activation::rectifier: return "rectifier";
    case Activation::linear: return "linear";
    case Activation::exponential: return "exponential";
    }
    return "?";
}

Activation parse_activation(std::string_view name) {
    for (auto act : {Activation::rectifier, Activation::linear, Activation::exponential})
        if (to_string(act) == name) return act;
    throw InvalidInput("unknown activation '" + std::string(name) + "'");
}

LossContext::LossContext(dsp::MagnitudeSpectrogram clean, dsp::MagnitudeSpectrogram noisy, signal::PhaseDiff theta,
                         std::shared_ptr<const dsp::MelFilterbank> filterbank)
    : clean_(std::move(clean.values)),
      noisy_(std::move(noisy.values)),
      theta_(std::move(theta.theta)),
      filterbank_(std::move(filterbank)) {
    if (!filterbank_) throw InvalidInput("LossContext: filterbank is required");
    require_same_shape(clean_, noisy_, "LossContext");
    require_same_shape(clean_, theta_, "LossContext");
    if (clean_.empty()) throw ShapeError("LossContext: empty spectrogram");
    if (filterbank_->num_bins() != clean_.rows())
        throw ShapeError("LossContext: filterbank expects " + std::to_string(filterbank_->num_bins()) + " bins, got " +
                         std::to_string(clean_.rows()));
    cos_theta_ = Matrix(theta_.rows(), theta_.cols());
    for (std::size_t i = 0; i < theta_.size(); ++i) cos_theta_.data()[i] = std::cos(theta_.data()[i]);
    clean_mel_ = dsp::mel_apply(*filterbank_, clean_);
    noisy_mel_ = dsp::mel_apply(*filterbank_, noisy_);
}

Matrix LossContext::phase_sensitive_clean() const {
    Matrix s(clean_.rows(), clean_.cols());
    for (std::size_t i = 0; i < s.size(); ++i) s.data()[i] = clean_.data()[i] * cos_theta_.data()[i];
    return s;
}

Matrix LossContext::iam_target() const {
    return signal::compute_iam({clean_}, {noisy_}).values;
}

Matrix LossContext::psm_target() const {
    return signal::compute_psm({clean_}, {noisy_}, {theta_}).values;
}

double loss_value(ObjectiveId id, const LossContext& ctx, const Matrix& net_out) {
    return evaluate_impl(id, ctx, net_out, false).value;
}

Matrix loss_gradient(ObjectiveId id, const LossContext& ctx, const Matrix& net_out) {
    return evaluate_impl(id, ctx, net_out, true).gradient;
}

LossResult evaluate(ObjectiveId id, const LossContext& ctx, const Matrix& net_out) {
    return evaluate_impl(id, ctx, net_out, true);
}

LossResult evaluate_preactivation(ObjectiveId id, const LossContext& ctx, const Matrix& z, Activation act) {
    check_output(id, ctx, z);
    if (id == ObjectiveId{Domain::lsa, Approach::dm} && act == Activation::exponential) {
        const double a = ctx.a();
        LossResult res;
        res.gradient = Matrix(z.rows(), z.cols());
        double sum = 0.0;
        for (std::size_t i = 0; i < z.size(); ++i) {
            const double r = safe_log(ctx.clean().data()[i]) - z.data()[i];
            sum += r * r;
            res.gradient.data()[i] = -2.0 * a * r;
        }
        res.value = a * sum;
        return res;
    }
    const Matrix out = apply_activation(act, z);
    LossResult res = evaluate_impl(id, ctx, out, true);
    switch (act) {
    case Activation::linear: break;
    case Activation::rectifier:
        for (std::size_t i = 0; i < z.size(); ++i)
            if (!(z.data()[i] > 0.0)) res.gradient.data()[i] = 0.0;
        break;
    case Activation::exponential:
        for (std::size_t i = 0; i < z.size(); ++i) res.gradient.data()[i] *= out.data()[i];
        break;
    }
    return res;
}

double weighted_im_value(const LossContext& ctx, const Matrix& m_hat, bool phase_sensitive) {
    require_same_shape(m_hat, ctx.clean(), "weighted_im_value");
    const Matrix target = phase_sensitive ? ctx.phase_sensitive_clean() : ctx.clean();
    double sum = 0.0;
    for (std::size_t i = 0; i < m_hat.size(); ++i) {
        const double r = std::max(ctx.noisy().data()[i], signal::kDivisionFloor);
        const double diff = target.data()[i] - m_hat.data()[i] * r;
        sum += diff * diff / (r * r);
    }
    return ctx.a() * sum;
}

Activation output_activation_for(ObjectiveId id) {
    require_valid(id);
    if (id.approach == Approach::dm) return id.domain == Domain::pssa ? Activation::linear : Activation::exponential;
    return id.domain == Domain::pssa ? Activation::linear : Activation::rectifier;
}

Matrix apply_activation(Activation act, const Matrix& z) {
    Matrix out = z;
    switch (act) {
    case Activation::linear: break;
    case Activation::rectifier:
        for (double& v : out.flat()) v = v > 0.0 ? v : 0.0;
        break;
    case Activation::exponential:
        for (double& v : out.flat()) v = std::exp(v);
        break;
    }
    return out;
}

signal::MaskKind mask_kind_for(ObjectiveId id) {
    return id.domain == Domain::pssa ? signal::MaskKind::psm : signal::MaskKind::iam;
}

} // namespace selab::objectives
