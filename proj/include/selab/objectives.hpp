#pragma once

#include <array>
#include <memory>
#include <string>
#include <string_view>

#include "selab/dsp.hpp"
#include "selab/matrix.hpp"
#include "selab/signal_model.hpp"

namespace selab::objectives {

/// Floor applied inside every natural logarithm.
inline constexpr double kLogFloor = 1e-7;

/// Spectral-amplitude domain the loss compares in.
enum class Domain { stsa, lsa, msa, lmsa, pssa };

/// What the network output is: the magnitude itself (DM), a mask judged on
/// the reconstructed magnitude (IM), or a mask judged against the ideal mask (MA).
enum class Approach { dm, im, ma };

enum class Activation { rectifier, linear, exponential };

struct ObjectiveId {
    Domain domain = Domain::stsa;
    Approach approach = Approach::dm;

    bool operator==(const ObjectiveId&) const = default;
};

/// The twelve taxonomy cells: every domain with DM and IM, MA only for STSA and PSSA.
bool is_valid(ObjectiveId id) noexcept;

/// Throws InvalidInput for combinations outside the taxonomy.
void require_valid(ObjectiveId id);

/// "stsa-dm", "pssa-ma", ...
std::string to_string(ObjectiveId id);
ObjectiveId parse_objective(std::string_view name);
const std::array<ObjectiveId, 12>& all_objectives();

std::string to_string(Activation act);
Activation parse_activation(std::string_view name);

/// Everything a loss needs about one F x T training example. Mel
/// projections are computed at construction; the filterbank is shared.
class LossContext {
public:
    LossContext(dsp::MagnitudeSpectrogram clean, dsp::MagnitudeSpectrogram noisy, signal::PhaseDiff theta,
                std::shared_ptr<const dsp::MelFilterbank> filterbank);

    const Matrix& clean() const noexcept { return clean_; }
    const Matrix& noisy() const noexcept { return noisy_; }
    const Matrix& theta() const noexcept { return theta_; }
    const Matrix& cos_theta() const noexcept { return cos_theta_; }
    const Matrix& clean_mel() const noexcept { return clean_mel_; }
    const Matrix& noisy_mel() const noexcept { return noisy_mel_; }
    const dsp::MelFilterbank& filterbank() const noexcept { return *filterbank_; }
    const std::shared_ptr<const dsp::MelFilterbank>& filterbank_ptr() const noexcept { return filterbank_; }

    std::size_t bins() const noexcept { return clean_.rows(); }
    std::size_t frames() const noexcept { return clean_.cols(); }
    std::size_t mel_bands() const noexcept { return filterbank_->num_mel(); }

    /// 1 / (T F), the normalizer of linear-frequency losses.
    double a() const noexcept { return 1.0 / static_cast<double>(frames() * bins()); }
    /// 1 / (T Q), the normalizer of Mel-domain losses.
    double b() const noexcept { return 1.0 / static_cast<double>(frames() * mel_bands()); }

    /// A cos(theta).
    Matrix phase_sensitive_clean() const;
    /// Clipped IAM and PSM training targets.
    Matrix iam_target() const;
    Matrix psm_target() const;

private:
    Matrix clean_;
    Matrix noisy_;
    Matrix theta_;
    Matrix cos_theta_;
    Matrix clean_mel_;
    Matrix noisy_mel_;
    std::shared_ptr<const dsp::MelFilterbank> filterbank_;
};

struct LossResult {
    double value = 0.0;
    Matrix gradient;
};

/// J for the given cell. `net_out` is the post-activation output: the
/// magnitude estimate for DM, the mask estimate for IM and MA.
double loss_value(ObjectiveId id, const LossContext& ctx, const Matrix& net_out);

/// dJ / d net_out in closed form. Target clipping is treated as constant.
Matrix loss_gradient(ObjectiveId id, const LossContext& ctx, const Matrix& net_out);

LossResult evaluate(ObjectiveId id, const LossContext& ctx, const Matrix& net_out);

/// J and dJ/dz for a pre-activation output z, with `act` applied first.
/// For LSA-DM under the exponential activation the loss is evaluated on
/// log(exp(z)) = z directly, so there is no floor and no overflow on that path.
LossResult evaluate_preactivation(ObjectiveId id, const LossContext& ctx, const Matrix& z, Activation act);

/// (1 / TF) sum (S - M R)^2 / R^2 with S = A, or S = A cos(theta) when
/// phase_sensitive is set. R is guarded by the division floor.
double weighted_im_value(const LossContext& ctx, const Matrix& m_hat, bool phase_sensitive);

/// Output nonlinearity each cell trains with: exponential for the positive
/// DM domains, linear where the target can go negative (PSSA-DM, PSSA-IM,
/// PSSA-MA), rectifier for the remaining mask objectives.
Activation output_activation_for(ObjectiveId id);

Matrix apply_activation(Activation act, const Matrix& z);

/// Mask range for IM/MA cells: IAM range, or PSM range for the PSSA domain.
signal::MaskKind mask_kind_for(ObjectiveId id);

} // namespace selab::objectives
