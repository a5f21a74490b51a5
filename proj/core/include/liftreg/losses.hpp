#pragma once

#include <cstdint>
#include <optional>
#include <span>

#include "liftreg/geometry.hpp"
#include "liftreg/subspace.hpp"
#include "liftreg/volume.hpp"

namespace liftreg {

enum class LossMode { sim3d, sim2d };

struct LossConfig {
    double lambda = 0.1;
    LossMode mode = LossMode::sim3d;
    // sim2d only; <= 0 selects default_drr_step() of the source grid.
    double drr_step_mm = 0.0;
    // sim3d only: correlate over the target-mask support instead of the whole domain.
    bool ncc_within_target_mask = false;
};

void validate(const LossConfig& cfg);

struct NccResult {
    double value = 0.0;
    // Set when either input has (near) zero variance; value is then defined as 0.
    bool degenerate = false;
};

/// Variance guard used by ncc.
inline constexpr double kNccEpsilon = 1e-8;

/// Pearson correlation over all elements (or over elements where `support` is 1).
NccResult ncc(std::span<const double> a, std::span<const double> b,
              std::span<const std::uint8_t> support = {});
NccResult ncc(const Image3D& a, const Image3D& b);
NccResult ncc(const Image2D& a, const Image2D& b);

/// ncc(a, b) plus d ncc / d b written into d_b (zeros when degenerate).
NccResult ncc_with_grad(std::span<const double> a, std::span<const double> b, std::span<double> d_b,
                        std::span<const std::uint8_t> support = {});

/// 1 - NCC(I_t * S_t, (I_s * S_s) o (x + u)).
double masked_sim_loss(const Image3D& target, const Image3D& source, const Mask3D& target_mask,
                       const Mask3D& source_mask, const DisplacementField& u);

/// (1/|Omega|) sum ||Du||_F^2 with forward differences in world units; the
/// difference across the last slice of each axis is zero (replicate boundary).
double diffusion_energy(const DisplacementField& u);

/// out += scale * d diffusion_energy / d u.
void add_diffusion_gradient(const DisplacementField& u, double scale, std::span<double> out);

/// Non-owning views of everything a loss may need. sim3d reads source, source_mask,
/// target and target_mask; sim2d reads source, source_mask and projections.
struct LossInputs {
    const Image3D* source = nullptr;
    const Mask3D* source_mask = nullptr;
    const Image3D* target = nullptr;
    const Mask3D* target_mask = nullptr;
    const ProjectionSet* projections = nullptr;
};

struct LossValue {
    double similarity = 0.0;
    double regularization = 0.0;  // unweighted diffusion energy
    double total = 0.0;
    bool degenerate = false;
};

/// total = similarity + lambda * diffusion_energy, with analytic dL/du.
///
/// Masked images are precomputed at construction; evaluate() is const and does not
/// touch shared state, so one instance may serve concurrent callers.
class RegistrationLoss {
public:
    RegistrationLoss(const LossInputs& inputs, const LossConfig& cfg);

    const GridSpec& grid() const { return moving_.grid; }
    const LossConfig& config() const { return cfg_; }

    LossValue evaluate(const DisplacementField& u) const;
    LossValue evaluate(const DisplacementField& u, DisplacementField& grad) const;

private:
    LossValue run(const DisplacementField& u, DisplacementField* grad) const;

    LossConfig cfg_;
    Image3D moving_;  // I_s * S_s
    Image3D fixed_;   // I_t * S_t (sim3d)
    std::vector<std::uint8_t> support_;
    const ProjectionSet* projections_ = nullptr;
    double step_mm_ = 0.0;
};

double total_loss(const LossInputs& inputs, const DisplacementField& u, const LossConfig& cfg);

/// dL/dalpha_i = <dL/du, e_i> at u = reconstruct(sub, alpha).
AlphaVector grad_alpha(const LossInputs& inputs, const LossConfig& cfg, const DeformationSubspace& sub,
                       std::span<const double> alpha);

DisplacementField grad_dense(const LossInputs& inputs, const LossConfig& cfg, const DisplacementField& u);

} // namespace liftreg
