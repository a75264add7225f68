#pragma once

// Tree-structured sparse recovery in the wavelet domain. Per block the solver
// minimizes
//
//   F(theta, z) = 1/2 ||y - A theta||^2
//               + beta (sum_j w_j |theta_j| + sum_g ||z_g||_2)
//               + lambda/2 ||z - G theta||^2
//
// by alternating an exact group shrinkage for z with a proximal gradient
// step for theta, optionally followed by a denoiser-driven correction and a
// whole-image deblocking pass.

#include <array>
#include <cstddef>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "wcs/image.hpp"
#include "wcs/sampling.hpp"
#include "wcs/wavelet.hpp"

namespace wcs {

enum class StepMode { Fixed, Lipschitz };
enum class DenoiserKind { Off, Median3 };
enum class DeblockerKind { Off, BoundarySmooth };

DenoiserKind parse_denoiser(const std::string& name);
DeblockerKind parse_deblocker(const std::string& name);
std::string to_string(DenoiserKind kind);
std::string to_string(DeblockerKind kind);

struct SolverConfig {
    double beta = 3e-3;
    double lambda = 1e-1;
    /// Per-subband l1 weights in canonical order. Empty: LL -> ll_l1_weight, details -> 1.
    std::vector<double> l1_weights;
    double ll_l1_weight = 0.0;
    /// Per parent level (index = level - 2). Empty: all 1.
    std::vector<double> group_weights;
    StepMode step_mode = StepMode::Lipschitz;
    double fixed_step = 1.0;
    int max_iters = 200;
    double rel_tol = 1e-6;
    DenoiserKind denoiser = DenoiserKind::Off;
    DeblockerKind deblocker = DeblockerKind::Off;
    bool apply_correction = false;

    /// Throws ArgumentError on violated invariants.
    void validate(const SubbandLayout& layout) const;
    std::vector<double> resolved_l1_weights(const SubbandLayout& layout) const;
    double group_weight(int parent_level) const;
};

/// G: stacks the (weighted) parent-child groups of one block.
/// (G theta)_{g,k} = w_g * theta[hf_offset + groups[g][k]].
class GroupOperator {
public:
    GroupOperator() = default;
    GroupOperator(TreeGroups groups, std::vector<double> group_weights);
    static GroupOperator from_config(std::size_t block_size, int levels, const SolverConfig& config);

    std::size_t group_count() const noexcept { return groups_.size(); }
    std::size_t output_length() const noexcept { return groups_.size() * TreeGroups::kGroupSize; }
    const TreeGroups& groups() const noexcept { return groups_; }
    double weight(std::size_t g) const { return weights_[g]; }

    void apply(std::span<const double> theta, std::span<double> out) const;
    /// theta_out += G^T v (scatter-add; overlapping membership accumulates).
    void apply_transpose_add(std::span<const double> v, std::span<double> theta_out) const;
    /// Largest eigenvalue of G^T G. G^T G is diagonal, so this is the
    /// maximum over coefficients of the summed squared weights of the
    /// groups containing it.
    double lipschitz() const;

private:
    TreeGroups groups_;
    std::vector<double> weights_;
};

/// Everything needed to evaluate one block's subproblems.
struct BlockProblem {
    const SamplingOperator& a;
    const GroupOperator& g;
    std::span<const double> l1_weights;  // per coefficient
};

/// Expands per-subband weights to one weight per flattened coefficient.
std::vector<double> expand_subband_weights(const SubbandLayout& layout, std::span<const double> per_subband);

double objective(std::span<const double> theta, std::span<const double> z, std::span<const double> y,
                 const BlockProblem& p, double beta, double lambda);

/// max(||v|| - tau, 0) v / ||v||, zero when ||v|| = 0.
std::array<double, TreeGroups::kGroupSize> group_shrink(std::span<const double, TreeGroups::kGroupSize> v,
                                                        double tau);

/// Exact minimizer of beta ||z||_{2,1} + lambda/2 ||z - G theta||^2.
std::vector<double> z_update(std::span<const double> theta, const GroupOperator& g, double beta, double lambda);

/// r = theta - gamma [A^T (A theta - y) + lambda G^T (G theta - z)].
std::vector<double> gradient_step(std::span<const double> theta, std::span<const double> z,
                                  std::span<const double> y, const SamplingOperator& a, const GroupOperator& g,
                                  double lambda, double gamma);

double soft_threshold(double x, double tau);
std::vector<double> soft_threshold(std::span<const double> r, std::span<const double> tau);

/// Maps a block's coefficients to denoised coefficients.
using CoefficientDenoiser = std::function<std::vector<double>(std::span<const double>)>;

/// Identity on coefficients.
CoefficientDenoiser identity_denoiser();
/// Synthesize, 3x3 median with replicated edges, analyze.
CoefficientDenoiser median3_denoiser(const SubbandLayout& layout);

/// theta = theta_hat - (A^T A - I) D(theta_prev).
std::vector<double> denoise_correct(std::span<const double> theta_hat, std::span<const double> theta_prev,
                                    const SamplingOperator& a, const CoefficientDenoiser& denoiser);

/// 3x3 median filter with edge replication.
Plane median3(const Plane& block);

/// [1/4, 1/2, 1/4] across each vertical and horizontal block seam of a padded canvas;
/// only the two pixels adjacent to a seam change.
Image smooth_block_boundaries(const Image& canvas, std::size_t block_size);

/// Step size for the configured mode: fixed_step, or 1 / (1 + lambda * L_G).
double step_size(const SolverConfig& config, const GroupOperator& g);

struct ReconState {
    std::vector<std::vector<double>> theta;  // per block, flattened
    std::vector<std::vector<double>> z;      // per block, group_count * 5
    int iter = 0;
    std::vector<double> objective_trace;     // F after each iteration, summed over blocks
};

struct ReconResult {
    Image image;
    Image initial;
    ReconState state;
    std::vector<double> psnr_trace;  // per iteration, empty without ground truth
    double initial_psnr = 0.0;       // meaningful only with ground truth
    bool converged = false;          // stopped on rel_tol rather than max_iters
    double step = 0.0;
};

/// Full reconstruction starting from the initial A^T y estimate. With
/// max_iters == 0 the initial reconstruction is returned unchanged.
/// Throws DivergenceError on non-finite state.
ReconResult reconstruct(const MeasurementSet& measurements, const SamplingOperator& op, const SolverConfig& config,
                        const Image* ground_truth = nullptr, unsigned threads = 1);

}  // namespace wcs
