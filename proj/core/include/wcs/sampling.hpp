#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include <Eigen/Core>

#include "wcs/allocation.hpp"
#include "wcs/image.hpp"
#include "wcs/wavelet.hpp"

namespace wcs {

class SplitMix64 {
public:
    explicit SplitMix64(std::uint64_t seed) : state_(seed) {}
    std::uint64_t next();
    /// Uniform in the open interval (0, 1), 53-bit resolution.
    double next_open_unit();

private:
    std::uint64_t state_;
};

/// Standard normal variates by the Box-Muller transform; both outputs of
/// each pair are consumed in order (cosine branch first).
class GaussianStream {
public:
    explicit GaussianStream(std::uint64_t seed) : rng_(seed) {}
    double next();

private:
    SplitMix64 rng_;
    double spare_ = 0.0;
    bool has_spare_ = false;
};

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// In-place modified Gram-Schmidt over the rows. Returns false if a row's
/// residual norm drops below 1e-10 of its original norm.
bool orthonormalize_rows(RowMatrix& m);

/// Tag mixed into the operator seed for one subband: (level << 32) | orientation code.
std::uint64_t subband_tag(SubbandId id);

/// Per-subband row-orthonormal Gaussian sensing matrices, shared by every block.
struct SamplingOperator {
    std::size_t block_size = 0;
    int levels = 0;
    std::uint64_t seed = 0;
    bool rows_orthonormalized = true;
    SubbandLayout layout;
    std::vector<RowMatrix> matrices;         // canonical order, M_s x n_s^2 (0 rows when M_s = 0)
    std::vector<std::uint64_t> sub_seeds;    // seed actually used per subband
    std::vector<int> regenerations;          // rank-deficiency retries per subband
    std::vector<std::size_t> meas_offsets;   // offset of each subband inside a block's measurement vector
    std::size_t meas_total = 0;

    /// meas = A theta for one block (all subbands).
    void forward(std::span<const double> coeffs, std::span<double> meas) const;
    /// coeffs = A^T meas for one block; unsampled subbands are zero-filled.
    void adjoint(std::span<const double> meas, std::span<double> coeffs) const;
    /// coeffs = (A^T A) coeffs_in.
    void gram(std::span<const double> coeffs_in, std::span<double> coeffs_out) const;

    bool matches(const MeasurementPlan& plan) const;
};

/// Deterministic in (plan.operator_seed, plan). Throws InfeasiblePlanError when M_s > n_s^2.
SamplingOperator make_operator(const MeasurementPlan& plan);

/// SHA-256 of every matrix entry, canonical subband order, row-major, little-endian binary64.
std::array<std::uint8_t, 32> operator_digest(const SamplingOperator& op);

struct BlockGrid {
    std::size_t rows = 0;  // image height before padding
    std::size_t cols = 0;
    std::size_t block_size = 0;
    std::size_t block_rows = 0;
    std::size_t block_cols = 0;

    std::size_t count() const noexcept { return block_rows * block_cols; }
    std::size_t padded_rows() const noexcept { return block_rows * block_size; }
    std::size_t padded_cols() const noexcept { return block_cols * block_size; }
};

BlockGrid make_grid(std::size_t rows, std::size_t cols, std::size_t block_size);

/// Mirror index into [0, len) without edge repetition (..., 2, 1, 0, 1, 2, ...).
std::size_t mirror_index(std::size_t p, std::size_t len);

/// Symmetric padding to multiples of n, then row-major n x n blocks.
std::vector<Plane> partition_blocks(const Image& image, std::size_t block_size);
/// Tiles blocks into the padded canvas and crops back to rows x cols.
Image assemble_blocks(std::span<const Plane> blocks, std::size_t rows, std::size_t cols);
/// Tiles blocks without cropping (padded canvas).
Image assemble_padded(std::span<const Plane> blocks, const BlockGrid& grid);

/// Per-block wavelet pyramids of an image; feeds subband_stats.
std::vector<SubbandPyramid> analyze_image(const Image& image, std::size_t block_size, int levels);

/// Stats -> allocation in one step.
MeasurementPlan plan_for_image(const Image& image, std::size_t block_size, int levels, Rate rate,
                               const AllocationConfig& config, std::uint64_t seed);

struct MeasurementSet {
    MeasurementPlan plan;
    std::size_t rows = 0;
    std::size_t cols = 0;
    /// One vector per block (row-major), subbands concatenated in canonical order.
    std::vector<std::vector<float>> blocks;

    BlockGrid grid() const { return make_grid(rows, cols, plan.block_size); }

    friend bool operator==(const MeasurementSet&, const MeasurementSet&) = default;
};

/// y_{s,j} = A_s vec(theta_s) for every block j, stored as binary32.
MeasurementSet sample_image(const Image& image, const MeasurementPlan& plan, const SamplingOperator& op,
                            unsigned threads = 1);

struct InitialReconstruction {
    Image image;
    std::vector<std::vector<double>> coeffs;  // flattened theta^0 per block

    std::vector<SubbandPyramid> pyramids(std::size_t block_size, int levels) const;
};

/// theta_s^0 = A_s^T y_s per block (the pseudo-inverse, rows being orthonormal),
/// synthesized and assembled.
InitialReconstruction initial_reconstruct(const MeasurementSet& measurements, const SamplingOperator& op,
                                          unsigned threads = 1);

}  // namespace wcs
