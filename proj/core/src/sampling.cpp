#include "wcs/sampling.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <numbers>

#include <openssl/evp.h>

#include "wcs/errors.hpp"
#include "wcs/parallel.hpp"

namespace wcs {

std::uint64_t SplitMix64::next() {
    std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

double SplitMix64::next_open_unit() {
    return (static_cast<double>(next() >> 11) + 0.5) * 0x1.0p-53;
}

double GaussianStream::next() {
    if (has_spare_) {
        has_spare_ = false;
        return spare_;
    }
    const double u1 = rng_.next_open_unit();
    const double u2 = rng_.next_open_unit();
    const double radius = std::sqrt(-2.0 * std::log(u1));
    const double angle = 2.0 * std::numbers::pi * u2;
    spare_ = radius * std::sin(angle);
    has_spare_ = true;
    return radius * std::cos(angle);
}

bool orthonormalize_rows(RowMatrix& m) {
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
        auto v = m.row(i);
        const double original = v.norm();
        for (Eigen::Index j = 0; j < i; ++j) {
            const double proj = m.row(j).dot(v);
            v -= proj * m.row(j);
        }
        const double residual = v.norm();
        if (!(residual > 1e-10 * original)) return false;
        v /= residual;
    }
    return true;
}

std::uint64_t subband_tag(SubbandId id) {
    return (static_cast<std::uint64_t>(id.level) << 32) | static_cast<std::uint64_t>(id.orientation);
}

void SamplingOperator::forward(std::span<const double> coeffs, std::span<double> meas) const {
    if (coeffs.size() != layout.total || meas.size() != meas_total) {
        throw InternalError("operator forward: dimension mismatch");
    }
    for (std::size_t s = 0; s < matrices.size(); ++s) {
        const auto& a = matrices[s];
        if (a.rows() == 0) continue;
        Eigen::Map<const Eigen::VectorXd> theta(coeffs.data() + layout.offsets[s], a.cols());
        Eigen::Map<Eigen::VectorXd> y(meas.data() + meas_offsets[s], a.rows());
        y.noalias() = a * theta;
    }
}

void SamplingOperator::adjoint(std::span<const double> meas, std::span<double> coeffs) const {
    if (coeffs.size() != layout.total || meas.size() != meas_total) {
        throw InternalError("operator adjoint: dimension mismatch");
    }
    for (std::size_t s = 0; s < matrices.size(); ++s) {
        const auto& a = matrices[s];
        Eigen::Map<Eigen::VectorXd> theta(coeffs.data() + layout.offsets[s],
                                          static_cast<Eigen::Index>(layout.length(s)));
        if (a.rows() == 0) {
            theta.setZero();
            continue;
        }
        Eigen::Map<const Eigen::VectorXd> y(meas.data() + meas_offsets[s], a.rows());
        theta.noalias() = a.transpose() * y;
    }
}

void SamplingOperator::gram(std::span<const double> coeffs_in, std::span<double> coeffs_out) const {
    std::vector<double> meas(meas_total);
    forward(coeffs_in, meas);
    adjoint(meas, coeffs_out);
}

bool SamplingOperator::matches(const MeasurementPlan& plan) const {
    if (plan.block_size != block_size || plan.levels != levels || plan.operator_seed != seed) return false;
    if (plan.counts.size() != matrices.size()) return false;
    for (std::size_t s = 0; s < matrices.size(); ++s) {
        if (static_cast<std::size_t>(matrices[s].rows()) != plan.counts[s]) return false;
    }
    return true;
}

SamplingOperator make_operator(const MeasurementPlan& plan) {
    validate_plan(plan);
    SamplingOperator op;
    op.block_size = plan.block_size;
    op.levels = plan.levels;
    op.seed = plan.operator_seed;
    op.layout = make_layout(plan.block_size, plan.levels);

    for (std::size_t s = 0; s < op.layout.count(); ++s) {
        const auto rows = static_cast<Eigen::Index>(plan.counts[s]);
        const auto cols = static_cast<Eigen::Index>(op.layout.length(s));
        std::uint64_t sub_seed = plan.operator_seed ^ subband_tag(op.layout.ids[s]);
        int retries = 0;
        RowMatrix a(rows, cols);
        for (;;) {
            GaussianStream gauss(sub_seed);
            for (Eigen::Index i = 0; i < rows; ++i) {
                for (Eigen::Index j = 0; j < cols; ++j) a(i, j) = gauss.next();
            }
            if (orthonormalize_rows(a)) break;
            ++sub_seed;
            if (++retries > 64) throw InternalError("could not generate a full-rank operator for " +
                                                    to_string(op.layout.ids[s]));
        }
        op.meas_offsets.push_back(op.meas_total);
        op.meas_total += static_cast<std::size_t>(rows);
        op.matrices.push_back(std::move(a));
        op.sub_seeds.push_back(sub_seed);
        op.regenerations.push_back(retries);
    }
    return op;
}

std::array<std::uint8_t, 32> operator_digest(const SamplingOperator& op) {
    EVP_MD_CTX* ctx = EVP_MD_CTX_new();
    if (ctx == nullptr || EVP_DigestInit_ex(ctx, EVP_sha256(), nullptr) != 1) {
        EVP_MD_CTX_free(ctx);
        throw InternalError("SHA-256 initialisation failed");
    }
    std::vector<std::uint8_t> row_bytes;
    for (const auto& a : op.matrices) {
        row_bytes.resize(static_cast<std::size_t>(a.cols()) * 8);
        for (Eigen::Index i = 0; i < a.rows(); ++i) {
            for (Eigen::Index j = 0; j < a.cols(); ++j) {
                const auto bits = std::bit_cast<std::uint64_t>(a(i, j));
                for (int b = 0; b < 8; ++b) row_bytes[static_cast<std::size_t>(j) * 8 + b] = (bits >> (8 * b)) & 0xff;
            }
            EVP_DigestUpdate(ctx, row_bytes.data(), row_bytes.size());
        }
    }
    std::array<std::uint8_t, 32> out{};
    unsigned int len = 0;
    EVP_DigestFinal_ex(ctx, out.data(), &len);
    EVP_MD_CTX_free(ctx);
    return out;
}

BlockGrid make_grid(std::size_t rows, std::size_t cols, std::size_t block_size) {
    if (rows == 0 || cols == 0) throw ArgumentError("image is empty");
    if (block_size == 0 || (block_size & (block_size - 1)) != 0) {
        throw ArgumentError("block size must be a power of two, got " + std::to_string(block_size));
    }
    return BlockGrid{rows, cols, block_size, (rows + block_size - 1) / block_size,
                     (cols + block_size - 1) / block_size};
}

std::size_t mirror_index(std::size_t p, std::size_t len) {
    if (len == 1) return 0;
    const std::size_t period = 2 * (len - 1);
    p %= period;
    return p < len ? p : period - p;
}

std::vector<Plane> partition_blocks(const Image& image, std::size_t block_size) {
    const BlockGrid grid = make_grid(image.rows(), image.cols(), block_size);
    std::vector<Plane> blocks;
    blocks.reserve(grid.count());
    for (std::size_t br = 0; br < grid.block_rows; ++br) {
        for (std::size_t bc = 0; bc < grid.block_cols; ++bc) {
            Plane block(block_size);
            for (std::size_t r = 0; r < block_size; ++r) {
                const std::size_t src_r = mirror_index(br * block_size + r, image.rows());
                for (std::size_t c = 0; c < block_size; ++c) {
                    block.at(r, c) = image(src_r, mirror_index(bc * block_size + c, image.cols()));
                }
            }
            blocks.push_back(std::move(block));
        }
    }
    return blocks;
}

Image assemble_padded(std::span<const Plane> blocks, const BlockGrid& grid) {
    if (blocks.size() != grid.count()) {
        throw DimensionError("assemble: expected " + std::to_string(grid.count()) + " blocks, got " +
                             std::to_string(blocks.size()));
    }
    const std::size_t n = grid.block_size;
    Image canvas(grid.padded_rows(), grid.padded_cols());
    for (std::size_t b = 0; b < blocks.size(); ++b) {
        if (blocks[b].side != n) throw DimensionError("assemble: block side mismatch");
        const std::size_t r0 = (b / grid.block_cols) * n;
        const std::size_t c0 = (b % grid.block_cols) * n;
        for (std::size_t r = 0; r < n; ++r) {
            for (std::size_t c = 0; c < n; ++c) canvas(r0 + r, c0 + c) = blocks[b].at(r, c);
        }
    }
    return canvas;
}

Image assemble_blocks(std::span<const Plane> blocks, std::size_t rows, std::size_t cols) {
    if (blocks.empty()) throw ArgumentError("assemble: no blocks");
    const BlockGrid grid = make_grid(rows, cols, blocks.front().side);
    const Image canvas = assemble_padded(blocks, grid);
    Image out(rows, cols);
    for (std::size_t r = 0; r < rows; ++r) {
        for (std::size_t c = 0; c < cols; ++c) out(r, c) = canvas(r, c);
    }
    return out;
}

std::vector<SubbandPyramid> analyze_image(const Image& image, std::size_t block_size, int levels) {
    const auto blocks = partition_blocks(image, block_size);
    std::vector<SubbandPyramid> out;
    out.reserve(blocks.size());
    for (const auto& b : blocks) out.push_back(dwt_multilevel(b, levels));
    return out;
}

MeasurementPlan plan_for_image(const Image& image, std::size_t block_size, int levels, Rate rate,
                               const AllocationConfig& config, std::uint64_t seed) {
    const auto pyramids = analyze_image(image, block_size, levels);
    return allocate_measurements(subband_stats(pyramids), block_size, levels, rate, config, seed);
}

MeasurementSet sample_image(const Image& image, const MeasurementPlan& plan, const SamplingOperator& op,
                            unsigned threads) {
    if (!op.matches(plan)) throw InternalError("sample_image: operator does not match the plan");
    const auto blocks = partition_blocks(image, plan.block_size);

    MeasurementSet ms;
    ms.plan = plan;
    ms.rows = image.rows();
    ms.cols = image.cols();
    ms.blocks.assign(blocks.size(), std::vector<float>(op.meas_total));
    parallel_for(blocks.size(), threads, [&](std::size_t j) {
        std::vector<double> coeffs(op.layout.total), meas(op.meas_total);
        dwt_flat(blocks[j].values, op.layout, coeffs);
        op.forward(coeffs, meas);
        for (std::size_t k = 0; k < meas.size(); ++k) ms.blocks[j][k] = static_cast<float>(meas[k]);
    });
    return ms;
}

std::vector<SubbandPyramid> InitialReconstruction::pyramids(std::size_t block_size, int levels) const {
    std::vector<SubbandPyramid> out;
    out.reserve(coeffs.size());
    for (const auto& c : coeffs) out.push_back(unflatten(c, block_size, levels));
    return out;
}

InitialReconstruction initial_reconstruct(const MeasurementSet& measurements, const SamplingOperator& op,
                                          unsigned threads) {
    if (!op.matches(measurements.plan)) throw InternalError("initial_reconstruct: operator does not match the plan");
    const BlockGrid grid = measurements.grid();
    if (measurements.blocks.size() != grid.count()) throw InternalError("initial_reconstruct: block count mismatch");

    InitialReconstruction rec;
    rec.coeffs.assign(grid.count(), std::vector<double>(op.layout.total));
    std::vector<Plane> blocks(grid.count(), Plane(grid.block_size));
    parallel_for(grid.count(), threads, [&](std::size_t j) {
        const auto& y32 = measurements.blocks[j];
        if (y32.size() != op.meas_total) throw InternalError("initial_reconstruct: measurement length mismatch");
        std::vector<double> y(y32.begin(), y32.end());
        op.adjoint(y, rec.coeffs[j]);
        idwt_flat(rec.coeffs[j], op.layout, blocks[j].values);
    });
    rec.image = assemble_blocks(blocks, grid.rows, grid.cols);
    return rec;
}

}  // namespace wcs
