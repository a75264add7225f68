#include "wcs/solver.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "wcs/errors.hpp"
#include "wcs/metrics.hpp"
#include "wcs/parallel.hpp"

namespace wcs {

namespace {

constexpr std::size_t kG = TreeGroups::kGroupSize;

bool all_finite(std::span<const double> v) {
    return std::all_of(v.begin(), v.end(), [](double x) { return std::isfinite(x); });
}

void require_length(std::span<const double> v, std::size_t n, const char* what) {
    if (v.size() != n) {
        throw DimensionError(std::string(what) + ": expected length " + std::to_string(n) + ", got " +
                             std::to_string(v.size()));
    }
}

}  // namespace

DenoiserKind parse_denoiser(const std::string& name) {
    if (name == "off") return DenoiserKind::Off;
    if (name == "median3") return DenoiserKind::Median3;
    throw ArgumentError("unknown denoiser '" + name + "' (expected off|median3)");
}

DeblockerKind parse_deblocker(const std::string& name) {
    if (name == "off") return DeblockerKind::Off;
    if (name == "boundary_smooth") return DeblockerKind::BoundarySmooth;
    throw ArgumentError("unknown deblocker '" + name + "' (expected off|boundary_smooth)");
}

std::string to_string(DenoiserKind kind) { return kind == DenoiserKind::Median3 ? "median3" : "off"; }
std::string to_string(DeblockerKind kind) { return kind == DeblockerKind::BoundarySmooth ? "boundary_smooth" : "off"; }

void SolverConfig::validate(const SubbandLayout& layout) const {
    if (!(beta >= 0.0) || !std::isfinite(beta)) throw ArgumentError("beta must be >= 0");
    if (!(lambda > 0.0) || !std::isfinite(lambda)) throw ArgumentError("lambda must be > 0");
    if (max_iters < 0) throw ArgumentError("max_iters must be >= 0");
    if (!(rel_tol > 0.0)) throw ArgumentError("rel_tol must be > 0");
    if (step_mode == StepMode::Fixed && !(fixed_step >= 0.0)) throw ArgumentError("fixed step must be >= 0");
    if (!(ll_l1_weight >= 0.0)) throw ArgumentError("LL l1 weight must be >= 0");
    if (!l1_weights.empty() && l1_weights.size() != layout.count()) {
        throw ArgumentError("l1_weights needs one entry per subband (" + std::to_string(layout.count()) + ")");
    }
    for (double w : l1_weights) {
        if (!(w >= 0.0)) throw ArgumentError("l1 weights must be >= 0");
    }
    for (double w : group_weights) {
        if (!(w >= 0.0)) throw ArgumentError("group weights must be >= 0");
    }
    if (!group_weights.empty() && group_weights.size() != static_cast<std::size_t>(layout.levels - 1)) {
        throw ArgumentError("group_weights needs one entry per parent level (" + std::to_string(layout.levels - 1) +
                            ")");
    }
}

std::vector<double> SolverConfig::resolved_l1_weights(const SubbandLayout& layout) const {
    if (!l1_weights.empty()) return l1_weights;
    std::vector<double> w(layout.count(), 1.0);
    w[0] = ll_l1_weight;
    return w;
}

double SolverConfig::group_weight(int parent_level) const {
    if (group_weights.empty()) return 1.0;
    return group_weights.at(static_cast<std::size_t>(parent_level - 2));
}

GroupOperator::GroupOperator(TreeGroups groups, std::vector<double> group_weights)
    : groups_(std::move(groups)), weights_(std::move(group_weights)) {
    if (weights_.size() != groups_.size()) throw DimensionError("GroupOperator: one weight per group required");
}

GroupOperator GroupOperator::from_config(std::size_t block_size, int levels, const SolverConfig& config) {
    TreeGroups tg = build_tree_groups(block_size, levels);
    std::vector<double> w(tg.size());
    for (std::size_t g = 0; g < tg.size(); ++g) w[g] = config.group_weight(tg.parent_level[g]);
    return GroupOperator(std::move(tg), std::move(w));
}

void GroupOperator::apply(std::span<const double> theta, std::span<double> out) const {
    require_length(theta, groups_.hf_offset + groups_.hf_length, "G theta");
    require_length(out, output_length(), "G theta output");
    const double* hf = theta.data() + groups_.hf_offset;
    for (std::size_t g = 0; g < groups_.size(); ++g) {
        for (std::size_t k = 0; k < kG; ++k) out[g * kG + k] = weights_[g] * hf[groups_.groups[g][k]];
    }
}

void GroupOperator::apply_transpose_add(std::span<const double> v, std::span<double> theta_out) const {
    require_length(v, output_length(), "G^T v");
    require_length(theta_out, groups_.hf_offset + groups_.hf_length, "G^T v output");
    double* hf = theta_out.data() + groups_.hf_offset;
    for (std::size_t g = 0; g < groups_.size(); ++g) {
        for (std::size_t k = 0; k < kG; ++k) hf[groups_.groups[g][k]] += weights_[g] * v[g * kG + k];
    }
}

double GroupOperator::lipschitz() const {
    std::vector<double> diag(groups_.hf_length, 0.0);
    for (std::size_t g = 0; g < groups_.size(); ++g) {
        for (std::size_t idx : groups_.groups[g]) diag[idx] += weights_[g] * weights_[g];
    }
    return diag.empty() ? 0.0 : *std::max_element(diag.begin(), diag.end());
}

std::vector<double> expand_subband_weights(const SubbandLayout& layout, std::span<const double> per_subband) {
    if (per_subband.size() != layout.count()) throw DimensionError("expand_subband_weights: wrong subband count");
    std::vector<double> out(layout.total);
    for (std::size_t s = 0; s < layout.count(); ++s) {
        std::fill_n(out.begin() + static_cast<std::ptrdiff_t>(layout.offsets[s]), layout.length(s), per_subband[s]);
    }
    return out;
}

double objective(std::span<const double> theta, std::span<const double> z, std::span<const double> y,
                 const BlockProblem& p, double beta, double lambda) {
    require_length(theta, p.a.layout.total, "objective theta");
    require_length(z, p.g.output_length(), "objective z");
    require_length(y, p.a.meas_total, "objective y");
    require_length(p.l1_weights, p.a.layout.total, "objective l1 weights");

    std::vector<double> ax(p.a.meas_total);
    p.a.forward(theta, ax);
    double data = 0.0;
    for (std::size_t i = 0; i < ax.size(); ++i) data += (y[i] - ax[i]) * (y[i] - ax[i]);

    double l1 = 0.0;
    for (std::size_t j = 0; j < theta.size(); ++j) l1 += p.l1_weights[j] * std::abs(theta[j]);

    double group_norms = 0.0;
    for (std::size_t g = 0; g < p.g.group_count(); ++g) {
        double sq = 0.0;
        for (std::size_t k = 0; k < kG; ++k) sq += z[g * kG + k] * z[g * kG + k];
        group_norms += std::sqrt(sq);
    }

    std::vector<double> gx(p.g.output_length());
    p.g.apply(theta, gx);
    double coupling = 0.0;
    for (std::size_t i = 0; i < gx.size(); ++i) coupling += (z[i] - gx[i]) * (z[i] - gx[i]);

    return 0.5 * data + beta * (l1 + group_norms) + 0.5 * lambda * coupling;
}

std::array<double, kG> group_shrink(std::span<const double, kG> v, double tau) {
    if (!(tau >= 0.0)) throw ArgumentError("group_shrink: tau must be >= 0");
    double sq = 0.0;
    for (double x : v) sq += x * x;
    const double norm = std::sqrt(sq);
    std::array<double, kG> out{};
    if (norm == 0.0 || norm <= tau) return out;
    const double scale = (norm - tau) / norm;
    for (std::size_t k = 0; k < kG; ++k) out[k] = scale * v[k];
    return out;
}

std::vector<double> z_update(std::span<const double> theta, const GroupOperator& g, double beta, double lambda) {
    if (!(lambda > 0.0)) throw ArgumentError("z_update: lambda must be > 0");
    std::vector<double> u(g.output_length());
    g.apply(theta, u);
    const double tau = beta / lambda;
    for (std::size_t k = 0; k < g.group_count(); ++k) {
        const auto shrunk = group_shrink(std::span<const double, kG>(u.data() + k * kG, kG), tau);
        std::copy(shrunk.begin(), shrunk.end(), u.begin() + static_cast<std::ptrdiff_t>(k * kG));
    }
    return u;
}

std::vector<double> gradient_step(std::span<const double> theta, std::span<const double> z,
                                  std::span<const double> y, const SamplingOperator& a, const GroupOperator& g,
                                  double lambda, double gamma) {
    require_length(theta, a.layout.total, "gradient_step theta");
    require_length(z, g.output_length(), "gradient_step z");
    require_length(y, a.meas_total, "gradient_step y");

    std::vector<double> resid(a.meas_total);
    a.forward(theta, resid);
    for (std::size_t i = 0; i < resid.size(); ++i) resid[i] -= y[i];
    std::vector<double> grad(a.layout.total);
    a.adjoint(resid, grad);

    std::vector<double> gd(g.output_length());
    g.apply(theta, gd);
    for (std::size_t i = 0; i < gd.size(); ++i) gd[i] = lambda * (gd[i] - z[i]);
    g.apply_transpose_add(gd, grad);

    std::vector<double> r(theta.begin(), theta.end());
    for (std::size_t j = 0; j < r.size(); ++j) r[j] -= gamma * grad[j];
    return r;
}

double soft_threshold(double x, double tau) {
    const double mag = std::abs(x) - tau;
    return mag > 0.0 ? std::copysign(mag, x) : 0.0;
}

std::vector<double> soft_threshold(std::span<const double> r, std::span<const double> tau) {
    require_length(tau, r.size(), "soft_threshold tau");
    std::vector<double> out(r.size());
    for (std::size_t j = 0; j < r.size(); ++j) out[j] = soft_threshold(r[j], tau[j]);
    return out;
}

CoefficientDenoiser identity_denoiser() {
    return [](std::span<const double> c) { return std::vector<double>(c.begin(), c.end()); };
}

Plane median3(const Plane& block) {
    const std::size_t n = block.side;
    Plane out(n);
    std::array<double, 9> win{};
    for (std::size_t r = 0; r < n; ++r) {
        for (std::size_t c = 0; c < n; ++c) {
            std::size_t k = 0;
            for (int dr = -1; dr <= 1; ++dr) {
                const auto rr = static_cast<std::size_t>(
                    std::clamp<std::ptrdiff_t>(static_cast<std::ptrdiff_t>(r) + dr, 0, static_cast<std::ptrdiff_t>(n) - 1));
                for (int dc = -1; dc <= 1; ++dc) {
                    const auto cc = static_cast<std::size_t>(std::clamp<std::ptrdiff_t>(
                        static_cast<std::ptrdiff_t>(c) + dc, 0, static_cast<std::ptrdiff_t>(n) - 1));
                    win[k++] = block.at(rr, cc);
                }
            }
            std::nth_element(win.begin(), win.begin() + 4, win.end());
            out.at(r, c) = win[4];
        }
    }
    return out;
}

CoefficientDenoiser median3_denoiser(const SubbandLayout& layout) {
    return [layout](std::span<const double> coeffs) {
        Plane block(layout.block_size);
        idwt_flat(coeffs, layout, block.values);
        const Plane filtered = median3(block);
        std::vector<double> out(layout.total);
        dwt_flat(filtered.values, layout, out);
        return out;
    };
}

std::vector<double> denoise_correct(std::span<const double> theta_hat, std::span<const double> theta_prev,
                                    const SamplingOperator& a, const CoefficientDenoiser& denoiser) {
    require_length(theta_hat, a.layout.total, "denoise_correct theta_hat");
    require_length(theta_prev, a.layout.total, "denoise_correct theta_prev");
    const std::vector<double> d = denoiser(theta_prev);
    require_length(d, a.layout.total, "denoiser output");
    std::vector<double> gd(a.layout.total);
    a.gram(d, gd);
    std::vector<double> out(theta_hat.begin(), theta_hat.end());
    for (std::size_t j = 0; j < out.size(); ++j) out[j] -= gd[j] - d[j];
    return out;
}

Image smooth_block_boundaries(const Image& canvas, std::size_t block_size) {
    if (block_size == 0 || canvas.rows() % block_size != 0 || canvas.cols() % block_size != 0) {
        throw DimensionError("smooth_block_boundaries: canvas is not a whole number of blocks");
    }
    Image out = canvas;
    // vertical seams: filter along rows
    for (std::size_t seam = block_size; seam < canvas.cols(); seam += block_size) {
        for (std::size_t r = 0; r < canvas.rows(); ++r) {
            for (std::size_t c : {seam - 1, seam}) {
                const std::size_t left = c == 0 ? 0 : c - 1;
                const std::size_t right = std::min(c + 1, canvas.cols() - 1);
                out(r, c) = 0.25 * canvas(r, left) + 0.5 * canvas(r, c) + 0.25 * canvas(r, right);
            }
        }
    }
    const Image mid = out;
    // horizontal seams: filter along columns
    for (std::size_t seam = block_size; seam < canvas.rows(); seam += block_size) {
        for (std::size_t c = 0; c < canvas.cols(); ++c) {
            for (std::size_t r : {seam - 1, seam}) {
                const std::size_t up = r == 0 ? 0 : r - 1;
                const std::size_t down = std::min(r + 1, canvas.rows() - 1);
                out(r, c) = 0.25 * mid(up, c) + 0.5 * mid(r, c) + 0.25 * mid(down, c);
            }
        }
    }
    return out;
}

double step_size(const SolverConfig& config, const GroupOperator& g) {
    if (config.step_mode == StepMode::Fixed) return config.fixed_step;
    // ||A^T A|| = 1 for row-orthonormal A.
    return 1.0 / (1.0 + config.lambda * g.lipschitz());
}

ReconResult reconstruct(const MeasurementSet& measurements, const SamplingOperator& op, const SolverConfig& config,
                        const Image* ground_truth, unsigned threads) {
    const SubbandLayout& layout = op.layout;
    config.validate(layout);
    if (!op.matches(measurements.plan)) throw InternalError("reconstruct: operator does not match the plan");
    if (ground_truth != nullptr &&
        (ground_truth->rows() != measurements.rows || ground_truth->cols() != measurements.cols)) {
        throw DimensionError("reconstruct: ground truth dimensions differ from the measured image");
    }

    const BlockGrid grid = measurements.grid();
    const std::size_t blocks = grid.count();
    const GroupOperator g = GroupOperator::from_config(layout.block_size, layout.levels, config);
    const std::vector<double> l1 = expand_subband_weights(layout, config.resolved_l1_weights(layout));
    const BlockProblem problem{op, g, l1};
    const double gamma = step_size(config, g);
    std::vector<double> tau(layout.total);
    for (std::size_t j = 0; j < tau.size(); ++j) tau[j] = gamma * config.beta * l1[j];

    CoefficientDenoiser denoiser = config.denoiser == DenoiserKind::Median3 ? median3_denoiser(layout)
                                                                             : identity_denoiser();

    std::vector<std::vector<double>> y(blocks);
    double energy = 0.0;  // F at theta = 0, z = 0
    for (std::size_t j = 0; j < blocks; ++j) {
        y[j].assign(measurements.blocks[j].begin(), measurements.blocks[j].end());
        for (double v : y[j]) energy += 0.5 * v * v;
    }
    // Round-off floor so an objective that reaches ~0 still registers as converged.
    const double abs_floor = 1e-15 * energy;

    InitialReconstruction init = initial_reconstruct(measurements, op, threads);
    ReconResult result;
    result.initial = init.image;
    result.step = gamma;
    if (ground_truth != nullptr) result.initial_psnr = psnr(*ground_truth, init.image);

    ReconState& st = result.state;
    st.theta = std::move(init.coeffs);
    st.z.assign(blocks, std::vector<double>(g.output_length(), 0.0));

    std::vector<Plane> spatial(blocks, Plane(layout.block_size));
    const auto synthesize_all = [&] {
        parallel_for(blocks, threads, [&](std::size_t j) { idwt_flat(st.theta[j], layout, spatial[j].values); });
    };

    std::vector<double> block_objective(blocks, 0.0);
    for (int k = 1; k <= config.max_iters; ++k) {
        parallel_for(blocks, threads, [&](std::size_t j) {
            st.z[j] = z_update(st.theta[j], g, config.beta, config.lambda);
            const auto r = gradient_step(st.theta[j], st.z[j], y[j], op, g, config.lambda, gamma);
            auto theta = soft_threshold(r, tau);
            if (config.apply_correction) theta = denoise_correct(theta, st.theta[j], op, denoiser);
            st.theta[j] = std::move(theta);
        });

        if (config.deblocker == DeblockerKind::BoundarySmooth) {
            synthesize_all();
            const Image smoothed = smooth_block_boundaries(assemble_padded(spatial, grid), layout.block_size);
            parallel_for(blocks, threads, [&](std::size_t j) {
                const std::size_t r0 = (j / grid.block_cols) * layout.block_size;
                const std::size_t c0 = (j % grid.block_cols) * layout.block_size;
                Plane block(layout.block_size);
                for (std::size_t r = 0; r < layout.block_size; ++r) {
                    for (std::size_t c = 0; c < layout.block_size; ++c) block.at(r, c) = smoothed(r0 + r, c0 + c);
                }
                dwt_flat(block.values, layout, st.theta[j]);
            });
        }

        parallel_for(blocks, threads, [&](std::size_t j) {
            block_objective[j] = all_finite(st.theta[j])
                                     ? objective(st.theta[j], st.z[j], y[j], problem, config.beta, config.lambda)
                                     : std::numeric_limits<double>::quiet_NaN();
        });
        double total = 0.0;
        for (double f : block_objective) total += f;
        if (!std::isfinite(total)) throw DivergenceError(k);

        st.iter = k;
        st.objective_trace.push_back(total);
        if (ground_truth != nullptr) {
            synthesize_all();
            result.psnr_trace.push_back(psnr(*ground_truth, assemble_blocks(spatial, grid.rows, grid.cols)));
        }
        if (k >= 2) {
            const double prev = st.objective_trace[st.objective_trace.size() - 2];
            if (std::abs(total - prev) <= config.rel_tol * std::abs(prev) + abs_floor) {
                result.converged = true;
                break;
            }
        }
    }

    if (config.max_iters == 0) {
        result.image = result.initial;
    } else {
        synthesize_all();
        result.image = assemble_blocks(spatial, grid.rows, grid.cols);
    }
    return result;
}

}  // namespace wcs
