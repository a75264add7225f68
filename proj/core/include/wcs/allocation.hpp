#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "wcs/wavelet.hpp"

namespace wcs {

/// Sampling rate as an exact rational num/den, 0 < num <= den.
struct Rate {
    std::uint32_t num = 1;
    std::uint32_t den = 1;

    double value() const noexcept { return static_cast<double>(num) / static_cast<double>(den); }
    /// round(rate * coefficient_count), half rounded up, computed in integers.
    std::uint64_t measurements_for(std::uint64_t coefficient_count) const;

    /// Parses "0.25", "1", "1/4". Throws ArgumentError outside (0, 1].
    static Rate parse(const std::string& text);
    /// Nearest rational with denominator 10^6, reduced.
    static Rate from_double(double r);

    friend bool operator==(const Rate&, const Rate&) = default;
};

struct SubbandStat {
    double mu = 0.0;     // mean of |theta|
    double sigma = 0.0;  // population std-dev of |theta|
};

/// Per-subband statistics in canonical order.
struct SubbandStats {
    std::size_t block_size = 0;
    int levels = 0;
    std::vector<SubbandStat> per_subband;
};

/// Pools |coefficient| statistics per subband over every block of an image.
/// All pyramids must share (block_size, levels). Throws ArgumentError on an empty list.
SubbandStats subband_stats(std::span<const SubbandPyramid> pyramids);

struct AllocationConfig {
    double eta = 0.5;
    double cap_fraction = 1.0;
    std::vector<std::int64_t> bias;  // empty means all zero; otherwise one per subband, summing to 0
    std::int64_t min_per_subband = 0;

    void validate(std::size_t subband_count) const;
};

struct MeasurementPlan {
    std::size_t block_size = 0;
    int levels = 0;
    Rate rate;
    std::uint64_t total = 0;
    std::vector<std::uint32_t> counts;  // canonical order
    std::uint64_t operator_seed = 0;

    // metadata
    bool degenerate_fallback = false;  // weights were all zero; sizes used instead
    bool ll_cap_relaxed = false;       // LL cap raised to n_LL^2 to keep the budget feasible

    friend bool operator==(const MeasurementPlan&, const MeasurementPlan&) = default;
};

/// Checks budget and per-subband capacity. Throws InfeasiblePlanError.
void validate_plan(const MeasurementPlan& plan);

/// Allocation weight W_s = eta * sigma_s + (1 - eta) * mu_s.
double allocation_weight(const SubbandStat& stat, double eta);

/// Adaptive per-subband measurement allocation:
///  1. W_s = eta*sigma + (1-eta)*mu
///  2. M_LL = round(W_LL / sum W * M)
///  3. cap M_LL at Theta = min(floor(c * n_LL^2), n_LL^2); surplus joins the high-frequency pool
///  4. split the pool over detail subbands in proportion to mu (largest remainder)
///  5. add bias
///  6. clamp to [0, n_s^2] and redistribute the residue by largest remainder
/// Ties resolve in canonical subband order.
MeasurementPlan allocate_measurements(const SubbandStats& stats, std::size_t block_size, int levels, Rate rate,
                                      const AllocationConfig& config, std::uint64_t operator_seed = 0);

/// Integer apportionment of `total` in proportion to `weights` (Hamilton's method).
/// Ties resolve toward lower index. Weights must be non-negative with a positive sum.
std::vector<std::int64_t> largest_remainder(std::int64_t total, std::span<const double> weights);

}  // namespace wcs
