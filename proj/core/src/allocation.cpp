#include "wcs/allocation.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <numeric>

#include "wcs/errors.hpp"

namespace wcs {

namespace {

Rate reduced(std::uint64_t num, std::uint64_t den) {
    if (den == 0 || num == 0 || num > den) {
        throw ArgumentError("rate must lie in (0, 1], got " + std::to_string(num) + "/" + std::to_string(den));
    }
    const std::uint64_t g = std::gcd(num, den);
    num /= g;
    den /= g;
    if (den > UINT32_MAX) throw ArgumentError("rate denominator too large");
    return Rate{static_cast<std::uint32_t>(num), static_cast<std::uint32_t>(den)};
}

std::uint64_t parse_uint(std::string_view s) {
    std::uint64_t v = 0;
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc{} || ptr != s.data() + s.size() || s.empty()) {
        throw ArgumentError("malformed rate component '" + std::string(s) + "'");
    }
    return v;
}

// Distributes `delta` units (positive: add, negative: remove) over entries in
// proportion to their available room, never exceeding that room.
void spread_residue(std::vector<std::int64_t>& counts, const std::vector<std::int64_t>& lo,
                    const std::vector<std::int64_t>& hi, std::int64_t delta) {
    if (delta == 0) return;
    std::vector<double> room(counts.size());
    for (std::size_t s = 0; s < counts.size(); ++s) {
        room[s] = static_cast<double>(delta > 0 ? hi[s] - counts[s] : counts[s] - lo[s]);
    }
    const auto share = largest_remainder(std::abs(delta), room);
    for (std::size_t s = 0; s < counts.size(); ++s) counts[s] += delta > 0 ? share[s] : -share[s];
}

}  // namespace

std::uint64_t Rate::measurements_for(std::uint64_t coefficient_count) const {
    if (coefficient_count > UINT32_MAX) throw ArgumentError("coefficient count too large");
    // round-half-up of num * count / den; the product fits in 64 bits
    const std::uint64_t scaled = static_cast<std::uint64_t>(num) * coefficient_count;
    const std::uint64_t q = scaled / den;
    const std::uint64_t rem = scaled % den;
    return q + (2 * rem >= den ? 1 : 0);
}

Rate Rate::parse(const std::string& text) {
    const auto slash = text.find('/');
    if (slash != std::string::npos) {
        return reduced(parse_uint(std::string_view(text).substr(0, slash)),
                       parse_uint(std::string_view(text).substr(slash + 1)));
    }
    const auto dot = text.find('.');
    const bool plain_decimal = !text.empty() && text.find_first_not_of("0123456789.") == std::string::npos &&
                               std::count(text.begin(), text.end(), '.') <= 1;
    if (plain_decimal) {
        const std::string whole = text.substr(0, dot);
        std::string frac = dot == std::string::npos ? "" : text.substr(dot + 1);
        while (!frac.empty() && frac.back() == '0') frac.pop_back();
        if (frac.size() > 9) return from_double(std::stod(text));
        std::uint64_t den = 1;
        for (std::size_t i = 0; i < frac.size(); ++i) den *= 10;
        const std::uint64_t w = whole.empty() ? 0 : parse_uint(whole);
        const std::uint64_t f = frac.empty() ? 0 : parse_uint(frac);
        return reduced(w * den + f, den);
    }
    double value = 0.0;
    std::size_t used = 0;
    try {
        value = std::stod(text, &used);
    } catch (const std::exception&) {
        throw ArgumentError("malformed rate '" + text + "'");
    }
    if (used != text.size()) throw ArgumentError("malformed rate '" + text + "'");
    return from_double(value);
}

Rate Rate::from_double(double r) {
    if (!(r > 0.0) || r > 1.0) throw ArgumentError("rate must lie in (0, 1], got " + std::to_string(r));
    constexpr std::uint64_t kDen = 1'000'000;
    const auto num = static_cast<std::uint64_t>(std::llround(r * kDen));
    return reduced(std::max<std::uint64_t>(num, 1), kDen);
}

SubbandStats subband_stats(std::span<const SubbandPyramid> pyramids) {
    if (pyramids.empty()) throw ArgumentError("subband_stats: no pyramids supplied");
    const std::size_t n = pyramids.front().block_size;
    const int l = pyramids.front().levels;
    const SubbandLayout layout = make_layout(n, l);

    std::vector<double> sum(layout.count(), 0.0), sum_sq(layout.count(), 0.0);
    for (const auto& pyr : pyramids) {
        if (pyr.block_size != n || pyr.levels != l || pyr.planes.size() != layout.count()) {
            throw ArgumentError("subband_stats: pyramids differ in block size or levels");
        }
        for (std::size_t s = 0; s < layout.count(); ++s) {
            for (double v : pyr.planes[s].values) {
                const double a = std::abs(v);
                sum[s] += a;
                sum_sq[s] += a * a;
            }
        }
    }

    SubbandStats stats{n, l, std::vector<SubbandStat>(layout.count())};
    for (std::size_t s = 0; s < layout.count(); ++s) {
        const double count = static_cast<double>(layout.length(s) * pyramids.size());
        const double mean = sum[s] / count;
        const double var = std::max(0.0, sum_sq[s] / count - mean * mean);
        stats.per_subband[s] = {mean, std::sqrt(var)};
    }
    return stats;
}

void AllocationConfig::validate(std::size_t subband_count) const {
    if (!(eta >= 0.0 && eta <= 1.0)) throw ArgumentError("eta must lie in [0, 1]");
    if (!(cap_fraction > 0.0 && cap_fraction <= 1.0)) throw ArgumentError("cap_fraction must lie in (0, 1]");
    if (min_per_subband < 0) throw ArgumentError("min_per_subband must be >= 0");
    if (!bias.empty()) {
        if (bias.size() != subband_count) {
            throw ArgumentError("bias needs " + std::to_string(subband_count) + " entries, got " +
                                std::to_string(bias.size()));
        }
        if (std::accumulate(bias.begin(), bias.end(), std::int64_t{0}) != 0) {
            throw ArgumentError("bias terms must sum to zero");
        }
    }
}

void validate_plan(const MeasurementPlan& plan) {
    const SubbandLayout layout = make_layout(plan.block_size, plan.levels);
    if (plan.counts.size() != layout.count()) {
        throw InfeasiblePlanError("plan has " + std::to_string(plan.counts.size()) + " subband counts, expected " +
                                  std::to_string(layout.count()));
    }
    std::uint64_t sum = 0;
    for (std::size_t s = 0; s < layout.count(); ++s) {
        if (plan.counts[s] > layout.length(s)) {
            throw InfeasiblePlanError("subband " + to_string(layout.ids[s]) + " requests " +
                                      std::to_string(plan.counts[s]) + " measurements but has only " +
                                      std::to_string(layout.length(s)) + " coefficients");
        }
        sum += plan.counts[s];
    }
    if (sum != plan.total || plan.total != plan.rate.measurements_for(layout.total)) {
        throw InfeasiblePlanError("plan budget mismatch: sum " + std::to_string(sum) + ", total " +
                                  std::to_string(plan.total));
    }
}

double allocation_weight(const SubbandStat& stat, double eta) {
    return eta * stat.sigma + (1.0 - eta) * stat.mu;
}

std::vector<std::int64_t> largest_remainder(std::int64_t total, std::span<const double> weights) {
    const double wsum = std::accumulate(weights.begin(), weights.end(), 0.0);
    if (!(wsum > 0.0)) throw ArgumentError("largest_remainder: weights must have a positive sum");

    std::vector<std::int64_t> out(weights.size(), 0);
    std::vector<double> frac(weights.size(), 0.0);
    std::int64_t assigned = 0;
    for (std::size_t i = 0; i < weights.size(); ++i) {
        const double quota = static_cast<double>(total) * (weights[i] / wsum);
        const double fl = std::floor(quota);
        out[i] = static_cast<std::int64_t>(fl);
        frac[i] = weights[i] > 0.0 ? quota - fl : -1.0;
        assigned += out[i];
    }

    std::vector<std::size_t> order(weights.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return frac[a] > frac[b]; });

    std::int64_t remaining = total - assigned;
    for (std::size_t k = 0; remaining > 0; k = (k + 1) % order.size()) {
        if (weights[order[k]] > 0.0) {
            ++out[order[k]];
            --remaining;
        }
    }
    // Rounding drift can overshoot by a unit; take it back from the smallest remainders.
    for (std::size_t k = order.size(); remaining < 0 && k-- > 0;) {
        if (out[order[k]] > 0) {
            --out[order[k]];
            ++remaining;
        }
    }
    return out;
}

MeasurementPlan allocate_measurements(const SubbandStats& stats, std::size_t block_size, int levels, Rate rate,
                                      const AllocationConfig& config, std::uint64_t operator_seed) {
    const SubbandLayout layout = make_layout(block_size, levels);
    const std::size_t count = layout.count();
    if (stats.per_subband.size() != count) {
        throw ArgumentError("allocate_measurements: stats cover " + std::to_string(stats.per_subband.size()) +
                            " subbands, expected " + std::to_string(count));
    }
    if (rate.num == 0 || rate.den == 0 || rate.num > rate.den) throw ArgumentError("rate must lie in (0, 1]");
    config.validate(count);
    for (const auto& st : stats.per_subband) {
        if (!std::isfinite(st.mu) || !std::isfinite(st.sigma) || st.mu < 0.0 || st.sigma < 0.0) {
            throw ArgumentError("subband statistics must be finite and non-negative");
        }
    }

    MeasurementPlan plan;
    plan.block_size = block_size;
    plan.levels = levels;
    plan.rate = rate;
    plan.total = rate.measurements_for(layout.total);
    plan.operator_seed = operator_seed;
    const auto budget = static_cast<std::int64_t>(plan.total);

    std::vector<double> weight(count);
    for (std::size_t s = 0; s < count; ++s) weight[s] = allocation_weight(stats.per_subband[s], config.eta);
    const double wsum = std::accumulate(weight.begin(), weight.end(), 0.0);

    std::vector<std::int64_t> counts(count, 0);
    std::vector<double> sizes(count);
    for (std::size_t s = 0; s < count; ++s) sizes[s] = static_cast<double>(layout.length(s));

    const auto ll_size = static_cast<std::int64_t>(layout.ll_length());
    std::int64_t theta =
        std::min<std::int64_t>(static_cast<std::int64_t>(std::floor(config.cap_fraction * ll_size)), ll_size);

    if (!(wsum > 0.0)) {
        plan.degenerate_fallback = true;
        counts = largest_remainder(budget, sizes);
    } else {
        const double p_ll = weight[0] / wsum;
        std::int64_t m_ll = std::llround(p_ll * static_cast<double>(budget));
        m_ll = std::min(m_ll, theta);
        counts[0] = m_ll;

        const std::int64_t pool = budget - m_ll;
        std::vector<double> hf_mu(count - 1);
        for (std::size_t s = 1; s < count; ++s) hf_mu[s - 1] = stats.per_subband[s].mu;
        std::vector<std::int64_t> hf;
        if (std::accumulate(hf_mu.begin(), hf_mu.end(), 0.0) > 0.0) {
            hf = largest_remainder(pool, hf_mu);
        } else {
            plan.degenerate_fallback = true;
            hf = largest_remainder(pool, std::span<const double>(sizes).subspan(1));
        }
        std::copy(hf.begin(), hf.end(), counts.begin() + 1);
    }

    if (!config.bias.empty()) {
        for (std::size_t s = 0; s < count; ++s) counts[s] += config.bias[s];
    }

    std::vector<std::int64_t> lo(count), hi(count);
    for (std::size_t s = 0; s < count; ++s) {
        hi[s] = static_cast<std::int64_t>(layout.length(s));
        lo[s] = std::min(config.min_per_subband, hi[s]);
    }
    hi[0] = std::max(theta, lo[0]);
    const auto capacity = [&] { return std::accumulate(hi.begin(), hi.end(), std::int64_t{0}); };
    if (capacity() < budget) {
        hi[0] = ll_size;
        plan.ll_cap_relaxed = true;
    }
    if (std::accumulate(lo.begin(), lo.end(), std::int64_t{0}) > budget) {
        throw ArgumentError("min_per_subband cannot be met within the measurement budget");
    }

    for (std::size_t s = 0; s < count; ++s) counts[s] = std::clamp(counts[s], lo[s], hi[s]);
    spread_residue(counts, lo, hi, budget - std::accumulate(counts.begin(), counts.end(), std::int64_t{0}));

    plan.counts.resize(count);
    for (std::size_t s = 0; s < count; ++s) plan.counts[s] = static_cast<std::uint32_t>(counts[s]);
    validate_plan(plan);
    return plan;
}

}  // namespace wcs
