#pragma once

// Multilevel orthonormal 2-D Haar transform on square blocks, the canonical
// coefficient ordering shared by the sampler, solver and bitstream, and the
// parent-child tree groups over the detail coefficients.

#include <array>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace wcs {

enum class Orientation : std::uint8_t { LL = 0, HL = 1, LH = 2, HH = 3 };

struct SubbandId {
    int level = 1;
    Orientation orientation = Orientation::LL;

    friend bool operator==(const SubbandId&, const SubbandId&) = default;
};

/// "LL2", "HL1", ...
std::string to_string(SubbandId id);

/// Square real grid, row-major.
struct Plane {
    std::size_t side = 0;
    std::vector<double> values;

    Plane() = default;
    explicit Plane(std::size_t s, double fill = 0.0) : side(s), values(s * s, fill) {}

    double& at(std::size_t r, std::size_t c) { return values[r * side + c]; }
    double at(std::size_t r, std::size_t c) const { return values[r * side + c]; }

    friend bool operator==(const Plane&, const Plane&) = default;
};

/// Subbands in canonical order: LL_l, then HL_i, LH_i, HH_i for i = l down to 1.
std::vector<SubbandId> canonical_subbands(int levels);

/// Position of `id` in canonical order.
std::size_t subband_index(SubbandId id, int levels);

/// Offsets and sizes of every subband inside the flattened coefficient vector.
struct SubbandLayout {
    std::size_t block_size = 0;
    int levels = 0;
    std::vector<SubbandId> ids;
    std::vector<std::size_t> sides;
    std::vector<std::size_t> offsets;
    std::size_t total = 0;

    std::size_t count() const noexcept { return ids.size(); }
    std::size_t length(std::size_t s) const { return sides[s] * sides[s]; }
    /// Number of LL coefficients; the high-frequency part starts here.
    std::size_t ll_length() const { return length(0); }
    /// Canonical subband owning flattened index `j`.
    std::size_t subband_of(std::size_t j) const;
};

/// Throws DimensionError unless block_size is divisible by 2^levels and levels >= 1.
SubbandLayout make_layout(std::size_t block_size, int levels);

struct SubbandPyramid {
    std::size_t block_size = 0;
    int levels = 0;
    std::vector<Plane> planes;  // canonical order

    Plane& plane(SubbandId id) { return planes[subband_index(id, levels)]; }
    const Plane& plane(SubbandId id) const { return planes[subband_index(id, levels)]; }

    friend bool operator==(const SubbandPyramid&, const SubbandPyramid&) = default;
};

struct HaarQuad {
    Plane ll, hl, lh, hh;
};

/// One analysis level. For each 2x2 cell (a b / c d):
/// LL=(a+b+c+d)/2, HL=(a-b+c-d)/2, LH=(a+b-c-d)/2, HH=(a-b-c+d)/2.
HaarQuad dwt_single_level(const Plane& plane);

/// Exact inverse (and transpose) of dwt_single_level.
Plane idwt_single_level(const HaarQuad& quad);

SubbandPyramid dwt_multilevel(const Plane& block, int levels);
Plane idwt_multilevel(const SubbandPyramid& pyramid);

std::vector<double> flatten(const SubbandPyramid& pyramid);
SubbandPyramid unflatten(std::span<const double> coeffs, std::size_t block_size, int levels);

/// Flattened-vector forms used on the solver hot path.
void dwt_flat(std::span<const double> block, const SubbandLayout& layout, std::span<double> coeffs);
void idwt_flat(std::span<const double> coeffs, const SubbandLayout& layout, std::span<double> block);

/// Parent-child groups. Each group holds the parent first, then its four
/// children in row-major child order. Indices address the high-frequency
/// vector, i.e. the flattened coefficients with the LL prefix removed;
/// add `hf_offset` to address the full flattened vector.
struct TreeGroups {
    static constexpr std::size_t kGroupSize = 5;
    using Group = std::array<std::size_t, kGroupSize>;

    std::size_t hf_offset = 0;
    std::size_t hf_length = 0;
    std::vector<Group> groups;
    std::vector<int> parent_level;  // parallel to `groups`

    std::size_t size() const noexcept { return groups.size(); }
    bool empty() const noexcept { return groups.empty(); }
};

TreeGroups build_tree_groups(std::size_t block_size, int levels);

}  // namespace wcs
