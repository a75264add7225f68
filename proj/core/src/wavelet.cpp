#include "wcs/wavelet.hpp"

#include <algorithm>

#include "wcs/errors.hpp"

namespace wcs {

namespace {

constexpr const char* kOrientationNames[] = {"LL", "HL", "LH", "HH"};

void check_square(std::span<const double> values, std::size_t side, const char* what) {
    if (values.size() != side * side) {
        throw DimensionError(std::string(what) + ": expected " + std::to_string(side * side) +
                             " values, got " + std::to_string(values.size()));
    }
}

// Analysis of one level from a side x side buffer into four quarter buffers.
void analyze(const double* src, std::size_t side, double* ll, double* hl, double* lh, double* hh) {
    const std::size_t half = side / 2;
    for (std::size_t r = 0; r < half; ++r) {
        const double* top = src + (2 * r) * side;
        const double* bottom = top + side;
        for (std::size_t c = 0; c < half; ++c) {
            const double a = top[2 * c];
            const double b = top[2 * c + 1];
            const double cc = bottom[2 * c];
            const double d = bottom[2 * c + 1];
            const std::size_t k = r * half + c;
            ll[k] = 0.5 * (a + b + cc + d);
            hl[k] = 0.5 * (a - b + cc - d);
            lh[k] = 0.5 * (a + b - cc - d);
            hh[k] = 0.5 * (a - b - cc + d);
        }
    }
}

void synthesize(const double* ll, const double* hl, const double* lh, const double* hh,
                std::size_t side, double* dst) {
    const std::size_t half = side / 2;
    for (std::size_t r = 0; r < half; ++r) {
        double* top = dst + (2 * r) * side;
        double* bottom = top + side;
        for (std::size_t c = 0; c < half; ++c) {
            const std::size_t k = r * half + c;
            const double s = ll[k], h = hl[k], v = lh[k], d = hh[k];
            top[2 * c] = 0.5 * (s + h + v + d);
            top[2 * c + 1] = 0.5 * (s - h + v - d);
            bottom[2 * c] = 0.5 * (s + h - v - d);
            bottom[2 * c + 1] = 0.5 * (s - h - v + d);
        }
    }
}

}  // namespace

std::string to_string(SubbandId id) {
    return kOrientationNames[static_cast<int>(id.orientation)] + std::to_string(id.level);
}

std::vector<SubbandId> canonical_subbands(int levels) {
    std::vector<SubbandId> ids;
    ids.reserve(3 * static_cast<std::size_t>(levels) + 1);
    ids.push_back({levels, Orientation::LL});
    for (int i = levels; i >= 1; --i) {
        ids.push_back({i, Orientation::HL});
        ids.push_back({i, Orientation::LH});
        ids.push_back({i, Orientation::HH});
    }
    return ids;
}

std::size_t subband_index(SubbandId id, int levels) {
    if (id.level < 1 || id.level > levels) throw ArgumentError("subband level out of range: " + to_string(id));
    if (id.orientation == Orientation::LL) {
        if (id.level != levels) throw ArgumentError("LL exists only at the coarsest level: " + to_string(id));
        return 0;
    }
    return 1 + 3 * static_cast<std::size_t>(levels - id.level) + (static_cast<std::size_t>(id.orientation) - 1);
}

std::size_t SubbandLayout::subband_of(std::size_t j) const {
    auto it = std::upper_bound(offsets.begin(), offsets.end(), j);
    return static_cast<std::size_t>(it - offsets.begin()) - 1;
}

SubbandLayout make_layout(std::size_t block_size, int levels) {
    if (levels < 1) throw DimensionError("levels must be >= 1");
    if (levels >= 63 || block_size == 0 || block_size % (std::size_t{1} << levels) != 0) {
        throw DimensionError("block size " + std::to_string(block_size) + " not divisible by 2^" +
                             std::to_string(levels));
    }
    SubbandLayout layout;
    layout.block_size = block_size;
    layout.levels = levels;
    layout.ids = canonical_subbands(levels);
    std::size_t offset = 0;
    for (const auto& id : layout.ids) {
        const std::size_t side = block_size >> id.level;
        layout.sides.push_back(side);
        layout.offsets.push_back(offset);
        offset += side * side;
    }
    layout.total = offset;
    return layout;
}

HaarQuad dwt_single_level(const Plane& plane) {
    check_square(plane.values, plane.side, "dwt_single_level");
    if (plane.side == 0 || plane.side % 2 != 0) {
        throw DimensionError("dwt_single_level: side must be even and >= 2, got " + std::to_string(plane.side));
    }
    const std::size_t half = plane.side / 2;
    HaarQuad q{Plane(half), Plane(half), Plane(half), Plane(half)};
    analyze(plane.values.data(), plane.side, q.ll.values.data(), q.hl.values.data(), q.lh.values.data(),
            q.hh.values.data());
    return q;
}

Plane idwt_single_level(const HaarQuad& quad) {
    const std::size_t half = quad.ll.side;
    for (const Plane* p : {&quad.ll, &quad.hl, &quad.lh, &quad.hh}) {
        if (p->side != half) throw DimensionError("idwt_single_level: quarter planes differ in size");
        check_square(p->values, p->side, "idwt_single_level");
    }
    if (half == 0) throw DimensionError("idwt_single_level: empty planes");
    Plane out(2 * half);
    synthesize(quad.ll.values.data(), quad.hl.values.data(), quad.lh.values.data(), quad.hh.values.data(),
               2 * half, out.values.data());
    return out;
}

void dwt_flat(std::span<const double> block, const SubbandLayout& layout, std::span<double> coeffs) {
    const std::size_t n = layout.block_size;
    check_square(block, n, "dwt_flat");
    if (coeffs.size() != layout.total) throw DimensionError("dwt_flat: coefficient buffer has wrong length");

    std::vector<double> current(block.begin(), block.end());
    std::vector<double> next;
    std::size_t side = n;
    for (int level = 1; level <= layout.levels; ++level) {
        const std::size_t half = side / 2;
        next.assign(half * half, 0.0);
        const std::size_t hl = layout.offsets[subband_index({level, Orientation::HL}, layout.levels)];
        analyze(current.data(), side, next.data(), coeffs.data() + hl, coeffs.data() + hl + half * half,
                coeffs.data() + hl + 2 * half * half);
        current.swap(next);
        side = half;
    }
    std::copy(current.begin(), current.end(), coeffs.begin());
}

void idwt_flat(std::span<const double> coeffs, const SubbandLayout& layout, std::span<double> block) {
    const std::size_t n = layout.block_size;
    if (coeffs.size() != layout.total) throw DimensionError("idwt_flat: coefficient vector has wrong length");
    if (block.size() != n * n) throw DimensionError("idwt_flat: block buffer has wrong length");

    std::size_t side = n >> layout.levels;
    std::vector<double> current(coeffs.begin(), coeffs.begin() + static_cast<std::ptrdiff_t>(side * side));
    std::vector<double> next;
    for (int level = layout.levels; level >= 1; --level) {
        const std::size_t hl = layout.offsets[subband_index({level, Orientation::HL}, layout.levels)];
        const std::size_t q = side * side;
        next.assign(4 * q, 0.0);
        synthesize(current.data(), coeffs.data() + hl, coeffs.data() + hl + q, coeffs.data() + hl + 2 * q,
                   2 * side, next.data());
        current.swap(next);
        side *= 2;
    }
    std::copy(current.begin(), current.end(), block.begin());
}

SubbandPyramid dwt_multilevel(const Plane& block, int levels) {
    check_square(block.values, block.side, "dwt_multilevel");
    const SubbandLayout layout = make_layout(block.side, levels);
    std::vector<double> coeffs(layout.total);
    dwt_flat(block.values, layout, coeffs);
    return unflatten(coeffs, block.side, levels);
}

Plane idwt_multilevel(const SubbandPyramid& pyramid) {
    const SubbandLayout layout = make_layout(pyramid.block_size, pyramid.levels);
    if (pyramid.planes.size() != layout.count()) {
        throw DimensionError("idwt_multilevel: expected " + std::to_string(layout.count()) + " planes");
    }
    const std::vector<double> coeffs = flatten(pyramid);
    Plane out(pyramid.block_size);
    idwt_flat(coeffs, layout, out.values);
    return out;
}

std::vector<double> flatten(const SubbandPyramid& pyramid) {
    const SubbandLayout layout = make_layout(pyramid.block_size, pyramid.levels);
    if (pyramid.planes.size() != layout.count()) throw DimensionError("flatten: wrong plane count");
    std::vector<double> out;
    out.reserve(layout.total);
    for (std::size_t s = 0; s < layout.count(); ++s) {
        const Plane& p = pyramid.planes[s];
        if (p.side != layout.sides[s] || p.values.size() != layout.length(s)) {
            throw DimensionError("flatten: plane " + to_string(layout.ids[s]) + " has side " +
                                 std::to_string(p.side) + ", expected " + std::to_string(layout.sides[s]));
        }
        out.insert(out.end(), p.values.begin(), p.values.end());
    }
    return out;
}

SubbandPyramid unflatten(std::span<const double> coeffs, std::size_t block_size, int levels) {
    const SubbandLayout layout = make_layout(block_size, levels);
    if (coeffs.size() != layout.total) {
        throw DimensionError("unflatten: expected " + std::to_string(layout.total) + " coefficients, got " +
                             std::to_string(coeffs.size()));
    }
    SubbandPyramid pyr;
    pyr.block_size = block_size;
    pyr.levels = levels;
    pyr.planes.reserve(layout.count());
    for (std::size_t s = 0; s < layout.count(); ++s) {
        Plane p(layout.sides[s]);
        auto first = coeffs.begin() + static_cast<std::ptrdiff_t>(layout.offsets[s]);
        std::copy(first, first + static_cast<std::ptrdiff_t>(layout.length(s)), p.values.begin());
        pyr.planes.push_back(std::move(p));
    }
    return pyr;
}

TreeGroups build_tree_groups(std::size_t block_size, int levels) {
    const SubbandLayout layout = make_layout(block_size, levels);
    TreeGroups tg;
    tg.hf_offset = layout.ll_length();
    tg.hf_length = layout.total - tg.hf_offset;

    for (Orientation o : {Orientation::HL, Orientation::LH, Orientation::HH}) {
        for (int level = levels; level >= 2; --level) {
            const std::size_t ps = subband_index({level, o}, levels);
            const std::size_t cs = subband_index({level - 1, o}, levels);
            const std::size_t pside = layout.sides[ps];
            const std::size_t cside = layout.sides[cs];
            const std::size_t pbase = layout.offsets[ps] - tg.hf_offset;
            const std::size_t cbase = layout.offsets[cs] - tg.hf_offset;
            for (std::size_t p = 0; p < pside; ++p) {
                for (std::size_t q = 0; q < pside; ++q) {
                    TreeGroups::Group g{
                        pbase + p * pside + q,
                        cbase + (2 * p) * cside + 2 * q,
                        cbase + (2 * p) * cside + 2 * q + 1,
                        cbase + (2 * p + 1) * cside + 2 * q,
                        cbase + (2 * p + 1) * cside + 2 * q + 1,
                    };
                    tg.groups.push_back(g);
                    tg.parent_level.push_back(level);
                }
            }
        }
    }
    return tg;
}

}  // namespace wcs
