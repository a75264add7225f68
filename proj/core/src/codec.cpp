#include "wcs/codec.hpp"

#include <algorithm>
#include <bit>
#include <cctype>
#include <cmath>
#include <fstream>
#include <iterator>
#include <string>

#include "wcs/errors.hpp"

namespace wcs {

namespace {

using Kind = FormatError::Kind;

class Writer {
public:
    explicit Writer(Bytes& out) : out_(out) {}

    template <class T>
    void put(T value) {
        static_assert(std::is_unsigned_v<T>);
        for (std::size_t b = 0; b < sizeof(T); ++b) out_.push_back(static_cast<std::uint8_t>(value >> (8 * b)));
    }
    void put_f32(float v) { put(std::bit_cast<std::uint32_t>(v)); }

private:
    Bytes& out_;
};

class Reader {
public:
    explicit Reader(std::span<const std::uint8_t> in) : in_(in) {}

    template <class T>
    T get(const char* field) {
        if (in_.size() - pos_ < sizeof(T)) {
            throw FormatError(Kind::BadHeader, pos_, std::string("truncated header while reading ") + field);
        }
        T value = 0;
        for (std::size_t b = 0; b < sizeof(T); ++b) value |= static_cast<T>(static_cast<T>(in_[pos_ + b]) << (8 * b));
        pos_ += sizeof(T);
        return value;
    }

    std::size_t pos() const noexcept { return pos_; }
    std::size_t remaining() const noexcept { return in_.size() - pos_; }
    std::span<const std::uint8_t> rest() const { return in_.subspan(pos_); }

private:
    std::span<const std::uint8_t> in_;
    std::size_t pos_ = 0;
};

// PGM header token: skips whitespace and '#' comments.
std::string next_token(std::span<const std::uint8_t> bytes, std::size_t& pos) {
    while (pos < bytes.size()) {
        if (bytes[pos] == '#') {
            while (pos < bytes.size() && bytes[pos] != '\n' && bytes[pos] != '\r') ++pos;
        } else if (std::isspace(bytes[pos])) {
            ++pos;
        } else {
            break;
        }
    }
    std::string tok;
    while (pos < bytes.size() && !std::isspace(bytes[pos]) && bytes[pos] != '#') tok.push_back(static_cast<char>(bytes[pos++]));
    return tok;
}

std::size_t parse_dim(const std::string& tok, std::size_t offset, const char* what) {
    if (tok.empty() || tok.find_first_not_of("0123456789") != std::string::npos || tok.size() > 9) {
        throw FormatError(Kind::BadHeader, offset, std::string("invalid PGM ") + what + " '" + tok + "'");
    }
    return std::stoul(tok);
}

}  // namespace

Image decode_pgm(std::span<const std::uint8_t> bytes) {
    if (bytes.size() < 2 || bytes[0] != 'P' || bytes[1] != '5') {
        throw FormatError(Kind::BadMagic, 0, "not a binary PGM (expected magic P5)");
    }
    std::size_t pos = 2;
    std::size_t at = pos;
    const std::size_t cols = parse_dim(next_token(bytes, pos), at, "width");
    at = pos;
    const std::size_t rows = parse_dim(next_token(bytes, pos), at, "height");
    at = pos;
    const std::size_t maxval = parse_dim(next_token(bytes, pos), at, "maxval");
    if (maxval != 255) throw FormatError(Kind::UnsupportedMaxval, at, "PGM maxval must be 255, got " + std::to_string(maxval));
    if (rows == 0 || cols == 0) throw FormatError(Kind::BadHeader, at, "PGM has zero size");
    if (pos >= bytes.size() || !std::isspace(bytes[pos])) {
        throw FormatError(Kind::BadHeader, pos, "missing whitespace after PGM maxval");
    }
    ++pos;
    const std::size_t need = rows * cols;
    if (bytes.size() - pos < need) {
        throw FormatError(Kind::ShortPayload, bytes.size(),
                          "PGM payload truncated: need " + std::to_string(need) + " bytes, have " +
                              std::to_string(bytes.size() - pos));
    }
    Image img(rows, cols);
    for (std::size_t i = 0; i < need; ++i) img.data()[i] = static_cast<double>(bytes[pos + i]) / 255.0;
    return img;
}

Bytes encode_pgm(const Image& image) {
    if (image.empty()) throw ArgumentError("cannot write an empty image");
    const std::string header = "P5\n" + std::to_string(image.cols()) + " " + std::to_string(image.rows()) + "\n255\n";
    Bytes out(header.begin(), header.end());
    out.reserve(out.size() + image.size());
    for (double v : image.data()) {
        const double scaled = std::round(v * 255.0);  // half away from zero
        out.push_back(static_cast<std::uint8_t>(std::clamp(std::isnan(scaled) ? 0.0 : scaled, 0.0, 255.0)));
    }
    return out;
}

Bytes read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open " + path.string());
    return Bytes(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

void write_file(const std::filesystem::path& path, std::span<const std::uint8_t> bytes) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw std::runtime_error("write failed for " + path.string());
}

Image read_image(const std::filesystem::path& path) { return decode_pgm(read_file(path)); }

void write_image(const Image& image, const std::filesystem::path& path) { write_file(path, encode_pgm(image)); }

std::size_t bitstream_header_size(int levels) {
    return 4 + 2 + 4 + 4 + 2 + 1 + 4 + 4 + 8 + 1 + 4 * (3 * static_cast<std::size_t>(levels) + 1) + 1;
}

Bytes encode(const MeasurementSet& ms, bool rows_orthonormalized) {
    const MeasurementPlan& plan = ms.plan;
    validate_plan(plan);
    if (ms.rows > UINT32_MAX || ms.cols > UINT32_MAX || plan.block_size > UINT16_MAX || plan.levels > 255) {
        throw ArgumentError("encode: dimensions exceed the WCS1 field widths");
    }
    const BlockGrid grid = ms.grid();
    if (ms.blocks.size() != grid.count()) throw InternalError("encode: block count does not match image size");

    Bytes out;
    out.reserve(bitstream_header_size(plan.levels) + grid.count() * plan.total * 4);
    Writer w(out);
    for (char c : {'W', 'C', 'S', '1'}) out.push_back(static_cast<std::uint8_t>(c));
    w.put(kBitstreamVersion);
    w.put(static_cast<std::uint32_t>(ms.rows));
    w.put(static_cast<std::uint32_t>(ms.cols));
    w.put(static_cast<std::uint16_t>(plan.block_size));
    w.put(static_cast<std::uint8_t>(plan.levels));
    w.put(plan.rate.num);
    w.put(plan.rate.den);
    w.put(plan.operator_seed);
    w.put(static_cast<std::uint8_t>(plan.counts.size()));
    for (std::uint32_t m : plan.counts) w.put(m);
    std::uint8_t flags = 0;
    if (rows_orthonormalized) flags |= 0x01;
    if (plan.degenerate_fallback) flags |= 0x02;
    w.put(flags);

    for (const auto& block : ms.blocks) {
        if (block.size() != plan.total) throw InternalError("encode: measurement vector length mismatch");
        for (float v : block) w.put_f32(v);
    }
    return out;
}

MeasurementSet decode(std::span<const std::uint8_t> bytes) {
    if (bytes.size() < 4 || !std::equal(bytes.begin(), bytes.begin() + 4, "WCS1")) {
        throw FormatError(Kind::BadMagic, 0, "bad magic (expected WCS1)");
    }
    Reader r(bytes.subspan(4));
    const auto at = [&] { return 4 + r.pos(); };

    std::size_t field = at();
    const auto version = r.get<std::uint16_t>("version");
    if (version != kBitstreamVersion) {
        throw FormatError(Kind::BadVersion, field, "unsupported WCS version " + std::to_string(version));
    }
    MeasurementSet ms;
    ms.rows = r.get<std::uint32_t>("height");
    ms.cols = r.get<std::uint32_t>("width");
    field = at();
    ms.plan.block_size = r.get<std::uint16_t>("block size");
    ms.plan.levels = r.get<std::uint8_t>("levels");
    ms.plan.rate.num = r.get<std::uint32_t>("rate numerator");
    ms.plan.rate.den = r.get<std::uint32_t>("rate denominator");
    ms.plan.operator_seed = r.get<std::uint64_t>("seed");
    const std::size_t count_at = at();
    const auto count = r.get<std::uint8_t>("subband count");

    if (ms.rows == 0 || ms.cols == 0) throw FormatError(Kind::BadHeader, 6, "zero image dimension");
    if (ms.plan.levels < 1 || ms.plan.block_size == 0 || (ms.plan.block_size & (ms.plan.block_size - 1)) != 0 ||
        ms.plan.block_size % (std::size_t{1} << ms.plan.levels) != 0) {
        throw FormatError(Kind::BadHeader, field, "invalid block size / levels combination");
    }
    if (ms.plan.rate.den == 0 || ms.plan.rate.num == 0 || ms.plan.rate.num > ms.plan.rate.den) {
        throw FormatError(Kind::BadHeader, field + 3, "rate outside (0, 1]");
    }
    if (count != 3 * ms.plan.levels + 1) {
        throw FormatError(Kind::BadHeader, count_at, "subband count " + std::to_string(count) + " != 3l+1");
    }
    const SubbandLayout layout = make_layout(ms.plan.block_size, ms.plan.levels);
    const std::size_t counts_at = at();
    std::uint64_t sum = 0;
    for (std::size_t s = 0; s < count; ++s) {
        const auto m = r.get<std::uint32_t>("subband count");
        if (m > layout.length(s)) {
            throw FormatError(Kind::BudgetMismatch, counts_at + 4 * s,
                              "subband " + to_string(layout.ids[s]) + " count exceeds its size");
        }
        ms.plan.counts.push_back(m);
        sum += m;
    }
    ms.plan.total = ms.plan.rate.measurements_for(layout.total);
    if (sum != ms.plan.total) {
        throw FormatError(Kind::BudgetMismatch, counts_at,
                          "subband counts sum to " + std::to_string(sum) + ", rate requires " +
                              std::to_string(ms.plan.total));
    }
    const auto flags = r.get<std::uint8_t>("flags");
    ms.plan.degenerate_fallback = (flags & 0x02) != 0;

    const BlockGrid grid = ms.grid();
    const std::size_t need = grid.count() * ms.plan.total * 4;
    if (r.remaining() < need) {
        throw FormatError(Kind::ShortPayload, bytes.size(),
                          "payload truncated: need " + std::to_string(need) + " bytes, have " +
                              std::to_string(r.remaining()));
    }
    if (r.remaining() > need) {
        throw FormatError(Kind::TrailingData, at() + need, "unexpected bytes after payload");
    }
    const auto payload = r.rest();
    ms.blocks.assign(grid.count(), std::vector<float>(ms.plan.total));
    std::size_t k = 0;
    for (auto& block : ms.blocks) {
        for (float& v : block) {
            std::uint32_t bits = 0;
            for (int b = 0; b < 4; ++b) bits |= static_cast<std::uint32_t>(payload[k + b]) << (8 * b);
            v = std::bit_cast<float>(bits);
            k += 4;
        }
    }
    return ms;
}

}  // namespace wcs
