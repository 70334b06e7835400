#include "fedsim/params.hpp"

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <numeric>

#include "fedsim/errors.hpp"

namespace fedsim {

namespace {

std::size_t shape_product(const std::vector<std::size_t>& shape) {
    std::size_t n = 1;
    for (std::size_t d : shape) n *= d;
    return n;
}

}  // namespace

std::size_t LayeredParams::total_size() const {
    std::size_t n = 0;
    for (const auto& b : blocks) n += b.size();
    return n;
}

std::size_t LayeredParams::shallow_size() const {
    std::size_t n = 0;
    for (std::size_t i = 0; i < split_index; ++i) n += blocks[i].size();
    return n;
}

std::size_t LayeredParams::deep_size() const {
    std::size_t n = 0;
    for (std::size_t i = split_index; i < blocks.size(); ++i) n += blocks[i].size();
    return n;
}

bool LayeredParams::same_structure(const LayeredParams& other) const {
    if (split_index != other.split_index || blocks.size() != other.blocks.size())
        return false;
    for (std::size_t i = 0; i < blocks.size(); ++i)
        if (blocks[i].shape != other.blocks[i].shape) return false;
    return true;
}

void LayeredParams::validate() const {
    if (blocks.empty()) throw ShapeError("LayeredParams: no blocks");
    if (split_index == 0 || split_index >= blocks.size())
        throw ShapeError("LayeredParams: split_index must leave both partitions non-empty");
    for (std::size_t i = 0; i < blocks.size(); ++i) {
        const auto& b = blocks[i];
        if (b.shape.empty())
            throw ShapeError("block " + std::to_string(i) + ": empty shape");
        for (std::size_t d : b.shape)
            if (d == 0)
                throw ShapeError("block " + std::to_string(i) + ": zero shape entry");
        if (b.values.size() != shape_product(b.shape))
            throw ShapeError("block " + std::to_string(i) +
                             ": value count does not match shape");
    }
}

PartitionSizes partition_sizes(const LayeredParams& p) {
    return {p.shallow_size(), p.deep_size()};
}

LayeredParams linear_combine(
    std::span<const std::pair<double, const LayeredParams*>> terms,
    Selector selector) {
    if (terms.empty())
        throw std::invalid_argument("linear_combine: empty term list");
    const LayeredParams& first = *terms.front().second;
    for (const auto& [c, p] : terms)
        if (!p->same_structure(first))
            throw ShapeError("linear_combine: block structure mismatch");

    std::size_t begin = 0, end = first.blocks.size();
    if (selector == Selector::Shallow) end = first.split_index;
    if (selector == Selector::Deep) begin = first.split_index;

    LayeredParams out = first;  // unselected partition comes from the first term
    for (std::size_t i = begin; i < end; ++i) {
        auto& dst = out.blocks[i].values;
        std::fill(dst.begin(), dst.end(), 0.0);
        for (const auto& [coeff, p] : terms) {
            const auto& src = p->blocks[i].values;
            for (std::size_t j = 0; j < dst.size(); ++j) dst[j] += coeff * src[j];
        }
    }
    return out;
}

namespace {

constexpr char kMagic[4] = {'F', 'S', 'P', '1'};

void put_u64(std::ostream& os, std::uint64_t v) {
    unsigned char buf[8];
    for (int i = 0; i < 8; ++i) buf[i] = static_cast<unsigned char>(v >> (8 * i));
    os.write(reinterpret_cast<const char*>(buf), 8);
}

std::uint64_t get_u64(std::istream& is, const std::string& what) {
    unsigned char buf[8];
    if (!is.read(reinterpret_cast<char*>(buf), 8))
        throw FormatError("checkpoint truncated reading " + what);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(buf[i]) << (8 * i);
    return v;
}

static_assert(std::endian::native == std::endian::little,
              "little-endian host assumed for double serialization");

}  // namespace

void save_params(const std::string& path, const LayeredParams& p) {
    p.validate();
    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    if (!os) throw FormatError("cannot open for write: " + path);
    os.write(kMagic, 4);
    put_u64(os, p.blocks.size());
    for (const auto& b : p.blocks) {
        put_u64(os, b.shape.size());
        for (std::size_t d : b.shape) put_u64(os, d);
    }
    put_u64(os, p.split_index);
    for (const auto& b : p.blocks)
        os.write(reinterpret_cast<const char*>(b.values.data()),
                 static_cast<std::streamsize>(b.values.size() * sizeof(double)));
    if (!os) throw FormatError("write failed: " + path);
}

LayeredParams load_params(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw FormatError("cannot open: " + path);
    char magic[4];
    if (!is.read(magic, 4) || std::memcmp(magic, kMagic, 4) != 0)
        throw FormatError("bad checkpoint magic: " + path);
    LayeredParams p;
    const std::uint64_t nblocks = get_u64(is, "block count");
    p.blocks.resize(nblocks);
    for (auto& b : p.blocks) {
        const std::uint64_t ndim = get_u64(is, "ndim");
        b.shape.resize(ndim);
        for (auto& d : b.shape) d = get_u64(is, "dim");
    }
    p.split_index = get_u64(is, "split_index");
    for (auto& b : p.blocks) {
        b.values.resize(shape_product(b.shape));
        if (!is.read(reinterpret_cast<char*>(b.values.data()),
                     static_cast<std::streamsize>(b.values.size() * sizeof(double))))
            throw FormatError("checkpoint truncated reading values: " + path);
    }
    p.validate();
    return p;
}

}  // namespace fedsim
