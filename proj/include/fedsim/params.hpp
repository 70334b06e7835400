#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace fedsim {

// Which partition of a layered parameter vector an operation touches.
enum class Selector { Shallow, Deep, All };

// A flat slice of model parameters with its logical tensor shape.
struct ParamBlock {
    std::vector<std::size_t> shape;
    std::vector<double> values;

    std::size_t size() const { return values.size(); }
};

// Ordered parameter blocks with a shallow/deep boundary. Blocks with index
// < split_index are shallow, the rest deep. Containers are treated as
// immutable once built; combine operations return new containers.
struct LayeredParams {
    std::vector<ParamBlock> blocks;
    std::size_t split_index = 0;

    std::size_t total_size() const;
    std::size_t shallow_size() const;
    std::size_t deep_size() const;

    bool same_structure(const LayeredParams& other) const;

    // Throws ShapeError if a block's value length disagrees with its shape,
    // a shape entry is zero, or split_index leaves a partition empty.
    void validate() const;
};

struct PartitionSizes {
    std::size_t shallow = 0;  // S_g
    std::size_t deep = 0;     // S_s
};

PartitionSizes partition_sizes(const LayeredParams& p);

// Element-wise sum of coefficient * params over the selected partition.
// The unselected partition is copied from the first term. Summation runs
// in the given term order; callers order terms by ascending client index.
LayeredParams linear_combine(
    std::span<const std::pair<double, const LayeredParams*>> terms,
    Selector selector);

// Checkpoint serialization. Layout (all integers little-endian uint64 after
// a 4-byte magic "FSP1"): block_count, then per block ndim followed by its
// dims, then split_index, then all values as little-endian IEEE doubles in
// block order. Round-trips are bit-exact.
void save_params(const std::string& path, const LayeredParams& p);
LayeredParams load_params(const std::string& path);

}  // namespace fedsim
