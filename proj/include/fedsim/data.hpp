#pragma once

#include <cstddef>
#include <string>
#include <utility>
#include <vector>

#include "fedsim/model.hpp"
#include "fedsim/rng.hpp"

namespace fedsim {

// Immutable sample pool with a per-class index over 0..N-1.
struct DataPool {
    std::size_t input_dim = 0;
    std::size_t num_classes = 0;
    std::vector<double> features;     // N x input_dim, row-major
    std::vector<std::size_t> labels;  // length N
    std::vector<std::vector<std::size_t>> per_class_index;

    std::size_t size() const { return labels.size(); }
    void rebuild_index();
    void validate() const;
    Batch as_batch() const;
    Batch gather(const std::vector<std::size_t>& indices) const;
};

// Inputs of the local-dataset generator.
struct PartitionSpec {
    std::vector<std::size_t> labels;  // class ids eligible for assignment
    std::size_t n_c = 2;              // classes per client
    std::size_t s_min = 1000;
    std::size_t s_max = 1600;

    void validate() const;
};

using ClassCounts = std::vector<std::size_t>;  // indexed by class id

struct ClientDataset {
    std::size_t client_id = 0;
    ClassCounts class_counts;
    std::vector<std::size_t> sample_indices;  // pool indices

    std::size_t n_k() const { return sample_indices.size(); }
};

// Draws n_c distinct classes, a uniform weight in (0,1) per chosen class and
// num ~ uniform integer in [s_min, s_max]; each chosen class receives
// round(weight/sum * num) samples, others zero.
ClassCounts generate_class_counts(const PartitionSpec& spec, Rng& rng);

// Same draw, also reporting the sampled total so callers can check the
// per-class rounding slack against it.
struct ClassCountsDraw {
    ClassCounts counts;
    std::size_t num = 0;  // the drawn target total in [s_min, s_max]
};
ClassCountsDraw generate_class_counts_draw(const PartitionSpec& spec, Rng& rng);

// Uniformly samples the requested number of pool indices per class, without
// replacement unless asked otherwise.
ClientDataset materialize(const DataPool& pool, const ClassCounts& counts,
                          Rng& rng, bool replacement = false);

// Per-client n_c is drawn independently from nc_choices; clients sample
// independently from the shared pool (cross-client overlap allowed).
std::vector<ClientDataset> generate_all_clients(
    const DataPool& pool, const PartitionSpec& base,
    const std::vector<std::size_t>& nc_choices, std::size_t num_clients, Rng& rng);

// Balanced Gaussian class clusters with seeded centers.
DataPool synthetic_pool(std::size_t num_classes, std::size_t input_dim,
                        std::size_t per_class, double cluster_spread, Rng& rng);

// IDX readers/writers (big-endian counts; magic 2051 images, 2049 labels).
// Pixels are scaled to [0,1] on load and quantized back to bytes on save.
DataPool load_idx(const std::string& images_path, const std::string& labels_path);
void save_idx(const std::string& images_path, const std::string& labels_path,
              const DataPool& pool, std::size_t rows, std::size_t cols);

// Seeded disjoint train/test split.
std::pair<DataPool, DataPool> split_pool(const DataPool& pool,
                                         double test_fraction, Rng& rng);

// Tabular partition dump: one "client_id,class,count" row per nonzero cell.
void write_partition_table(const std::string& path,
                           const std::vector<ClientDataset>& clients);

}  // namespace fedsim
