#include "fedsim/data.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <numeric>

#include "fedsim/errors.hpp"

namespace fedsim {

void DataPool::rebuild_index() {
    per_class_index.assign(num_classes, {});
    for (std::size_t i = 0; i < labels.size(); ++i) {
        if (labels[i] >= num_classes)
            throw ShapeError("DataPool: label out of range at sample " +
                             std::to_string(i));
        per_class_index[labels[i]].push_back(i);
    }
}

void DataPool::validate() const {
    if (features.size() != labels.size() * input_dim)
        throw ShapeError("DataPool: feature matrix size mismatch");
    if (per_class_index.size() != num_classes)
        throw ShapeError("DataPool: per-class index not built");
    std::size_t indexed = 0;
    for (const auto& cls : per_class_index) indexed += cls.size();
    if (indexed != labels.size())
        throw ShapeError("DataPool: per-class index is not a partition");
}

Batch DataPool::as_batch() const {
    return Batch{labels.size(), input_dim, features, labels};
}

Batch DataPool::gather(const std::vector<std::size_t>& indices) const {
    Batch b;
    b.batch_size = indices.size();
    b.input_dim = input_dim;
    b.features.resize(indices.size() * input_dim);
    b.labels.resize(indices.size());
    for (std::size_t r = 0; r < indices.size(); ++r) {
        std::copy_n(&features[indices[r] * input_dim], input_dim,
                    &b.features[r * input_dim]);
        b.labels[r] = labels[indices[r]];
    }
    return b;
}

void PartitionSpec::validate() const {
    if (labels.empty()) throw std::invalid_argument("PartitionSpec: no labels");
    if (n_c < 1 || n_c > labels.size())
        throw std::invalid_argument("PartitionSpec: n_c out of range");
    if (s_min < 1 || s_min > s_max)
        throw std::invalid_argument("PartitionSpec: need 1 <= s_min <= s_max");
}

ClassCounts generate_class_counts(const PartitionSpec& spec, Rng& rng) {
    return generate_class_counts_draw(spec, rng).counts;
}

ClassCountsDraw generate_class_counts_draw(const PartitionSpec& spec, Rng& rng) {
    spec.validate();
    const std::size_t max_class =
        *std::max_element(spec.labels.begin(), spec.labels.end());
    ClassCounts counts(max_class + 1, 0);

    std::vector<std::size_t> chosen;
    std::sample(spec.labels.begin(), spec.labels.end(), std::back_inserter(chosen),
                spec.n_c, rng);

    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::vector<double> weights(chosen.size());
    double sum = 0.0;
    for (auto& w : weights) {
        w = unit(rng);
        sum += w;
    }
    std::uniform_int_distribution<std::size_t> size_dist(spec.s_min, spec.s_max);
    const std::size_t num = size_dist(rng);
    for (std::size_t i = 0; i < chosen.size(); ++i)
        counts[chosen[i]] =
            static_cast<std::size_t>(std::llround(weights[i] / sum * double(num)));
    return {std::move(counts), num};
}

ClientDataset materialize(const DataPool& pool, const ClassCounts& counts,
                          Rng& rng, bool replacement) {
    pool.validate();
    ClientDataset ds;
    ds.class_counts = counts;
    ds.class_counts.resize(pool.num_classes, 0);
    for (std::size_t cls = 0; cls < ds.class_counts.size(); ++cls) {
        const std::size_t want = ds.class_counts[cls];
        if (want == 0) continue;
        const auto& population = pool.per_class_index[cls];
        if (!replacement && want > population.size())
            throw CapacityError("class " + std::to_string(cls) + ": requested " +
                                std::to_string(want) + " of " +
                                std::to_string(population.size()) + " samples");
        if (replacement) {
            std::uniform_int_distribution<std::size_t> pick(0, population.size() - 1);
            for (std::size_t i = 0; i < want; ++i)
                ds.sample_indices.push_back(population[pick(rng)]);
        } else {
            std::sample(population.begin(), population.end(),
                        std::back_inserter(ds.sample_indices), want, rng);
        }
    }
    return ds;
}

std::vector<ClientDataset> generate_all_clients(
    const DataPool& pool, const PartitionSpec& base,
    const std::vector<std::size_t>& nc_choices, std::size_t num_clients,
    Rng& rng) {
    if (num_clients < 1)
        throw std::invalid_argument("generate_all_clients: need K >= 1");
    if (nc_choices.empty())
        throw std::invalid_argument("generate_all_clients: empty n_c choice set");
    std::vector<ClientDataset> clients;
    clients.reserve(num_clients);
    std::uniform_int_distribution<std::size_t> pick(0, nc_choices.size() - 1);
    for (std::size_t k = 0; k < num_clients; ++k) {
        PartitionSpec spec = base;
        spec.n_c = nc_choices[pick(rng)];
        ClientDataset ds = materialize(pool, generate_class_counts(spec, rng), rng);
        ds.client_id = k;
        clients.push_back(std::move(ds));
    }
    return clients;
}

DataPool synthetic_pool(std::size_t num_classes, std::size_t input_dim,
                        std::size_t per_class, double cluster_spread, Rng& rng) {
    if (num_classes < 1 || input_dim < 1 || per_class < 1)
        throw std::invalid_argument("synthetic_pool: counts must be >= 1");
    DataPool pool;
    pool.input_dim = input_dim;
    pool.num_classes = num_classes;

    std::uniform_real_distribution<double> center_dist(-1.0, 1.0);
    std::vector<double> centers(num_classes * input_dim);
    for (auto& c : centers) c = center_dist(rng);

    std::normal_distribution<double> noise(0.0, 1.0);
    pool.features.reserve(num_classes * per_class * input_dim);
    for (std::size_t cls = 0; cls < num_classes; ++cls) {
        for (std::size_t s = 0; s < per_class; ++s) {
            for (std::size_t d = 0; d < input_dim; ++d)
                pool.features.push_back(centers[cls * input_dim + d] +
                                        cluster_spread * noise(rng));
            pool.labels.push_back(cls);
        }
    }
    pool.rebuild_index();
    return pool;
}

namespace {

constexpr std::uint32_t kImagesMagic = 0x00000803;  // 2051
constexpr std::uint32_t kLabelsMagic = 0x00000801;  // 2049

std::uint32_t get_u32_be(std::istream& is, const std::string& what) {
    unsigned char buf[4];
    if (!is.read(reinterpret_cast<char*>(buf), 4))
        throw FormatError("IDX truncated reading " + what);
    return (std::uint32_t(buf[0]) << 24) | (std::uint32_t(buf[1]) << 16) |
           (std::uint32_t(buf[2]) << 8) | std::uint32_t(buf[3]);
}

void put_u32_be(std::ostream& os, std::uint32_t v) {
    const unsigned char buf[4] = {static_cast<unsigned char>(v >> 24),
                                  static_cast<unsigned char>(v >> 16),
                                  static_cast<unsigned char>(v >> 8),
                                  static_cast<unsigned char>(v)};
    os.write(reinterpret_cast<const char*>(buf), 4);
}

}  // namespace

DataPool load_idx(const std::string& images_path, const std::string& labels_path) {
    std::ifstream img(images_path, std::ios::binary);
    if (!img) throw FormatError("cannot open: " + images_path);
    if (get_u32_be(img, "images magic") != kImagesMagic)
        throw FormatError("bad IDX images magic: " + images_path);
    const std::uint32_t n = get_u32_be(img, "image count");
    const std::uint32_t rows = get_u32_be(img, "rows");
    const std::uint32_t cols = get_u32_be(img, "cols");

    std::ifstream lbl(labels_path, std::ios::binary);
    if (!lbl) throw FormatError("cannot open: " + labels_path);
    if (get_u32_be(lbl, "labels magic") != kLabelsMagic)
        throw FormatError("bad IDX labels magic: " + labels_path);
    const std::uint32_t n_labels = get_u32_be(lbl, "label count");
    if (n != n_labels)
        throw FormatError("IDX image/label count mismatch: " + std::to_string(n) +
                          " vs " + std::to_string(n_labels));

    const std::size_t dim = std::size_t(rows) * cols;
    std::vector<unsigned char> pixels(std::size_t(n) * dim);
    if (!img.read(reinterpret_cast<char*>(pixels.data()),
                  static_cast<std::streamsize>(pixels.size())))
        throw FormatError("IDX truncated reading pixels: " + images_path);
    std::vector<unsigned char> raw_labels(n);
    if (!lbl.read(reinterpret_cast<char*>(raw_labels.data()), n))
        throw FormatError("IDX truncated reading labels: " + labels_path);

    DataPool pool;
    pool.input_dim = dim;
    pool.features.resize(pixels.size());
    for (std::size_t i = 0; i < pixels.size(); ++i)
        pool.features[i] = pixels[i] / 255.0;
    pool.labels.assign(raw_labels.begin(), raw_labels.end());
    pool.num_classes =
        pool.labels.empty()
            ? 0
            : *std::max_element(pool.labels.begin(), pool.labels.end()) + 1;
    pool.rebuild_index();
    return pool;
}

void save_idx(const std::string& images_path, const std::string& labels_path,
              const DataPool& pool, std::size_t rows, std::size_t cols) {
    if (rows * cols != pool.input_dim)
        throw std::invalid_argument("save_idx: rows*cols != input_dim");
    std::ofstream img(images_path, std::ios::binary | std::ios::trunc);
    if (!img) throw FormatError("cannot open for write: " + images_path);
    put_u32_be(img, kImagesMagic);
    put_u32_be(img, static_cast<std::uint32_t>(pool.size()));
    put_u32_be(img, static_cast<std::uint32_t>(rows));
    put_u32_be(img, static_cast<std::uint32_t>(cols));
    for (double v : pool.features) {
        const auto byte = static_cast<unsigned char>(std::lround(v * 255.0));
        img.write(reinterpret_cast<const char*>(&byte), 1);
    }
    std::ofstream lbl(labels_path, std::ios::binary | std::ios::trunc);
    if (!lbl) throw FormatError("cannot open for write: " + labels_path);
    put_u32_be(lbl, kLabelsMagic);
    put_u32_be(lbl, static_cast<std::uint32_t>(pool.size()));
    for (std::size_t l : pool.labels) {
        const auto byte = static_cast<unsigned char>(l);
        lbl.write(reinterpret_cast<const char*>(&byte), 1);
    }
    if (!img || !lbl) throw FormatError("IDX write failed");
}

std::pair<DataPool, DataPool> split_pool(const DataPool& pool,
                                         double test_fraction, Rng& rng) {
    pool.validate();
    if (test_fraction < 0.0 || test_fraction >= 1.0)
        throw std::invalid_argument("split_pool: test_fraction must be in [0,1)");
    std::vector<std::size_t> order(pool.size());
    std::iota(order.begin(), order.end(), 0);
    std::shuffle(order.begin(), order.end(), rng);
    const std::size_t n_test =
        static_cast<std::size_t>(std::llround(test_fraction * double(pool.size())));

    auto build = [&](std::size_t begin, std::size_t end) {
        DataPool out;
        out.input_dim = pool.input_dim;
        out.num_classes = pool.num_classes;
        for (std::size_t i = begin; i < end; ++i) {
            const std::size_t src = order[i];
            out.features.insert(out.features.end(),
                                pool.features.begin() + src * pool.input_dim,
                                pool.features.begin() + (src + 1) * pool.input_dim);
            out.labels.push_back(pool.labels[src]);
        }
        out.rebuild_index();
        return out;
    };
    return {build(n_test, pool.size()), build(0, n_test)};
}

void write_partition_table(const std::string& path,
                           const std::vector<ClientDataset>& clients) {
    const std::string tmp = path + ".tmp";
    {
        std::ofstream os(tmp, std::ios::trunc);
        if (!os) throw FormatError("cannot open for write: " + path);
        os << "client_id,class,count\n";
        for (const auto& c : clients)
            for (std::size_t cls = 0; cls < c.class_counts.size(); ++cls)
                if (c.class_counts[cls] > 0)
                    os << c.client_id << ',' << cls << ',' << c.class_counts[cls]
                       << '\n';
        if (!os) throw FormatError("write failed: " + path);
    }
    std::filesystem::rename(tmp, path);
}

}  // namespace fedsim
