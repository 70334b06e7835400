#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <set>

#include "fedsim/data.hpp"
#include "fedsim/errors.hpp"
#include "fedsim/model.hpp"
#include "fedsim/rng.hpp"

using namespace fedsim;

namespace {

PartitionSpec mnist_style_spec(std::size_t n_c = 2) {
    PartitionSpec spec;
    spec.labels.resize(10);
    std::iota(spec.labels.begin(), spec.labels.end(), 0);
    spec.n_c = n_c;
    spec.s_min = 1000;
    spec.s_max = 1600;
    return spec;
}

}  // namespace

TEST_CASE("single-class draw assigns the whole total to one class") {
    auto spec = mnist_style_spec(1);
    Rng rng(1);
    for (int iter = 0; iter < 20; ++iter) {
        const auto draw = generate_class_counts_draw(spec, rng);
        std::size_t nonzero = 0, sum = 0;
        for (std::size_t c : draw.counts) {
            if (c > 0) ++nonzero;
            sum += c;
        }
        CHECK(nonzero == 1);
        CHECK(sum == draw.num);
        CHECK(draw.num >= spec.s_min);
        CHECK(draw.num <= spec.s_max);
    }
}

TEST_CASE("count totals stay within the rounding slack of the drawn num") {
    auto spec = mnist_style_spec(3);
    Rng rng(2);
    for (int iter = 0; iter < 200; ++iter) {
        const auto draw = generate_class_counts_draw(spec, rng);
        const std::size_t sum =
            std::accumulate(draw.counts.begin(), draw.counts.end(), std::size_t{0});
        CHECK(sum + spec.n_c >= draw.num);
        CHECK(sum <= draw.num + spec.n_c);
        std::size_t nonzero = 0;
        for (std::size_t c : draw.counts)
            if (c > 0) ++nonzero;
        CHECK(nonzero <= spec.n_c);
    }
}

TEST_CASE("class count generation replays under a fixed seed") {
    auto spec = mnist_style_spec(3);
    Rng r1(77), r2(77);
    CHECK(generate_class_counts(spec, r1) == generate_class_counts(spec, r2));
}

TEST_CASE("generate_class_counts rejects n_c beyond the label set") {
    auto spec = mnist_style_spec(11);
    Rng rng(3);
    CHECK_THROWS_AS(generate_class_counts(spec, rng), std::invalid_argument);
}

TEST_CASE("materialize basics") {
    Rng pool_rng(4);
    const auto pool = synthetic_pool(5, 3, 40, 0.1, pool_rng);
    Rng rng(5);

    SUBCASE("all-zero counts give an empty dataset") {
        const auto ds = materialize(pool, ClassCounts(5, 0), rng);
        CHECK(ds.n_k() == 0);
    }

    SUBCASE("full class population returns exactly that index set") {
        ClassCounts counts(5, 0);
        counts[2] = 40;
        const auto ds = materialize(pool, counts, rng);
        std::set<std::size_t> got(ds.sample_indices.begin(), ds.sample_indices.end());
        std::set<std::size_t> want(pool.per_class_index[2].begin(),
                                   pool.per_class_index[2].end());
        CHECK(got == want);
    }

    SUBCASE("returned histogram equals the requested counts") {
        ClassCounts counts(5, 0);
        counts[0] = 7;
        counts[3] = 13;
        const auto ds = materialize(pool, counts, rng);
        ClassCounts histogram(5, 0);
        for (std::size_t idx : ds.sample_indices) ++histogram[pool.labels[idx]];
        CHECK(histogram == counts);
    }

    SUBCASE("no duplicate index without replacement") {
        ClassCounts counts(5, 0);
        counts[1] = 40;
        counts[4] = 25;
        const auto ds = materialize(pool, counts, rng);
        std::set<std::size_t> unique(ds.sample_indices.begin(),
                                     ds.sample_indices.end());
        CHECK(unique.size() == ds.sample_indices.size());
    }

    SUBCASE("over-capacity request names the class") {
        ClassCounts counts(5, 0);
        counts[3] = 41;
        try {
            materialize(pool, counts, rng);
            FAIL("expected CapacityError");
        } catch (const CapacityError& e) {
            CHECK(std::string(e.what()).find("class 3") != std::string::npos);
        }
    }

    SUBCASE("replacement allows over-population requests") {
        ClassCounts counts(5, 0);
        counts[3] = 100;
        const auto ds = materialize(pool, counts, rng, true);
        CHECK(ds.n_k() == 100);
    }
}

TEST_CASE("generate_all_clients structural bounds at the reference settings") {
    Rng pool_rng(6);
    const auto pool = synthetic_pool(10, 4, 2000, 0.1, pool_rng);
    auto spec = mnist_style_spec();
    Rng rng(7);
    const auto clients = generate_all_clients(pool, spec, {2, 3}, 20, rng);
    REQUIRE(clients.size() == 20);
    for (const auto& c : clients) {
        std::size_t nonzero = 0;
        for (std::size_t cnt : c.class_counts)
            if (cnt > 0) ++nonzero;
        CHECK(nonzero >= 1);
        CHECK(nonzero <= 3);
        CHECK(c.n_k() >= 1000 - 3);
        CHECK(c.n_k() <= 1600 + 3);
    }
}

TEST_CASE("generate_all_clients replays and single-client works") {
    Rng pool_rng(8);
    const auto pool = synthetic_pool(4, 3, 500, 0.1, pool_rng);
    PartitionSpec spec;
    spec.labels = {0, 1, 2, 3};
    spec.s_min = 50;
    spec.s_max = 80;
    Rng r1(9), r2(9);
    const auto a = generate_all_clients(pool, spec, {2}, 5, r1);
    const auto b = generate_all_clients(pool, spec, {2}, 5, r2);
    REQUIRE(a.size() == b.size());
    for (std::size_t i = 0; i < a.size(); ++i)
        CHECK(a[i].sample_indices == b[i].sample_indices);

    Rng r3(10);
    const auto single = generate_all_clients(pool, spec, {2}, 1, r3);
    CHECK(single.size() == 1);
}

TEST_CASE("distinct seeds give distinct partitions") {
    Rng pool_rng(11);
    const auto pool = synthetic_pool(6, 3, 300, 0.1, pool_rng);
    PartitionSpec spec;
    spec.labels = {0, 1, 2, 3, 4, 5};
    spec.s_min = 30;
    spec.s_max = 60;
    std::set<std::vector<std::size_t>> seen;
    for (std::uint64_t seed = 0; seed < 100; ++seed) {
        Rng rng(seed);
        const auto clients = generate_all_clients(pool, spec, {2, 3}, 3, rng);
        std::vector<std::size_t> signature;
        for (const auto& c : clients)
            signature.insert(signature.end(), c.sample_indices.begin(),
                             c.sample_indices.end());
        seen.insert(signature);
    }
    CHECK(seen.size() == 100);
}

TEST_CASE("synthetic pool shape and degenerate spread") {
    Rng rng(12);
    const auto pool = synthetic_pool(10, 5, 100, 0.1, rng);
    CHECK(pool.size() == 1000);
    for (const auto& cls : pool.per_class_index) CHECK(cls.size() == 100);

    Rng rng2(13);
    const auto tight = synthetic_pool(3, 4, 10, 0.0, rng2);
    for (std::size_t cls = 0; cls < 3; ++cls) {
        const auto& idx = tight.per_class_index[cls];
        for (std::size_t i = 1; i < idx.size(); ++i)
            for (std::size_t d = 0; d < 4; ++d)
                CHECK(tight.features[idx[i] * 4 + d] ==
                      tight.features[idx[0] * 4 + d]);
    }
}

TEST_CASE("a dense net trains centrally on a low-spread pool") {
    Rng rng(14);
    const auto pool = synthetic_pool(10, 8, 80, 0.05, rng);
    Rng split_rng(15);
    const auto [train, test] = split_pool(pool, 0.2, split_rng);
    const auto spec = dense_spec(8, {32}, 10, 1);
    Rng init_rng(16);
    auto params = init_params(spec, init_rng);
    Rng sgd_rng(17);
    params = client_sgd(spec, params, train.as_batch(), 32, 40, 0.1, sgd_rng);
    CHECK(batch_accuracy(spec, params, test.as_batch()) > 0.95);
}

TEST_CASE("IDX round-trip and error paths") {
    Rng rng(18);
    DataPool pool;
    pool.input_dim = 4;
    pool.num_classes = 3;
    std::uniform_int_distribution<int> byte(0, 255);
    for (int i = 0; i < 10; ++i) {
        for (int d = 0; d < 4; ++d) pool.features.push_back(byte(rng) / 255.0);
        pool.labels.push_back(i % 3);
    }
    pool.rebuild_index();

    const auto dir = std::filesystem::temp_directory_path();
    const auto img = (dir / "fedsim_test_images.idx").string();
    const auto lbl = (dir / "fedsim_test_labels.idx").string();
    save_idx(img, lbl, pool, 2, 2);

    const auto loaded = load_idx(img, lbl);
    CHECK(loaded.size() == 10);
    CHECK(loaded.input_dim == 4);
    CHECK(loaded.labels == pool.labels);
    for (std::size_t i = 0; i < pool.features.size(); ++i)
        CHECK(loaded.features[i] == pool.features[i]);
    for (double v : loaded.features) {
        CHECK(v >= 0.0);
        CHECK(v <= 1.0);
    }

    SUBCASE("corrupted magic is rejected") {
        std::fstream f(img, std::ios::in | std::ios::out | std::ios::binary);
        f.seekp(0);
        f.put('\xff');
        f.close();
        CHECK_THROWS_AS(load_idx(img, lbl), FormatError);
    }

    SUBCASE("truncated file is rejected with no partial pool") {
        std::ifstream in(img, std::ios::binary);
        std::string bytes(std::istreambuf_iterator<char>(in), {});
        in.close();
        std::ofstream out(img, std::ios::binary | std::ios::trunc);
        out << bytes.substr(0, bytes.size() - 5);
        out.close();
        CHECK_THROWS_AS(load_idx(img, lbl), FormatError);
    }

    SUBCASE("image/label count mismatch is rejected") {
        DataPool short_pool = pool;
        short_pool.features.resize(8 * 4);
        short_pool.labels.resize(8);
        short_pool.rebuild_index();
        const auto lbl2 = (dir / "fedsim_test_labels2.idx").string();
        save_idx((dir / "fedsim_scratch.idx").string(), lbl2, short_pool, 2, 2);
        CHECK_THROWS_AS(load_idx(img, lbl2), FormatError);
    }

    std::filesystem::remove(img);
    std::filesystem::remove(lbl);
}

TEST_CASE("split_pool is a seeded disjoint partition") {
    Rng rng(19);
    const auto pool = synthetic_pool(4, 3, 50, 0.1, rng);
    Rng s1(20), s2(20);
    const auto [train1, test1] = split_pool(pool, 0.2, s1);
    const auto [train2, test2] = split_pool(pool, 0.2, s2);
    CHECK(test1.size() == 40);
    CHECK(train1.size() == 160);
    CHECK(train1.labels == train2.labels);
    CHECK(test1.features == test2.features);
}

TEST_CASE("partition table emits one row per nonzero cell") {
    std::vector<ClientDataset> clients(2);
    clients[0].client_id = 0;
    clients[0].class_counts = {5, 0, 7};
    clients[1].client_id = 1;
    clients[1].class_counts = {0, 3, 0};
    const auto path =
        (std::filesystem::temp_directory_path() / "fedsim_partition.csv").string();
    write_partition_table(path, clients);
    std::ifstream is(path);
    std::string line;
    std::vector<std::string> lines;
    while (std::getline(is, line)) lines.push_back(line);
    REQUIRE(lines.size() == 4);
    CHECK(lines[0] == "client_id,class,count");
    CHECK(lines[1] == "0,0,5");
    CHECK(lines[2] == "0,2,7");
    CHECK(lines[3] == "1,1,3");
    std::filesystem::remove(path);
}
