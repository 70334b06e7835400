#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <filesystem>

#include "fedsim/data.hpp"
#include "fedsim/errors.hpp"
#include "fedsim/metrics.hpp"
#include "fedsim/model.hpp"
#include "fedsim/rng.hpp"

using namespace fedsim;

namespace {

std::vector<RoundRecord> records_with_accuracies(const std::vector<double>& accs,
                                                 std::size_t per_round_cost = 100) {
    std::vector<RoundRecord> out;
    for (std::size_t i = 0; i < accs.size(); ++i) {
        RoundRecord r;
        r.round = i + 1;
        r.test_accuracy = accs[i];
        r.params_down = per_round_cost;
        r.params_up = per_round_cost;
        out.push_back(r);
    }
    return out;
}

}  // namespace

TEST_CASE("round_cost per flag state") {
    auto c = round_cost(true, 100, 1000, 2);
    CHECK(c.down == 2200);
    CHECK(c.up == 2200);
    c = round_cost(false, 100, 1000, 2);
    CHECK(c.down == 200);
    CHECK(c.up == 200);
    CHECK_THROWS_AS(round_cost(true, 0, 1, 1), std::invalid_argument);
}

TEST_CASE("per-loop saving equals (T - fe) * S_s per client per direction") {
    const std::size_t T = 15, fe = 5, S_g = 100, S_s = 1000;
    std::size_t sync_total = 0, async_total = 0;
    for (std::size_t i = 0; i < T; ++i) {
        const bool flag = i >= T - fe;
        sync_total += round_cost(true, S_g, S_s, 1).down;
        async_total += round_cost(flag, S_g, S_s, 1).down;
    }
    CHECK(sync_total - async_total == (T - fe) * S_s);
}

TEST_CASE("global_loss weighting") {
    Rng rng(1);
    const auto pool = synthetic_pool(3, 4, 30, 0.3, rng);
    const auto spec = dense_spec(4, {5}, 3, 1);
    Rng init_rng(2);
    const auto params = init_params(spec, init_rng);

    ClientDataset a;
    a.client_id = 0;
    a.sample_indices = {0, 1, 2, 30, 31};
    a.class_counts = {3, 2, 0};
    ClientDataset b;
    b.client_id = 1;
    b.sample_indices = {60, 61, 62, 63, 64, 65, 66};
    b.class_counts = {0, 0, 7};

    SUBCASE("single client: its local loss exactly") {
        const std::vector<ClientDataset> one = {a};
        const double expect = batch_loss(spec, params, pool.gather(a.sample_indices));
        CHECK(global_loss(spec, params, pool, one) == expect);
    }

    SUBCASE("identical clients: equal to any one of them") {
        const std::vector<ClientDataset> same = {a, a, a};
        const double single = batch_loss(spec, params, pool.gather(a.sample_indices));
        CHECK(std::abs(global_loss(spec, params, pool, same) - single) <= 1e-12);
    }

    SUBCASE("two clients: by-hand weighted sum") {
        const std::vector<ClientDataset> both = {a, b};
        const double la = batch_loss(spec, params, pool.gather(a.sample_indices));
        const double lb = batch_loss(spec, params, pool.gather(b.sample_indices));
        const double expect = 5.0 / 12.0 * la + 7.0 / 12.0 * lb;
        CHECK(std::abs(global_loss(spec, params, pool, both) - expect) <= 1e-12);
    }
}

TEST_CASE("rounds_to_accuracy") {
    const auto recs = records_with_accuracies({0.5, 0.96});
    CHECK(rounds_to_accuracy(recs, 0.95) == 2);
    CHECK_FALSE(rounds_to_accuracy(recs, 0.99).has_value());
    CHECK(rounds_to_accuracy(recs, 1e-12) == 1);
}

TEST_CASE("summarize_run tracks best round and costs to threshold") {
    const auto recs = records_with_accuracies({0.3, 0.8, 0.7, 0.9, 0.85});
    const auto s = summarize_run(recs, 0.75);
    CHECK(s.best_accuracy == 0.9);
    CHECK(s.best_round == 4);
    CHECK(s.rounds_to_threshold == 2);
    CHECK(s.params_to_threshold == 400);          // 2 rounds x 200
    CHECK(s.total_params_exchanged == 1000);      // 5 rounds x 200
}

TEST_CASE("cumulative cost is additive and non-decreasing") {
    const auto recs = records_with_accuracies({0.1, 0.2, 0.3, 0.4});
    std::size_t cumulative = 0;
    for (const auto& r : recs) {
        const std::size_t next = cumulative + r.params_down + r.params_up;
        CHECK(next >= cumulative);
        cumulative = next;
    }
    CHECK(cumulative == summarize_run(recs, 2.0).total_params_exchanged);
}

TEST_CASE("summarize_runs statistics") {
    SUBCASE("identical runs give zero stdev") {
        RunSummary s;
        s.best_accuracy = 0.9;
        s.rounds_to_threshold = 10;
        s.params_to_threshold = 1000;
        s.total_params_exchanged = 5000;
        const std::vector<RunSummary> runs = {s, s, s};
        const auto m = summarize_runs(runs);
        CHECK(m.best_accuracy.avg == 0.9);
        CHECK(m.best_accuracy.stdev == 0.0);
        CHECK(m.threshold_exclusions == 0);
    }

    SUBCASE("two-point closed form") {
        RunSummary a, b;
        a.best_accuracy = 0.96;
        b.best_accuracy = 0.98;
        const std::vector<RunSummary> runs = {a, b};
        const auto m = summarize_runs(runs);
        CHECK(m.best_accuracy.avg == doctest::Approx(0.97).epsilon(1e-12));
        CHECK(m.best_accuracy.stdev ==
              doctest::Approx(std::sqrt(2.0) * 0.01).epsilon(1e-9));
        CHECK(m.threshold_exclusions == 2);  // neither reached the threshold
    }

    SUBCASE("absent thresholds are excluded with a count") {
        RunSummary reached, missed;
        reached.rounds_to_threshold = 20;
        reached.params_to_threshold = 2000;
        const std::vector<RunSummary> runs = {reached, missed};
        const auto m = summarize_runs(runs);
        CHECK(m.rounds_to_threshold.avg == 20.0);
        CHECK(m.threshold_exclusions == 1);
    }

    SUBCASE("empty input is a usage error") {
        const std::vector<RunSummary> none;
        CHECK_THROWS_AS(summarize_runs(none), std::invalid_argument);
    }
}

TEST_CASE("relative_cost normalizes to the baseline") {
    MultiRunStats twafl;
    twafl.num_runs = 3;
    twafl.params_to_threshold.avg = 1000.0;
    MultiRunStats fedavg;
    fedavg.num_runs = 3;
    fedavg.params_to_threshold.avg = 6160.0;
    MultiRunStats afl;
    afl.num_runs = 3;
    afl.threshold_exclusions = 3;  // never reached

    std::map<std::string, MultiRunStats> per_variant = {
        {"twafl", twafl}, {"fedavg", fedavg}, {"afl", afl}};
    const auto ratios = relative_cost(per_variant, "twafl");
    CHECK(*ratios.at("twafl") == 1.0);
    CHECK(*ratios.at("fedavg") == doctest::Approx(6.16).epsilon(1e-12));
    CHECK_FALSE(ratios.at("afl").has_value());

    CHECK_THROWS_AS(relative_cost(per_variant, "tefl"), std::invalid_argument);
    std::map<std::string, MultiRunStats> dead = {{"afl", afl}};
    CHECK_THROWS_AS(relative_cost(dead, "afl"), std::runtime_error);
}

TEST_CASE("synchronous-vs-async closed-form cost ratio") {
    // same rounds-to-threshold, fe=5, T=15
    const double S_g = 100, S_s = 1000;
    const double sync_per_round = S_g + S_s;
    const double async_per_round = 5.0 / 15.0 * (S_g + S_s) + 10.0 / 15.0 * S_g;
    CHECK(sync_per_round / async_per_round > 1.0);
}

TEST_CASE("round record files round-trip") {
    RoundRecord r1;
    r1.round = 1;
    r1.flag = true;
    r1.participants = {2, 5};
    r1.test_accuracy = 0.123456789012345;
    r1.global_loss = 2.30258509299;
    r1.params_down = 440;
    r1.params_up = 440;
    RoundRecord r2 = r1;
    r2.round = 2;
    r2.flag = false;
    r2.participants = {0};

    const auto path =
        (std::filesystem::temp_directory_path() / "fedsim_records.csv").string();
    const std::vector<RoundRecord> recs = {r1, r2};
    write_round_records(path, recs);
    const auto back = read_round_records(path);
    REQUIRE(back.size() == 2);
    CHECK(back[0].participants == r1.participants);
    CHECK(back[0].test_accuracy == r1.test_accuracy);
    CHECK(back[1].flag == false);
    CHECK(back[1].global_loss == r2.global_loss);
    std::filesystem::remove(path);
}
