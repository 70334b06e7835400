#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>

#include "fedsim/config.hpp"
#include "fedsim/errors.hpp"

using namespace fedsim;

namespace {

std::string write_temp(const std::string& name, const std::string& body) {
    const auto path = (std::filesystem::temp_directory_path() / name).string();
    std::ofstream os(path, std::ios::trunc);
    os << body;
    return path;
}

}  // namespace

TEST_CASE("defaults survive an empty config") {
    const auto c = parse_config({});
    CHECK(c.variant == Variant::Twafl);
    CHECK(c.num_clients == 20);
    CHECK(c.client_fraction == 0.1);
    CHECK(c.time_base == doctest::Approx(std::exp(1.0) / 2.0).epsilon(1e-12));
    CHECK(c.rounds_in_loop == 15);
    CHECK(c.es_rounds == es_rounds_for_freq(5, 15));
    CHECK(c.batch_size == 32);
    CHECK(c.epochs == 5);
    CHECK(c.eta == 0.05);
    CHECK(c.total_rounds == 200);
    CHECK(c.normalize_weights == true);
    CHECK(c.hidden_dims == std::vector<std::size_t>{32});
    CHECK(c.nc_choices == std::vector<std::size_t>({2, 3}));
    CHECK(c.s_min == 1000);
    CHECK(c.s_max == 1600);
    CHECK(c.test_fraction == 0.2);
}

TEST_CASE("explicit fields are parsed") {
    const auto c = parse_config({{"variant", "afl"},
                                 {"K", "100"},
                                 {"C", "0.05"},
                                 {"fe", "3"},
                                 {"rounds_in_loop", "10"},
                                 {"B", "64"},
                                 {"E", "2"},
                                 {"eta", "0.1"},
                                 {"total_rounds", "50"},
                                 {"seed", "42"},
                                 {"hidden_dims", "64,32"},
                                 {"model_split_index", "2"},
                                 {"nc_choices", "1,2,4"},
                                 {"s_min", "10"},
                                 {"s_max", "20"},
                                 {"test_fraction", "0.25"}});
    CHECK(c.variant == Variant::Afl);
    CHECK(c.num_clients == 100);
    CHECK(c.client_fraction == 0.05);
    CHECK(c.rounds_in_loop == 10);
    CHECK(c.es_rounds == es_rounds_for_freq(3, 10));
    CHECK(c.batch_size == 64);
    CHECK(c.epochs == 2);
    CHECK(c.eta == 0.1);
    CHECK(c.total_rounds == 50);
    CHECK(c.seed == 42);
    CHECK(c.hidden_dims == std::vector<std::size_t>({64, 32}));
    CHECK(c.model_split_index == 2);
    CHECK(c.nc_choices == std::vector<std::size_t>({1, 2, 4}));
    CHECK(c.s_min == 10);
    CHECK(c.s_max == 20);
    CHECK(c.test_fraction == 0.25);
    // async but not temporal: a pinned to 1
    CHECK(c.time_base == 1.0);
}

TEST_CASE("symbolic time base values") {
    auto c = parse_config({{"variant", "tefl"}, {"a", "e"}});
    CHECK(c.time_base == doctest::Approx(std::exp(1.0)).epsilon(1e-12));
    c = parse_config({{"variant", "twafl"}, {"a", "e/2"}});
    CHECK(c.time_base == doctest::Approx(std::exp(1.0) / 2.0).epsilon(1e-12));
    c = parse_config({{"variant", "tefl"}, {"a", "1.5"}});
    CHECK(c.time_base == 1.5);
}

TEST_CASE("variant rules applied after parsing") {
    SUBCASE("synchronous variants flag every round") {
        const auto c = parse_config({{"variant", "fedavg"}, {"fe", "2"}});
        CHECK(c.es_rounds.size() == c.rounds_in_loop);
        for (std::size_t t = 1; t <= 30; ++t) CHECK(flag_for_round(t, c));
    }
    SUBCASE("non-temporal variants force a = 1") {
        CHECK(parse_config({{"variant", "fedavg"}}).time_base == 1.0);
        CHECK(parse_config({{"variant", "afl"}}).time_base == 1.0);
        CHECK(parse_config({{"variant", "fedavg"}, {"a", "1"}}).time_base == 1.0);
    }
    SUBCASE("explicit non-unit a rejected for non-temporal variants") {
        CHECK_THROWS_AS(parse_config({{"variant", "fedavg"}, {"a", "1.5"}}),
                        std::invalid_argument);
        CHECK_THROWS_AS(parse_config({{"variant", "afl"}, {"a", "e/2"}}),
                        std::invalid_argument);
    }
}

TEST_CASE("rejections name the field") {
    using Catch = std::invalid_argument;
    CHECK_THROWS_WITH_AS(parse_config({{"bogus_key", "1"}}),
                         doctest::Contains("bogus_key"), Catch);
    CHECK_THROWS_WITH_AS(parse_config({{"K", "many"}}), doctest::Contains("K"),
                         Catch);
    CHECK_THROWS_WITH_AS(parse_config({{"eta", "fast"}}), doctest::Contains("eta"),
                         Catch);
    CHECK_THROWS_WITH_AS(parse_config({{"normalize_weights", "maybe"}}),
                         doctest::Contains("normalize_weights"), Catch);
    CHECK_THROWS_WITH_AS(parse_config({{"hidden_dims", ""}}),
                         doctest::Contains("hidden_dims"), Catch);
}

TEST_CASE("validate catches out-of-range combinations") {
    CHECK_THROWS_AS(parse_config({{"K", "0"}}), std::invalid_argument);
    CHECK_THROWS_AS(parse_config({{"C", "0"}}), std::invalid_argument);
    CHECK_THROWS_AS(parse_config({{"C", "1.5"}}), std::invalid_argument);
    CHECK_THROWS_AS(parse_config({{"s_min", "50"}, {"s_max", "10"}}),
                    std::invalid_argument);
    CHECK_THROWS_AS(parse_config({{"fe", "0"}}), std::invalid_argument);
    CHECK_THROWS_AS(parse_config({{"fe", "16"}}), std::invalid_argument);
    CHECK_THROWS_AS(parse_config({{"test_fraction", "1.0"}}),
                    std::invalid_argument);
}

TEST_CASE("key=value file parsing") {
    SUBCASE("comments and blank lines are skipped") {
        const auto path = write_temp("fedsim_cfg_ok.cfg",
                                     "# experiment settings\n"
                                     "variant = twafl\n"
                                     "\n"
                                     "K = 10   # clients\n"
                                     "C=0.2\n");
        const auto c = load_config(path);
        CHECK(c.variant == Variant::Twafl);
        CHECK(c.num_clients == 10);
        CHECK(c.client_fraction == 0.2);
        std::filesystem::remove(path);
    }
    SUBCASE("line without '=' is a format error") {
        const auto path = write_temp("fedsim_cfg_bad.cfg", "variant twafl\n");
        CHECK_THROWS_AS(load_config(path), FormatError);
        std::filesystem::remove(path);
    }
    SUBCASE("missing file") {
        CHECK_THROWS_AS(load_config("/nonexistent/fedsim.cfg"), FormatError);
    }
}

TEST_CASE("config write/load round-trip") {
    auto c = parse_config({{"variant", "twafl"},
                           {"K", "7"},
                           {"C", "0.3"},
                           {"a", "1.25"},
                           {"fe", "4"},
                           {"rounds_in_loop", "12"},
                           {"eta", "0.01"},
                           {"seed", "99"},
                           {"hidden_dims", "16,8"},
                           {"s_min", "5"},
                           {"s_max", "9"}});
    const auto path =
        (std::filesystem::temp_directory_path() / "fedsim_cfg_rt.cfg").string();
    write_config(path, c);
    const auto back = load_config(path);
    CHECK(back.variant == c.variant);
    CHECK(back.num_clients == c.num_clients);
    CHECK(back.client_fraction == c.client_fraction);
    CHECK(back.time_base == c.time_base);
    CHECK(back.rounds_in_loop == c.rounds_in_loop);
    CHECK(back.es_rounds == c.es_rounds);
    CHECK(back.eta == c.eta);
    CHECK(back.seed == c.seed);
    CHECK(back.hidden_dims == c.hidden_dims);
    CHECK(back.s_min == c.s_min);
    CHECK(back.s_max == c.s_max);
    std::filesystem::remove(path);
}

TEST_CASE("variant names round-trip") {
    for (const auto v : {Variant::FedAvg, Variant::Tefl, Variant::Afl,
                         Variant::Twafl})
        CHECK(variant_from_name(variant_name(v)) == v);
    CHECK_THROWS_AS(variant_from_name("sgd"), std::invalid_argument);
}
