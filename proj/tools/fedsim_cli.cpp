// fedsim: deterministic federated-learning simulator front end.
//
// Subcommands:
//   run        one experiment from a config file; emits round records + summary
//   batch      cross-product of config sweeps x seeds, optionally in parallel
//   compare    the four protocol variants side by side on shared seeds
//   partition  materialize the non-IID client partition and export its table
//
// Exit status: 0 success, 2 invalid configuration or arguments, 3 file I/O or
// format failure, 1 any other error.

#include <algorithm>
#include <atomic>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <map>
#include <mutex>
#include <numeric>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "fedsim/config.hpp"
#include "fedsim/data.hpp"
#include "fedsim/errors.hpp"
#include "fedsim/metrics.hpp"
#include "fedsim/protocol.hpp"
#include "fedsim/rng.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace fedsim;

namespace {

struct PoolOptions {
    std::string images_path;
    std::string labels_path;
    std::size_t synth_classes = 10;
    std::size_t synth_dim = 16;
    std::size_t synth_per_class = 400;
    double synth_spread = 0.35;
    std::uint64_t pool_seed = 7;
};

void add_pool_options(CLI::App* cmd, PoolOptions& opts) {
    cmd->add_option("--images", opts.images_path,
                    "IDX image file (pairs with --labels)");
    cmd->add_option("--labels", opts.labels_path, "IDX label file");
    cmd->add_option("--synthetic-classes", opts.synth_classes,
                    "class count for the synthetic pool");
    cmd->add_option("--synthetic-dim", opts.synth_dim,
                    "feature dimension for the synthetic pool");
    cmd->add_option("--synthetic-per-class", opts.synth_per_class,
                    "samples per class for the synthetic pool");
    cmd->add_option("--synthetic-spread", opts.synth_spread,
                    "cluster standard deviation for the synthetic pool");
    cmd->add_option("--pool-seed", opts.pool_seed,
                    "seed for synthetic pool generation");
}

DataPool make_pool(const PoolOptions& opts) {
    if (!opts.images_path.empty() || !opts.labels_path.empty()) {
        if (opts.images_path.empty() || opts.labels_path.empty())
            throw std::invalid_argument(
                "--images and --labels must be given together");
        return load_idx(opts.images_path, opts.labels_path);
    }
    Rng rng(opts.pool_seed);
    return synthetic_pool(opts.synth_classes, opts.synth_dim,
                          opts.synth_per_class, opts.synth_spread, rng);
}

void atomic_write(const fs::path& path, const std::string& content) {
    const fs::path tmp = path.string() + ".tmp";
    {
        std::ofstream os(tmp, std::ios::trunc | std::ios::binary);
        if (!os) throw FormatError("cannot open for write: " + path.string());
        os << content;
        if (!os) throw FormatError("write failed: " + path.string());
    }
    fs::rename(tmp, path);
}

json summary_json(const RunSummary& s) {
    json j;
    j["best_accuracy"] = s.best_accuracy;
    j["best_round"] = s.best_round;
    j["total_params_exchanged"] = s.total_params_exchanged;
    if (s.rounds_to_threshold) {
        j["rounds_to_threshold"] = *s.rounds_to_threshold;
        j["params_to_threshold"] = *s.params_to_threshold;
    } else {
        j["rounds_to_threshold"] = nullptr;
        j["params_to_threshold"] = nullptr;
    }
    return j;
}

json stats_json(const MultiRunStats& m) {
    json j;
    j["num_runs"] = m.num_runs;
    j["threshold_exclusions"] = m.threshold_exclusions;
    j["best_accuracy"] = {{"avg", m.best_accuracy.avg},
                          {"stdev", m.best_accuracy.stdev}};
    j["rounds_to_threshold"] = {{"avg", m.rounds_to_threshold.avg},
                                {"stdev", m.rounds_to_threshold.stdev}};
    j["total_params_exchanged"] = {{"avg", m.total_params_exchanged.avg},
                                   {"stdev", m.total_params_exchanged.stdev}};
    j["params_to_threshold"] = {{"avg", m.params_to_threshold.avg},
                                {"stdev", m.params_to_threshold.stdev}};
    return j;
}

// A labelled group of runs sharing one config (one sweep point or variant).
struct RunGroup {
    std::string label;
    ProtocolConfig config;
    std::vector<std::uint64_t> seeds;
    std::vector<RunSummary> summaries;  // filled in seed order
};

// Executes every (group, seed) pair, at most `jobs` at a time. Each run writes
// its own records file; summaries land back in the group in seed order.
void execute_groups(std::vector<RunGroup>& groups, const DataPool& pool,
                    const fs::path& out_dir, double threshold,
                    std::size_t jobs) {
    struct Task {
        std::size_t group;
        std::size_t slot;
        std::uint64_t seed;
    };
    std::vector<Task> tasks;
    for (std::size_t g = 0; g < groups.size(); ++g) {
        groups[g].summaries.resize(groups[g].seeds.size());
        for (std::size_t s = 0; s < groups[g].seeds.size(); ++s)
            tasks.push_back({g, s, groups[g].seeds[s]});
    }

    std::atomic<std::size_t> next{0};
    std::mutex error_mutex;
    std::exception_ptr first_error;
    auto worker = [&]() {
        for (;;) {
            const std::size_t i = next.fetch_add(1);
            if (i >= tasks.size()) return;
            const Task& task = tasks[i];
            try {
                RunGroup& group = groups[task.group];
                ProtocolConfig config = group.config;
                config.seed = task.seed;
                const auto result = run_experiment(config, pool);
                const std::string stem =
                    group.label + "_seed" + std::to_string(task.seed);
                write_round_records((out_dir / (stem + "_rounds.csv")).string(),
                                    result.records);
                group.summaries[task.slot] =
                    summarize_run(result.records, threshold);
            } catch (...) {
                std::scoped_lock lock(error_mutex);
                if (!first_error) first_error = std::current_exception();
            }
        }
    };

    const std::size_t n = std::max<std::size_t>(
        1, std::min(jobs, std::max<std::size_t>(tasks.size(), 1)));
    std::vector<std::thread> threads;
    for (std::size_t i = 0; i < n; ++i) threads.emplace_back(worker);
    for (auto& t : threads) t.join();
    if (first_error) std::rethrow_exception(first_error);
}

std::string cell(const std::optional<double>& v, int precision = 4) {
    if (!v) return "---";
    std::ostringstream os;
    os << std::fixed << std::setprecision(precision) << *v;
    return os.str();
}

// One header row plus one row per group: Table-10-style comparison text.
std::string comparison_table(const std::vector<RunGroup>& groups,
                             double threshold,
                             const std::optional<std::string>& cost_baseline) {
    std::map<std::string, MultiRunStats> stats;
    for (const auto& g : groups) stats[g.label] = summarize_runs(g.summaries);

    std::map<std::string, std::optional<double>> ratios;
    if (cost_baseline) {
        const auto& base = stats.at(*cost_baseline);
        if (base.threshold_exclusions < base.num_runs)
            ratios = relative_cost(stats, *cost_baseline);
    }

    std::ostringstream os;
    os << "config  best_acc_avg  best_acc_std  rounds_to_" << threshold
       << "  params_to_threshold  relative_cost\n";
    for (const auto& g : groups) {
        const auto& m = stats.at(g.label);
        const bool reached = m.threshold_exclusions < m.num_runs;
        std::optional<double> rounds, params, ratio;
        if (reached) {
            rounds = m.rounds_to_threshold.avg;
            params = m.params_to_threshold.avg;
        }
        if (const auto it = ratios.find(g.label); it != ratios.end())
            ratio = it->second;
        os << g.label << "  " << cell(m.best_accuracy.avg) << "  "
           << cell(m.best_accuracy.stdev) << "  " << cell(rounds, 1) << "  "
           << cell(params, 0) << "  " << cell(ratio) << "\n";
    }
    return os.str();
}

json groups_json(const std::vector<RunGroup>& groups, double threshold,
                 const std::optional<std::string>& cost_baseline) {
    std::map<std::string, MultiRunStats> stats;
    for (const auto& g : groups) stats[g.label] = summarize_runs(g.summaries);
    std::map<std::string, std::optional<double>> ratios;
    if (cost_baseline) {
        const auto& base = stats.at(*cost_baseline);
        if (base.threshold_exclusions < base.num_runs)
            ratios = relative_cost(stats, *cost_baseline);
    }

    json j;
    j["threshold"] = threshold;
    for (const auto& g : groups) {
        json entry = stats_json(stats.at(g.label));
        json runs = json::array();
        for (std::size_t i = 0; i < g.seeds.size(); ++i) {
            json r = summary_json(g.summaries[i]);
            r["seed"] = g.seeds[i];
            runs.push_back(std::move(r));
        }
        entry["runs"] = std::move(runs);
        if (const auto it = ratios.find(g.label); it != ratios.end()) {
            if (it->second)
                entry["relative_cost"] = *it->second;
            else
                entry["relative_cost"] = nullptr;
        }
        j["configs"][g.label] = std::move(entry);
    }
    return j;
}

std::vector<std::uint64_t> parse_seed_list(const std::string& text) {
    std::vector<std::uint64_t> seeds;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ','))
        if (!item.empty()) seeds.push_back(std::stoull(item));
    if (seeds.empty()) throw std::invalid_argument("empty seed list");
    return seeds;
}

// "field=v1;v2;v3" -> (field, [v1, v2, v3]); values keep their raw text so
// list-valued fields (which use commas internally) stay intact.
std::pair<std::string, std::vector<std::string>> parse_sweep(
    const std::string& text) {
    const auto eq = text.find('=');
    if (eq == std::string::npos || eq == 0)
        throw std::invalid_argument("sweep must look like field=v1;v2: " + text);
    std::vector<std::string> values;
    std::stringstream ss(text.substr(eq + 1));
    std::string item;
    while (std::getline(ss, item, ';'))
        if (!item.empty()) values.push_back(item);
    if (values.empty())
        throw std::invalid_argument("sweep has no values: " + text);
    return {text.substr(0, eq), values};
}

struct CommonOptions {
    std::string config_path;
    std::string output_dir = ".";
    std::string seeds_text;
    std::string variant_override;
    double threshold = 0.85;
    std::size_t jobs = 1;
};

void add_common_options(CLI::App* cmd, CommonOptions& opts, bool with_jobs) {
    cmd->add_option("-c,--config", opts.config_path, "config file (key = value)");
    cmd->add_option("-o,--output-dir", opts.output_dir, "output directory");
    cmd->add_option("--seeds", opts.seeds_text,
                    "comma-separated seed list overriding the config seed");
    cmd->add_option("--variant", opts.variant_override,
                    "variant override: fedavg, tefl, afl, twafl");
    cmd->add_option("--threshold", opts.threshold,
                    "target test accuracy for cost accounting");
    if (with_jobs)
        cmd->add_option("-j,--jobs", opts.jobs, "number of parallel runs");
}

std::map<std::string, std::string> base_kv(const CommonOptions& opts) {
    std::map<std::string, std::string> kv;
    if (!opts.config_path.empty()) kv = read_kv_file(opts.config_path);
    if (!opts.variant_override.empty()) kv["variant"] = opts.variant_override;
    return kv;
}

std::vector<std::uint64_t> seeds_for(const CommonOptions& opts,
                                     const ProtocolConfig& config) {
    if (!opts.seeds_text.empty()) return parse_seed_list(opts.seeds_text);
    return {config.seed};
}

int cmd_run(const CommonOptions& opts, const PoolOptions& pool_opts) {
    const auto kv = base_kv(opts);
    ProtocolConfig config = parse_config(kv);
    const auto seeds = seeds_for(opts, config);
    const DataPool pool = make_pool(pool_opts);
    const fs::path out_dir(opts.output_dir);
    fs::create_directories(out_dir);

    std::vector<RunGroup> groups = {{variant_name(config.variant), config,
                                     seeds, {}}};
    execute_groups(groups, pool, out_dir, opts.threshold, opts.jobs);
    write_config((out_dir / "config_used.cfg").string(), config);

    const json j = groups_json(groups, opts.threshold, std::nullopt);
    atomic_write(out_dir / "summary.json", j.dump(2) + "\n");
    atomic_write(out_dir / "summary.txt",
                 comparison_table(groups, opts.threshold, std::nullopt));
    std::cout << comparison_table(groups, opts.threshold, std::nullopt);
    return 0;
}

int cmd_batch(const CommonOptions& opts, const PoolOptions& pool_opts,
              const std::vector<std::string>& sweep_texts) {
    const auto kv = base_kv(opts);

    // Cross product of all sweep axes, in the order given on the command line.
    std::vector<std::pair<std::string, std::vector<std::string>>> sweeps;
    for (const auto& text : sweep_texts) sweeps.push_back(parse_sweep(text));
    std::vector<std::map<std::string, std::string>> points = {kv};
    std::vector<std::string> labels = {""};
    for (const auto& [field, values] : sweeps) {
        std::vector<std::map<std::string, std::string>> next_points;
        std::vector<std::string> next_labels;
        for (std::size_t i = 0; i < points.size(); ++i) {
            for (const auto& value : values) {
                auto p = points[i];
                p[field] = value;
                next_points.push_back(std::move(p));
                std::string v = value;
                std::replace(v.begin(), v.end(), ',', '-');
                next_labels.push_back(labels[i] + (labels[i].empty() ? "" : "_") +
                                      field + "=" + v);
            }
        }
        points = std::move(next_points);
        labels = std::move(next_labels);
    }

    std::vector<RunGroup> groups;
    for (std::size_t i = 0; i < points.size(); ++i) {
        RunGroup g;
        g.config = parse_config(points[i]);
        g.label = labels[i].empty() ? variant_name(g.config.variant) : labels[i];
        g.seeds = seeds_for(opts, g.config);
        groups.push_back(std::move(g));
    }

    const DataPool pool = make_pool(pool_opts);
    const fs::path out_dir(opts.output_dir);
    fs::create_directories(out_dir);
    execute_groups(groups, pool, out_dir, opts.threshold, opts.jobs);

    const json j = groups_json(groups, opts.threshold, std::nullopt);
    atomic_write(out_dir / "summary.json", j.dump(2) + "\n");
    atomic_write(out_dir / "summary.txt",
                 comparison_table(groups, opts.threshold, std::nullopt));
    std::cout << comparison_table(groups, opts.threshold, std::nullopt);
    return 0;
}

int cmd_compare(const CommonOptions& opts, const PoolOptions& pool_opts) {
    const auto kv = base_kv(opts);
    std::vector<RunGroup> groups;
    for (const char* name : {"fedavg", "tefl", "afl", "twafl"}) {
        auto point = kv;
        point["variant"] = name;
        point.erase("a");  // each variant applies its own time-base rule
        RunGroup g;
        g.config = parse_config(point);
        g.label = name;
        g.seeds = seeds_for(opts, g.config);
        groups.push_back(std::move(g));
    }

    const DataPool pool = make_pool(pool_opts);
    const fs::path out_dir(opts.output_dir);
    fs::create_directories(out_dir);
    execute_groups(groups, pool, out_dir, opts.threshold, opts.jobs);

    const std::optional<std::string> baseline = "twafl";
    const json j = groups_json(groups, opts.threshold, baseline);
    atomic_write(out_dir / "comparison.json", j.dump(2) + "\n");
    atomic_write(out_dir / "comparison.txt",
                 comparison_table(groups, opts.threshold, baseline));
    std::cout << comparison_table(groups, opts.threshold, baseline);
    return 0;
}

int cmd_partition(const CommonOptions& opts, const PoolOptions& pool_opts) {
    const auto kv = base_kv(opts);
    const ProtocolConfig config = parse_config(kv);
    const auto seeds = seeds_for(opts, config);
    const DataPool pool = make_pool(pool_opts);
    const fs::path out_dir(opts.output_dir);
    fs::create_directories(out_dir);

    for (const std::uint64_t seed : seeds) {
        Rng split_rng = derive_rng(seed, stream::kSplit);
        const auto [train, test] = split_pool(pool, config.test_fraction,
                                              split_rng);
        PartitionSpec base;
        base.labels.resize(pool.num_classes);
        std::iota(base.labels.begin(), base.labels.end(), 0);
        base.s_min = config.s_min;
        base.s_max = config.s_max;
        base.n_c = config.nc_choices.front();
        Rng part_rng = derive_rng(seed, stream::kPartition);
        const auto clients = generate_all_clients(
            train, base, config.nc_choices, config.num_clients, part_rng);
        write_partition_table(
            (out_dir / ("partition_seed" + std::to_string(seed) + ".csv"))
                .string(),
            clients);
        std::size_t total = 0;
        for (const auto& c : clients) total += c.n_k();
        std::cout << "seed " << seed << ": " << clients.size() << " clients, "
                  << total << " samples (train pool " << train.size() << ")\n";
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Deterministic simulator of communication-efficient federated "
                 "learning with layer-wise asynchronous updates and temporally "
                 "weighted aggregation"};
    app.require_subcommand(1);

    CommonOptions run_opts, batch_opts, compare_opts, part_opts;
    PoolOptions run_pool, batch_pool, compare_pool, part_pool;
    std::vector<std::string> sweep_texts;

    auto* run = app.add_subcommand("run", "run one configuration");
    add_common_options(run, run_opts, true);
    add_pool_options(run, run_pool);

    auto* batch = app.add_subcommand("batch", "run a sweep x seed batch");
    add_common_options(batch, batch_opts, true);
    add_pool_options(batch, batch_pool);
    batch->add_option("--sweep", sweep_texts,
                      "sweep axis as field=v1;v2;v3 (repeatable)");

    auto* compare =
        app.add_subcommand("compare", "compare the four protocol variants");
    add_common_options(compare, compare_opts, true);
    add_pool_options(compare, compare_pool);

    auto* partition =
        app.add_subcommand("partition", "export the client partition table");
    add_common_options(partition, part_opts, false);
    add_pool_options(partition, part_pool);

    CLI11_PARSE(app, argc, argv);

    try {
        if (run->parsed()) return cmd_run(run_opts, run_pool);
        if (batch->parsed()) return cmd_batch(batch_opts, batch_pool, sweep_texts);
        if (compare->parsed()) return cmd_compare(compare_opts, compare_pool);
        if (partition->parsed()) return cmd_partition(part_opts, part_pool);
    } catch (const std::invalid_argument& e) {
        std::cerr << "error (invalid configuration): " << e.what() << "\n";
        return 2;
    } catch (const FormatError& e) {
        std::cerr << "error (file format/I-O): " << e.what() << "\n";
        return 3;
    } catch (const fs::filesystem_error& e) {
        std::cerr << "error (file system): " << e.what() << "\n";
        return 3;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
