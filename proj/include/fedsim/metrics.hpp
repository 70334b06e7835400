#pragma once

#include <cstddef>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "fedsim/data.hpp"
#include "fedsim/model.hpp"

namespace fedsim {

struct RoundRecord {
    std::size_t round = 0;
    bool flag = false;
    std::vector<std::size_t> participants;
    double test_accuracy = 0.0;
    double global_loss = 0.0;
    std::size_t params_down = 0;
    std::size_t params_up = 0;
};

struct RoundCost {
    std::size_t down = 0;
    std::size_t up = 0;
};

// Parameter elements exchanged in one round: m * (S_g + S_s) per direction on
// full rounds, m * S_g on shallow-only rounds.
RoundCost round_cost(bool flag, std::size_t shallow_size, std::size_t deep_size,
                     std::size_t num_participants);

// n_k/n-weighted mean of per-client losses on their local data.
double global_loss(const ModelSpec& spec, const LayeredParams& central,
                   const DataPool& pool, std::span<const ClientDataset> clients);

// First round whose accuracy reaches the threshold; nullopt if never.
std::optional<std::size_t> rounds_to_accuracy(std::span<const RoundRecord> records,
                                              double threshold);

struct RunSummary {
    double best_accuracy = 0.0;
    std::size_t best_round = 0;
    std::optional<std::size_t> rounds_to_threshold;
    std::size_t total_params_exchanged = 0;   // down + up over all rounds
    std::optional<std::size_t> params_to_threshold;  // down + up through the threshold round
};

RunSummary summarize_run(std::span<const RoundRecord> records, double threshold);

struct FieldStats {
    double avg = 0.0;
    double stdev = 0.0;  // sample stdev, n-1 denominator
};

struct MultiRunStats {
    FieldStats best_accuracy;
    FieldStats rounds_to_threshold;
    FieldStats total_params_exchanged;
    FieldStats params_to_threshold;
    std::size_t num_runs = 0;
    std::size_t threshold_exclusions = 0;  // runs that never reached it
};

MultiRunStats summarize_runs(std::span<const RunSummary> summaries);

// Mean params-to-threshold per variant divided by the baseline's; absent when
// a variant never reaches the threshold in any run.
std::map<std::string, std::optional<double>> relative_cost(
    const std::map<std::string, MultiRunStats>& per_variant,
    const std::string& baseline_variant);

// CSV emitters; writes are atomic (temp file + rename).
void write_round_records(const std::string& path,
                         std::span<const RoundRecord> records);
std::vector<RoundRecord> read_round_records(const std::string& path);

}  // namespace fedsim
