#pragma once

#include <cstddef>
#include <cstdint>
#include <set>
#include <string>
#include <vector>

#include "fedsim/aggregation.hpp"
#include "fedsim/data.hpp"
#include "fedsim/metrics.hpp"
#include "fedsim/model.hpp"
#include "fedsim/params.hpp"
#include "fedsim/rng.hpp"

namespace fedsim {

enum class Variant { FedAvg, Tefl, Afl, Twafl };

std::string variant_name(Variant v);
Variant variant_from_name(const std::string& name);

// True for the variants that exchange deep layers only on flag rounds.
bool variant_is_async(Variant v);
// True for the variants that discount stale uploads.
bool variant_is_temporal(Variant v);

struct ProtocolConfig {
    Variant variant = Variant::Twafl;

    // Protocol
    std::size_t num_clients = 20;       // K
    double client_fraction = 0.1;       // C
    double time_base = 2.718281828459045 / 2.0;  // a, default e/2
    std::size_t rounds_in_loop = 15;    // T
    std::set<std::size_t> es_rounds;    // loop positions with flag = true
    std::size_t batch_size = 32;        // B
    std::size_t epochs = 5;             // E
    double eta = 0.05;
    std::size_t total_rounds = 200;
    bool normalize_weights = true;
    std::uint64_t seed = 1;

    // Model (dense substitute network)
    std::vector<std::size_t> hidden_dims{32};
    std::size_t model_split_index = 1;  // layer index of the shallow/deep boundary

    // Partitioning
    std::vector<std::size_t> nc_choices{2, 3};
    std::size_t s_min = 1000;
    std::size_t s_max = 1600;
    double test_fraction = 0.2;

    // Fills es_rounds from fe for the async variants, forces full-loop flags
    // for FedAVG/TEFL and a = 1 for FedAVG/AFL.
    void apply_variant_rules(std::size_t fe);
    void validate() const;
};

// flag = (t mod rounds_in_loop) in es_rounds; true means a full-model round.
bool flag_for_round(std::size_t t, const ProtocolConfig& config);

// The last fe positions of a T-round loop, with the loop-final round as
// residue 0: {T-fe+1, ..., T-1, 0}.
std::set<std::size_t> es_rounds_for_freq(std::size_t fe, std::size_t T);

// m = max(round(C*K), 1) distinct clients, uniform; returned sorted.
std::vector<std::size_t> select_clients(std::size_t num_clients, double fraction,
                                        Rng& rng);

struct ServerState {
    std::size_t round = 0;  // t of the last completed round
    LayeredParams central;
    struct View {
        LayeredParams params;  // server's latest copy of this client's model
        std::size_t timestamp_g = 0;
        std::size_t timestamp_s = 0;
        std::size_t n_k = 0;
    };
    std::vector<View> client_views;  // indexed by client id
};

struct ClientLocalState {
    std::size_t client_id = 0;
    LayeredParams retained;  // last full local model; keeps deep layers across
                             // shallow-only rounds
    ClientDataset dataset;
};

// One direction of a transfer: the full model or its shallow blocks only.
struct ParamTransfer {
    bool full = true;
    std::vector<ParamBlock> blocks;
    std::size_t split_index = 0;  // meaningful only when full

    std::size_t element_count() const;
};

ParamTransfer download_for_flag(const LayeredParams& central, bool flag);

// Merges the download into the retained model per the flag, trains all layers
// locally, and returns the upload (full on flag rounds, shallow otherwise).
ParamTransfer client_update(ClientLocalState& state, const ParamTransfer& downloaded,
                            bool flag, const ModelSpec& spec, const DataPool& pool,
                            const ProtocolConfig& config, Rng& rng);

// One communication round: flag, selection, parallel client updates, timestamp
// bookkeeping, per-partition aggregation, evaluation and cost accounting.
RoundRecord run_round(ServerState& server, std::vector<ClientLocalState>& clients,
                      const ModelSpec& spec, const DataPool& train_pool,
                      const DataPool& test_pool, const ProtocolConfig& config);

struct ExperimentResult {
    std::vector<RoundRecord> records;
    ServerState server;
    std::vector<ClientDataset> partition;
    ModelSpec spec;
};

// Full pipeline: seeded test split, Algorithm-4 partitioning, initialization
// and total_rounds rounds. Deterministic under config.seed.
ExperimentResult run_experiment(const ProtocolConfig& config, const DataPool& pool);

}  // namespace fedsim
