#include "fedsim/protocol.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "fedsim/errors.hpp"

namespace fedsim {

std::string variant_name(Variant v) {
    switch (v) {
        case Variant::FedAvg: return "fedavg";
        case Variant::Tefl: return "tefl";
        case Variant::Afl: return "afl";
        case Variant::Twafl: return "twafl";
    }
    return "?";
}

Variant variant_from_name(const std::string& name) {
    if (name == "fedavg") return Variant::FedAvg;
    if (name == "tefl") return Variant::Tefl;
    if (name == "afl") return Variant::Afl;
    if (name == "twafl") return Variant::Twafl;
    throw std::invalid_argument("unknown variant: " + name);
}

bool variant_is_async(Variant v) {
    return v == Variant::Afl || v == Variant::Twafl;
}

bool variant_is_temporal(Variant v) {
    return v == Variant::Tefl || v == Variant::Twafl;
}

void ProtocolConfig::apply_variant_rules(std::size_t fe) {
    es_rounds = variant_is_async(variant) ? es_rounds_for_freq(fe, rounds_in_loop)
                                          : es_rounds_for_freq(rounds_in_loop, rounds_in_loop);
    if (!variant_is_temporal(variant)) time_base = 1.0;
}

void ProtocolConfig::validate() const {
    if (num_clients < 1) throw std::invalid_argument("config: K must be >= 1");
    if (client_fraction <= 0.0 || client_fraction > 1.0)
        throw std::invalid_argument("config: C must be in (0, 1]");
    if (time_base <= 0.0) throw std::invalid_argument("config: a must be > 0");
    if (rounds_in_loop < 1)
        throw std::invalid_argument("config: rounds_in_loop must be >= 1");
    if (es_rounds.empty())
        throw std::invalid_argument("config: es_rounds must be non-empty");
    for (std::size_t pos : es_rounds)
        if (pos >= rounds_in_loop)
            throw std::invalid_argument("config: es_rounds position out of range");
    if (!variant_is_async(variant) && es_rounds.size() != rounds_in_loop)
        throw std::invalid_argument(
            "config: synchronous variants require full-loop es_rounds");
    if (!variant_is_temporal(variant) && time_base != 1.0)
        throw std::invalid_argument("config: FedAVG/AFL require a = 1");
    if (batch_size < 1 || epochs < 1)
        throw std::invalid_argument("config: B and E must be >= 1");
    if (eta < 0.0) throw std::invalid_argument("config: eta must be >= 0");
    if (hidden_dims.empty())
        throw std::invalid_argument("config: hidden_dims must be non-empty");
    if (model_split_index < 1 || model_split_index > hidden_dims.size())
        throw std::invalid_argument("config: model_split_index out of range");
    if (nc_choices.empty())
        throw std::invalid_argument("config: nc_choices must be non-empty");
    if (s_min < 1 || s_min > s_max)
        throw std::invalid_argument("config: need 1 <= s_min <= s_max");
    if (test_fraction < 0.0 || test_fraction >= 1.0)
        throw std::invalid_argument("config: test_fraction must be in [0, 1)");
}

bool flag_for_round(std::size_t t, const ProtocolConfig& config) {
    return config.es_rounds.count(t % config.rounds_in_loop) > 0;
}

std::set<std::size_t> es_rounds_for_freq(std::size_t fe, std::size_t T) {
    if (fe < 1 || fe > T)
        throw std::invalid_argument("es_rounds_for_freq: need 1 <= fe <= T");
    std::set<std::size_t> out;
    out.insert(0);  // the loop-final round, t mod T == 0
    for (std::size_t i = 1; i < fe; ++i) out.insert(T - i);
    return out;
}

std::vector<std::size_t> select_clients(std::size_t num_clients, double fraction,
                                        Rng& rng) {
    if (fraction <= 0.0 || fraction > 1.0)
        throw std::invalid_argument("select_clients: C must be in (0, 1]");
    const std::size_t m = std::max<std::size_t>(
        std::size_t(std::llround(fraction * double(num_clients))), 1);
    std::vector<std::size_t> ids(num_clients);
    std::iota(ids.begin(), ids.end(), 0);
    std::vector<std::size_t> chosen;
    std::sample(ids.begin(), ids.end(), std::back_inserter(chosen), m, rng);
    return chosen;  // std::sample preserves ascending order
}

std::size_t ParamTransfer::element_count() const {
    std::size_t n = 0;
    for (const auto& b : blocks) n += b.size();
    return n;
}

ParamTransfer download_for_flag(const LayeredParams& central, bool flag) {
    ParamTransfer t;
    t.full = flag;
    if (flag) {
        t.blocks = central.blocks;
        t.split_index = central.split_index;
    } else {
        t.blocks.assign(central.blocks.begin(),
                        central.blocks.begin() + central.split_index);
    }
    return t;
}

ParamTransfer client_update(ClientLocalState& state, const ParamTransfer& downloaded,
                            bool flag, const ModelSpec& spec, const DataPool& pool,
                            const ProtocolConfig& config, Rng& rng) {
    if (downloaded.full != flag)
        throw ShapeError("client_update: downloaded partition does not match flag");
    if (state.dataset.n_k() == 0)
        throw std::invalid_argument("client_update: empty client dataset");

    if (flag) {
        state.retained.blocks = downloaded.blocks;
        state.retained.split_index = downloaded.split_index;
    } else {
        if (downloaded.blocks.size() != state.retained.split_index)
            throw ShapeError("client_update: shallow block count mismatch");
        std::copy(downloaded.blocks.begin(), downloaded.blocks.end(),
                  state.retained.blocks.begin());
    }

    // The flag governs transfer only; local SGD always trains all layers.
    const Batch local = pool.gather(state.dataset.sample_indices);
    state.retained = client_sgd(spec, state.retained, local, config.batch_size,
                                config.epochs, config.eta, rng);

    ParamTransfer up;
    up.full = flag;
    if (flag) {
        up.blocks = state.retained.blocks;
        up.split_index = state.retained.split_index;
    } else {
        up.blocks.assign(state.retained.blocks.begin(),
                         state.retained.blocks.begin() + state.retained.split_index);
    }
    return up;
}

namespace {

std::vector<ClientUploadView> all_client_views(const ServerState& server) {
    std::vector<ClientUploadView> views;
    views.reserve(server.client_views.size());
    for (std::size_t k = 0; k < server.client_views.size(); ++k) {
        const auto& v = server.client_views[k];
        views.push_back({k, &v.params, v.timestamp_g, v.timestamp_s, v.n_k});
    }
    return views;
}

}  // namespace

RoundRecord run_round(ServerState& server, std::vector<ClientLocalState>& clients,
                      const ModelSpec& spec, const DataPool& train_pool,
                      const DataPool& test_pool, const ProtocolConfig& config) {
    const std::size_t t = server.round + 1;
    const bool flag = flag_for_round(t, config);

    Rng select_rng = derive_rng(config.seed, stream::kSelect, t);
    const std::vector<std::size_t> participants =
        select_clients(config.num_clients, config.client_fraction, select_rng);

    for (std::size_t k : participants) {
        Rng client_rng = derive_rng(config.seed, stream::kClient, t, k);
        const ParamTransfer down = download_for_flag(server.central, flag);
        const ParamTransfer up =
            client_update(clients[k], down, flag, spec, train_pool, config, client_rng);
        auto& view = server.client_views[k];
        if (flag) {
            view.params.blocks = up.blocks;
            view.params.split_index = up.split_index;
            view.timestamp_g = t;
            view.timestamp_s = t;
        } else {
            std::copy(up.blocks.begin(), up.blocks.end(), view.params.blocks.begin());
            view.timestamp_g = t;
        }
    }

    const auto views = all_client_views(server);
    const double a = config.time_base;
    auto aggregate = [&](Selector sel) {
        if (variant_is_temporal(config.variant))
            return temporally_weighted_aggregate(views, sel, t, a,
                                                 config.normalize_weights);
        return fedavg_aggregate(views, sel);
    };

    LayeredParams next_central = server.central;
    {
        const LayeredParams shallow_agg = aggregate(Selector::Shallow);
        std::copy(shallow_agg.blocks.begin(),
                  shallow_agg.blocks.begin() + shallow_agg.split_index,
                  next_central.blocks.begin());
    }
    if (flag) {
        const LayeredParams deep_agg = aggregate(Selector::Deep);
        std::copy(deep_agg.blocks.begin() + deep_agg.split_index,
                  deep_agg.blocks.end(),
                  next_central.blocks.begin() + next_central.split_index);
    }
    server.central = std::move(next_central);
    server.round = t;

    RoundRecord rec;
    rec.round = t;
    rec.flag = flag;
    rec.participants = participants;
    rec.test_accuracy = test_pool.size() == 0
                            ? 0.0
                            : batch_accuracy(spec, server.central, test_pool.as_batch());
    std::vector<ClientDataset> datasets;
    datasets.reserve(clients.size());
    for (const auto& c : clients) datasets.push_back(c.dataset);
    rec.global_loss = global_loss(spec, server.central, train_pool, datasets);
    const auto sizes = partition_sizes(server.central);
    const RoundCost cost =
        round_cost(flag, sizes.shallow, sizes.deep, participants.size());
    rec.params_down = cost.down;
    rec.params_up = cost.up;
    return rec;
}

ExperimentResult run_experiment(const ProtocolConfig& config, const DataPool& pool) {
    config.validate();
    pool.validate();

    Rng split_rng = derive_rng(config.seed, stream::kSplit);
    auto [train_pool, test_pool] = split_pool(pool, config.test_fraction, split_rng);

    PartitionSpec base;
    base.labels.resize(pool.num_classes);
    std::iota(base.labels.begin(), base.labels.end(), 0);
    base.s_min = config.s_min;
    base.s_max = config.s_max;
    base.n_c = config.nc_choices.front();
    Rng part_rng = derive_rng(config.seed, stream::kPartition);
    std::vector<ClientDataset> partition = generate_all_clients(
        train_pool, base, config.nc_choices, config.num_clients, part_rng);

    const ModelSpec spec = dense_spec(pool.input_dim, config.hidden_dims,
                                      pool.num_classes, config.model_split_index);
    Rng init_rng = derive_rng(config.seed, stream::kInit);
    LayeredParams initial = init_params(spec, init_rng);

    ExperimentResult result;
    result.spec = spec;
    result.partition = partition;
    result.server.central = initial;
    result.server.client_views.resize(config.num_clients);
    std::vector<ClientLocalState> clients(config.num_clients);
    for (std::size_t k = 0; k < config.num_clients; ++k) {
        result.server.client_views[k] = {initial, 0, 0, partition[k].n_k()};
        clients[k] = {k, initial, partition[k]};
    }

    result.records.reserve(config.total_rounds);
    for (std::size_t r = 0; r < config.total_rounds; ++r)
        result.records.push_back(
            run_round(result.server, clients, spec, train_pool, test_pool, config));
    return result;
}

}  // namespace fedsim
