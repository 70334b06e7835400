#include "fedsim/aggregation.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "fedsim/errors.hpp"

namespace fedsim {

namespace {

// Canonical ascending-client order, so results do not depend on caller order.
std::vector<ClientUploadView> sorted_views(std::span<const ClientUploadView> views) {
    if (views.empty())
        throw std::invalid_argument("aggregate: empty view list");
    std::vector<ClientUploadView> out(views.begin(), views.end());
    std::sort(out.begin(), out.end(),
              [](const auto& a, const auto& b) { return a.client_id < b.client_id; });
    for (const auto& v : out) {
        if (v.params == nullptr)
            throw std::invalid_argument("aggregate: null params in view");
        if (v.n_k < 1)
            throw std::invalid_argument("aggregate: n_k must be >= 1");
        if (!v.params->same_structure(*out.front().params))
            throw ShapeError("aggregate: view parameter structure mismatch");
    }
    return out;
}

LayeredParams combine_with_weights(const std::vector<ClientUploadView>& views,
                                   const std::vector<double>& weights,
                                   Selector selector) {
    std::vector<std::pair<double, const LayeredParams*>> terms;
    terms.reserve(views.size());
    for (std::size_t i = 0; i < views.size(); ++i)
        terms.emplace_back(weights[i], views[i].params);
    return linear_combine(terms, selector);
}

}  // namespace

LayeredParams fedavg_aggregate(std::span<const ClientUploadView> views,
                               Selector selector) {
    const auto sorted = sorted_views(views);
    double n = 0.0;
    for (const auto& v : sorted) n += double(v.n_k);
    std::vector<double> weights;
    weights.reserve(sorted.size());
    for (const auto& v : sorted) weights.push_back(double(v.n_k) / n);
    return combine_with_weights(sorted, weights, selector);
}

double temporal_weight(double a, std::size_t t, std::size_t timestamp) {
    if (a <= 0.0) throw std::invalid_argument("temporal_weight: a must be > 0");
    if (timestamp > t)
        throw std::invalid_argument("temporal_weight: timestamp exceeds round");
    return std::pow(a, -double(t - timestamp));
}

LayeredParams temporally_weighted_aggregate(std::span<const ClientUploadView> views,
                                            Selector selector, std::size_t t,
                                            double a, bool normalize) {
    const auto sorted = sorted_views(views);
    double n = 0.0;
    for (const auto& v : sorted) n += double(v.n_k);

    // Each partition is discounted by its own upload timestamp (timestamp_g
    // for shallow blocks, timestamp_s for deep). Raw weight is n_k * factor;
    // the normalized path divides by the raw sum so that all-factors-one
    // reduces to n_k / sum(n_k) bit-for-bit.
    auto weights_for = [&](bool deep) {
        std::vector<double> weights;
        weights.reserve(sorted.size());
        double raw_sum = 0.0;
        for (const auto& v : sorted) {
            const std::size_t ts = deep ? v.timestamp_s : v.timestamp_g;
            const double w = double(v.n_k) * temporal_weight(a, t, ts);
            weights.push_back(w);
            raw_sum += w;
        }
        const double denom = normalize ? raw_sum : n;
        for (auto& w : weights) w /= denom;
        return weights;
    };

    if (selector != Selector::All)
        return combine_with_weights(sorted, weights_for(selector == Selector::Deep),
                                    selector);
    LayeredParams out = combine_with_weights(sorted, weights_for(false),
                                             Selector::Shallow);
    LayeredParams deep = combine_with_weights(sorted, weights_for(true),
                                              Selector::Deep);
    std::move(deep.blocks.begin() + deep.split_index, deep.blocks.end(),
              out.blocks.begin() + out.split_index);
    return out;
}

}  // namespace fedsim
