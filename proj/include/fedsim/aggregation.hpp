#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "fedsim/params.hpp"

namespace fedsim {

// The server's latest copy of one client's model with its upload timestamps.
struct ClientUploadView {
    std::size_t client_id = 0;
    const LayeredParams* params = nullptr;
    std::size_t timestamp_g = 0;  // round of last shallow upload
    std::size_t timestamp_s = 0;  // round of last full upload
    std::size_t n_k = 0;          // local sample count
};

// Sample-size-weighted mean over the selected partition: sum (n_k/n) * params.
LayeredParams fedavg_aggregate(std::span<const ClientUploadView> views,
                               Selector selector);

// a^{-(t - timestamp)}; in (0,1] for a > 1, identically 1 for a = 1.
double temporal_weight(double a, std::size_t t, std::size_t timestamp);

// Staleness-discounted weighted mean. Raw weight per view is
// (n_k/n) * a^{-(t - ts_k)}, where each partition uses its own timestamp
// (timestamp_g for shallow blocks, timestamp_s for deep). When normalize is
// set the raw weights are rescaled to sum to 1; otherwise they are applied
// literally.
LayeredParams temporally_weighted_aggregate(std::span<const ClientUploadView> views,
                                            Selector selector, std::size_t t,
                                            double a, bool normalize = true);

}  // namespace fedsim
