#pragma once

#include <map>
#include <string>

#include "fedsim/protocol.hpp"

namespace fedsim {

// Flat key=value config files ('#' starts a comment). Keys mirror the
// ProtocolConfig fields: variant, K, C, a, rounds_in_loop, fe, B, E, eta,
// total_rounds, normalize_weights, seed, hidden_dims, model_split_index,
// nc_choices, s_min, s_max, test_fraction. Unknown keys are rejected with
// the field name. fe selects the flag positions via es_rounds_for_freq; the
// variant rules (full-loop flags for FedAVG/TEFL, a=1 for FedAVG/AFL) are
// applied after parsing.
ProtocolConfig parse_config(const std::map<std::string, std::string>& kv);
ProtocolConfig load_config(const std::string& path);

std::map<std::string, std::string> config_to_kv(const ProtocolConfig& config);
void write_config(const std::string& path, const ProtocolConfig& config);

std::map<std::string, std::string> read_kv_file(const std::string& path);

}  // namespace fedsim
