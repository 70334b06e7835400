#include "fedsim/config.hpp"

#include <filesystem>
#include <fstream>
#include <iomanip>
#include <sstream>

#include "fedsim/errors.hpp"

namespace fedsim {

namespace {

std::string trim(const std::string& s) {
    const auto begin = s.find_first_not_of(" \t\r");
    if (begin == std::string::npos) return "";
    const auto end = s.find_last_not_of(" \t\r");
    return s.substr(begin, end - begin + 1);
}

std::vector<std::size_t> parse_size_list(const std::string& value,
                                         const std::string& field) {
    std::vector<std::size_t> out;
    std::stringstream ss(value);
    std::string item;
    while (std::getline(ss, item, ',')) {
        item = trim(item);
        if (item.empty()) continue;
        try {
            out.push_back(std::stoull(item));
        } catch (const std::exception&) {
            throw std::invalid_argument("config: bad value for '" + field + "'");
        }
    }
    if (out.empty())
        throw std::invalid_argument("config: empty list for '" + field + "'");
    return out;
}

double parse_real(const std::string& value, const std::string& field) {
    // symbolic values for the time base
    if (value == "e") return 2.718281828459045;
    if (value == "e/2") return 2.718281828459045 / 2.0;
    try {
        return std::stod(value);
    } catch (const std::exception&) {
        throw std::invalid_argument("config: bad value for '" + field + "'");
    }
}

std::size_t parse_count(const std::string& value, const std::string& field) {
    try {
        return std::stoull(value);
    } catch (const std::exception&) {
        throw std::invalid_argument("config: bad value for '" + field + "'");
    }
}

bool parse_flag(const std::string& value, const std::string& field) {
    if (value == "true" || value == "1") return true;
    if (value == "false" || value == "0") return false;
    throw std::invalid_argument("config: bad value for '" + field + "'");
}

}  // namespace

ProtocolConfig parse_config(const std::map<std::string, std::string>& kv) {
    ProtocolConfig c;
    std::size_t fe = 5;
    bool explicit_a = false;
    for (const auto& [key, value] : kv) {
        if (key == "variant") c.variant = variant_from_name(value);
        else if (key == "K") c.num_clients = parse_count(value, key);
        else if (key == "C") c.client_fraction = parse_real(value, key);
        else if (key == "a") { c.time_base = parse_real(value, key); explicit_a = true; }
        else if (key == "rounds_in_loop") c.rounds_in_loop = parse_count(value, key);
        else if (key == "fe") fe = parse_count(value, key);
        else if (key == "B") c.batch_size = parse_count(value, key);
        else if (key == "E") c.epochs = parse_count(value, key);
        else if (key == "eta") c.eta = parse_real(value, key);
        else if (key == "total_rounds") c.total_rounds = parse_count(value, key);
        else if (key == "normalize_weights") c.normalize_weights = parse_flag(value, key);
        else if (key == "seed") c.seed = parse_count(value, key);
        else if (key == "hidden_dims") c.hidden_dims = parse_size_list(value, key);
        else if (key == "model_split_index") c.model_split_index = parse_count(value, key);
        else if (key == "nc_choices") c.nc_choices = parse_size_list(value, key);
        else if (key == "s_min") c.s_min = parse_count(value, key);
        else if (key == "s_max") c.s_max = parse_count(value, key);
        else if (key == "test_fraction") c.test_fraction = parse_real(value, key);
        else throw std::invalid_argument("config: unknown field '" + key + "'");
    }
    if (!variant_is_temporal(c.variant) && explicit_a && c.time_base != 1.0)
        throw std::invalid_argument("config: field 'a' must be 1 for FedAVG/AFL");
    c.apply_variant_rules(fe);
    c.validate();
    return c;
}

std::map<std::string, std::string> read_kv_file(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw FormatError("cannot open config: " + path);
    std::map<std::string, std::string> kv;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(is, line)) {
        ++lineno;
        if (const auto hash = line.find('#'); hash != std::string::npos)
            line = line.substr(0, hash);
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw FormatError(path + ":" + std::to_string(lineno) +
                              ": expected key = value");
        kv[trim(line.substr(0, eq))] = trim(line.substr(eq + 1));
    }
    return kv;
}

ProtocolConfig load_config(const std::string& path) {
    return parse_config(read_kv_file(path));
}

std::map<std::string, std::string> config_to_kv(const ProtocolConfig& config) {
    std::map<std::string, std::string> kv;
    auto list = [](const std::vector<std::size_t>& xs) {
        std::string s;
        for (std::size_t i = 0; i < xs.size(); ++i)
            s += (i ? "," : "") + std::to_string(xs[i]);
        return s;
    };
    auto real = [](double v) {
        std::ostringstream os;
        os << std::setprecision(17) << v;
        return os.str();
    };
    kv["variant"] = variant_name(config.variant);
    kv["K"] = std::to_string(config.num_clients);
    kv["C"] = real(config.client_fraction);
    kv["a"] = real(config.time_base);
    kv["rounds_in_loop"] = std::to_string(config.rounds_in_loop);
    kv["fe"] = std::to_string(config.es_rounds.size());
    kv["B"] = std::to_string(config.batch_size);
    kv["E"] = std::to_string(config.epochs);
    kv["eta"] = real(config.eta);
    kv["total_rounds"] = std::to_string(config.total_rounds);
    kv["normalize_weights"] = config.normalize_weights ? "true" : "false";
    kv["seed"] = std::to_string(config.seed);
    kv["hidden_dims"] = list(config.hidden_dims);
    kv["model_split_index"] = std::to_string(config.model_split_index);
    kv["nc_choices"] = list(config.nc_choices);
    kv["s_min"] = std::to_string(config.s_min);
    kv["s_max"] = std::to_string(config.s_max);
    kv["test_fraction"] = real(config.test_fraction);
    return kv;
}

void write_config(const std::string& path, const ProtocolConfig& config) {
    const std::string tmp = path + ".tmp";
    {
        std::ofstream os(tmp, std::ios::trunc);
        if (!os) throw FormatError("cannot open for write: " + path);
        for (const auto& [k, v] : config_to_kv(config)) os << k << " = " << v << '\n';
        if (!os) throw FormatError("write failed: " + path);
    }
    std::filesystem::rename(tmp, path);
}

}  // namespace fedsim
