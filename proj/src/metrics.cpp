#include "fedsim/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <stdexcept>

#include "fedsim/errors.hpp"

namespace fedsim {

RoundCost round_cost(bool flag, std::size_t shallow_size, std::size_t deep_size,
                     std::size_t num_participants) {
    if (shallow_size < 1 || deep_size < 1 || num_participants < 1)
        throw std::invalid_argument("round_cost: sizes and m must be >= 1");
    const std::size_t per_client = flag ? shallow_size + deep_size : shallow_size;
    const std::size_t total = num_participants * per_client;
    return {total, total};
}

double global_loss(const ModelSpec& spec, const LayeredParams& central,
                   const DataPool& pool, std::span<const ClientDataset> clients) {
    if (clients.empty())
        throw std::invalid_argument("global_loss: no clients");
    double n = 0.0;
    for (const auto& c : clients) n += double(c.n_k());
    double loss = 0.0;
    for (const auto& c : clients) {
        const Batch local = pool.gather(c.sample_indices);
        loss += double(c.n_k()) / n * batch_loss(spec, central, local);
    }
    return loss;
}

std::optional<std::size_t> rounds_to_accuracy(std::span<const RoundRecord> records,
                                              double threshold) {
    for (const auto& r : records)
        if (r.test_accuracy >= threshold) return r.round;
    return std::nullopt;
}

RunSummary summarize_run(std::span<const RoundRecord> records, double threshold) {
    RunSummary s;
    std::size_t cumulative = 0;
    for (const auto& r : records) {
        cumulative += r.params_down + r.params_up;
        if (r.test_accuracy > s.best_accuracy) {
            s.best_accuracy = r.test_accuracy;
            s.best_round = r.round;
        }
        if (!s.rounds_to_threshold && r.test_accuracy >= threshold) {
            s.rounds_to_threshold = r.round;
            s.params_to_threshold = cumulative;
        }
    }
    s.total_params_exchanged = cumulative;
    return s;
}

namespace {

FieldStats stats_of(const std::vector<double>& xs) {
    FieldStats f;
    if (xs.empty()) return f;
    for (double x : xs) f.avg += x;
    f.avg /= double(xs.size());
    if (xs.size() > 1) {
        double ss = 0.0;
        for (double x : xs) ss += (x - f.avg) * (x - f.avg);
        f.stdev = std::sqrt(ss / double(xs.size() - 1));
    }
    return f;
}

}  // namespace

MultiRunStats summarize_runs(std::span<const RunSummary> summaries) {
    if (summaries.empty())
        throw std::invalid_argument("summarize_runs: empty input");
    MultiRunStats m;
    m.num_runs = summaries.size();
    std::vector<double> acc, rounds, total, to_threshold;
    for (const auto& s : summaries) {
        acc.push_back(s.best_accuracy);
        total.push_back(double(s.total_params_exchanged));
        if (s.rounds_to_threshold) {
            rounds.push_back(double(*s.rounds_to_threshold));
            to_threshold.push_back(double(*s.params_to_threshold));
        } else {
            ++m.threshold_exclusions;
        }
    }
    m.best_accuracy = stats_of(acc);
    m.rounds_to_threshold = stats_of(rounds);
    m.total_params_exchanged = stats_of(total);
    m.params_to_threshold = stats_of(to_threshold);
    return m;
}

std::map<std::string, std::optional<double>> relative_cost(
    const std::map<std::string, MultiRunStats>& per_variant,
    const std::string& baseline_variant) {
    const auto it = per_variant.find(baseline_variant);
    if (it == per_variant.end())
        throw std::invalid_argument("relative_cost: baseline variant missing");
    const MultiRunStats& base = it->second;
    if (base.threshold_exclusions == base.num_runs ||
        base.params_to_threshold.avg <= 0.0)
        throw std::runtime_error(
            "relative_cost: baseline never reached the threshold");
    std::map<std::string, std::optional<double>> out;
    for (const auto& [name, stats] : per_variant) {
        if (stats.threshold_exclusions == stats.num_runs)
            out[name] = std::nullopt;
        else
            out[name] = stats.params_to_threshold.avg / base.params_to_threshold.avg;
    }
    return out;
}

void write_round_records(const std::string& path,
                         std::span<const RoundRecord> records) {
    const std::string tmp = path + ".tmp";
    {
        std::ofstream os(tmp, std::ios::trunc);
        if (!os) throw FormatError("cannot open for write: " + path);
        os << "round,flag,participants,test_accuracy,global_loss,params_down,"
              "params_up,cumulative_params\n";
        os << std::setprecision(17);
        std::size_t cumulative = 0;
        for (const auto& r : records) {
            cumulative += r.params_down + r.params_up;
            os << r.round << ',' << (r.flag ? 1 : 0) << ',';
            for (std::size_t i = 0; i < r.participants.size(); ++i)
                os << (i ? ";" : "") << r.participants[i];
            os << ',' << r.test_accuracy << ',' << r.global_loss << ','
               << r.params_down << ',' << r.params_up << ',' << cumulative << '\n';
        }
        if (!os) throw FormatError("write failed: " + path);
    }
    std::filesystem::rename(tmp, path);
}

std::vector<RoundRecord> read_round_records(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw FormatError("cannot open: " + path);
    std::string line;
    if (!std::getline(is, line))
        throw FormatError("empty round record file: " + path);
    std::vector<RoundRecord> out;
    while (std::getline(is, line)) {
        if (line.empty()) continue;
        std::stringstream ss(line);
        std::string field;
        RoundRecord r;
        auto next = [&]() {
            if (!std::getline(ss, field, ','))
                throw FormatError("short row in " + path);
            return field;
        };
        r.round = std::stoull(next());
        r.flag = next() == "1";
        for (std::stringstream ps(next()); std::getline(ps, field, ';');)
            if (!field.empty()) r.participants.push_back(std::stoull(field));
        r.test_accuracy = std::stod(next());
        r.global_loss = std::stod(next());
        r.params_down = std::stoull(next());
        r.params_up = std::stoull(next());
        next();  // cumulative, recomputable
        out.push_back(std::move(r));
    }
    return out;
}

}  // namespace fedsim
