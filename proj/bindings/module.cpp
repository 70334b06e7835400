#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "fedsim/aggregation.hpp"
#include "fedsim/config.hpp"
#include "fedsim/data.hpp"
#include "fedsim/metrics.hpp"
#include "fedsim/model.hpp"
#include "fedsim/params.hpp"
#include "fedsim/protocol.hpp"

namespace py = pybind11;
using namespace fedsim;

namespace {

// span-based APIs get vector-taking shims for the bindings
LayeredParams py_linear_combine(
    const std::vector<std::pair<double, const LayeredParams*>>& terms,
    Selector selector) {
    return linear_combine(terms, selector);
}

}  // namespace

PYBIND11_MODULE(_fedsim, m) {
    m.doc() = "Federated learning protocol simulator bindings";

    py::enum_<Selector>(m, "Selector")
        .value("SHALLOW", Selector::Shallow)
        .value("DEEP", Selector::Deep)
        .value("ALL", Selector::All);

    py::enum_<Variant>(m, "Variant")
        .value("FEDAVG", Variant::FedAvg)
        .value("TEFL", Variant::Tefl)
        .value("AFL", Variant::Afl)
        .value("TWAFL", Variant::Twafl);

    py::class_<ParamBlock>(m, "ParamBlock")
        .def(py::init<>())
        .def(py::init([](std::vector<std::size_t> shape, std::vector<double> values) {
                 return ParamBlock{std::move(shape), std::move(values)};
             }),
             py::arg("shape"), py::arg("values"))
        .def_readwrite("shape", &ParamBlock::shape)
        .def_readwrite("values", &ParamBlock::values)
        .def("__len__", &ParamBlock::size);

    py::class_<LayeredParams>(m, "LayeredParams")
        .def(py::init<>())
        .def_readwrite("blocks", &LayeredParams::blocks)
        .def_readwrite("split_index", &LayeredParams::split_index)
        .def("total_size", &LayeredParams::total_size)
        .def("shallow_size", &LayeredParams::shallow_size)
        .def("deep_size", &LayeredParams::deep_size)
        .def("validate", &LayeredParams::validate);

    m.def("partition_sizes", [](const LayeredParams& p) {
        const auto s = partition_sizes(p);
        return std::make_pair(s.shallow, s.deep);
    });
    m.def("linear_combine", &py_linear_combine, py::arg("terms"), py::arg("selector"));
    m.def("save_params", &save_params);
    m.def("load_params", &load_params);

    py::class_<ModelSpec>(m, "ModelSpec")
        .def_readonly("input_dim", &ModelSpec::input_dim)
        .def_readonly("num_classes", &ModelSpec::num_classes)
        .def_readonly("split_index", &ModelSpec::split_index);

    m.def("dense_spec", &dense_spec, py::arg("input_dim"), py::arg("hidden"),
          py::arg("num_classes"), py::arg("split_index"));
    m.def("param_count", [](const ModelSpec& spec) {
        std::vector<std::tuple<std::string, std::size_t, std::size_t>> out;
        for (const auto& c : param_count(spec))
            out.emplace_back(c.name, c.weights, c.biases);
        return out;
    });
    m.def("init_params", [](const ModelSpec& spec, std::uint64_t seed) {
        Rng rng(seed);
        return init_params(spec, rng);
    });
    m.def("temporal_weight", &temporal_weight, py::arg("a"), py::arg("t"),
          py::arg("timestamp"));

    py::class_<DataPool>(m, "DataPool")
        .def_readonly("input_dim", &DataPool::input_dim)
        .def_readonly("num_classes", &DataPool::num_classes)
        .def_readonly("labels", &DataPool::labels)
        .def("__len__", &DataPool::size);

    m.def("synthetic_pool",
          [](std::size_t num_classes, std::size_t input_dim, std::size_t per_class,
             double spread, std::uint64_t seed) {
              Rng rng(seed);
              return synthetic_pool(num_classes, input_dim, per_class, spread, rng);
          },
          py::arg("num_classes"), py::arg("input_dim"), py::arg("per_class"),
          py::arg("cluster_spread"), py::arg("seed"));
    m.def("load_idx", &load_idx, py::arg("images_path"), py::arg("labels_path"));

    py::class_<ClientDataset>(m, "ClientDataset")
        .def_readonly("client_id", &ClientDataset::client_id)
        .def_readonly("class_counts", &ClientDataset::class_counts)
        .def_readonly("sample_indices", &ClientDataset::sample_indices)
        .def("n_k", &ClientDataset::n_k);

    py::class_<ProtocolConfig>(m, "ProtocolConfig")
        .def(py::init<>())
        .def_readwrite("variant", &ProtocolConfig::variant)
        .def_readwrite("num_clients", &ProtocolConfig::num_clients)
        .def_readwrite("client_fraction", &ProtocolConfig::client_fraction)
        .def_readwrite("time_base", &ProtocolConfig::time_base)
        .def_readwrite("rounds_in_loop", &ProtocolConfig::rounds_in_loop)
        .def_readwrite("es_rounds", &ProtocolConfig::es_rounds)
        .def_readwrite("batch_size", &ProtocolConfig::batch_size)
        .def_readwrite("epochs", &ProtocolConfig::epochs)
        .def_readwrite("eta", &ProtocolConfig::eta)
        .def_readwrite("total_rounds", &ProtocolConfig::total_rounds)
        .def_readwrite("normalize_weights", &ProtocolConfig::normalize_weights)
        .def_readwrite("seed", &ProtocolConfig::seed)
        .def_readwrite("hidden_dims", &ProtocolConfig::hidden_dims)
        .def_readwrite("model_split_index", &ProtocolConfig::model_split_index)
        .def_readwrite("nc_choices", &ProtocolConfig::nc_choices)
        .def_readwrite("s_min", &ProtocolConfig::s_min)
        .def_readwrite("s_max", &ProtocolConfig::s_max)
        .def_readwrite("test_fraction", &ProtocolConfig::test_fraction)
        .def("apply_variant_rules", &ProtocolConfig::apply_variant_rules,
             py::arg("fe"))
        .def("validate", &ProtocolConfig::validate);

    m.def("es_rounds_for_freq", &es_rounds_for_freq, py::arg("fe"), py::arg("T"));
    m.def("flag_for_round", &flag_for_round, py::arg("t"), py::arg("config"));
    m.def("load_config", &load_config);
    m.def("write_config", &write_config);

    py::class_<RoundRecord>(m, "RoundRecord")
        .def_readonly("round", &RoundRecord::round)
        .def_readonly("flag", &RoundRecord::flag)
        .def_readonly("participants", &RoundRecord::participants)
        .def_readonly("test_accuracy", &RoundRecord::test_accuracy)
        .def_readonly("global_loss", &RoundRecord::global_loss)
        .def_readonly("params_down", &RoundRecord::params_down)
        .def_readonly("params_up", &RoundRecord::params_up);

    py::class_<ExperimentResult>(m, "ExperimentResult")
        .def_readonly("records", &ExperimentResult::records)
        .def_readonly("partition", &ExperimentResult::partition)
        .def_property_readonly("central", [](const ExperimentResult& r) {
            return r.server.central;
        });

    m.def("run_experiment", &run_experiment, py::arg("config"), py::arg("pool"),
          py::call_guard<py::gil_scoped_release>());

    py::class_<RunSummary>(m, "RunSummary")
        .def_readonly("best_accuracy", &RunSummary::best_accuracy)
        .def_readonly("best_round", &RunSummary::best_round)
        .def_readonly("rounds_to_threshold", &RunSummary::rounds_to_threshold)
        .def_readonly("total_params_exchanged", &RunSummary::total_params_exchanged)
        .def_readonly("params_to_threshold", &RunSummary::params_to_threshold);

    m.def("summarize_run",
          [](const std::vector<RoundRecord>& records, double threshold) {
              return summarize_run(records, threshold);
          },
          py::arg("records"), py::arg("threshold"));
    m.def("write_round_records",
          [](const std::string& path, const std::vector<RoundRecord>& records) {
              write_round_records(path, records);
          });
}
