#include "fedsim/model.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "fedsim/errors.hpp"

namespace fedsim {

bool ModelSpec::trainable() const {
    return std::all_of(layers.begin(), layers.end(), [](const LayerDesc& l) {
        return l.kind == LayerKind::DenseTrainable;
    });
}

void ModelSpec::validate() const {
    if (layers.empty()) throw ShapeError("ModelSpec: no layers");
    if (split_index == 0 || split_index >= layers.size())
        throw ShapeError("ModelSpec: split_index must leave both partitions non-empty");
    if (!trainable()) return;  // count-only specs skip the chaining checks
    std::size_t fan_in = input_dim;
    for (const auto& l : layers) {
        if (l.shape.size() != 2)
            throw ShapeError("dense layer " + l.name + ": shape must be {fan_in, fan_out}");
        if (l.shape[0] != fan_in)
            throw ShapeError("dense layer " + l.name + ": fan_in does not chain");
        fan_in = l.shape[1];
    }
    if (fan_in != num_classes)
        throw ShapeError("ModelSpec: final fan_out != num_classes");
}

ModelSpec dense_spec(std::size_t input_dim, const std::vector<std::size_t>& hidden,
                     std::size_t num_classes, std::size_t split_index) {
    ModelSpec spec;
    spec.input_dim = input_dim;
    spec.num_classes = num_classes;
    spec.split_index = split_index;
    std::size_t fan_in = input_dim;
    for (std::size_t i = 0; i < hidden.size(); ++i) {
        spec.layers.push_back({LayerKind::DenseTrainable, "dense_" + std::to_string(i + 1),
                               {fan_in, hidden[i]}, Activation::Relu});
        fan_in = hidden[i];
    }
    spec.layers.push_back({LayerKind::DenseTrainable,
                           "dense_" + std::to_string(hidden.size() + 1),
                           {fan_in, num_classes}, Activation::Softmax});
    spec.validate();
    return spec;
}

std::vector<LayerCount> param_count(const ModelSpec& spec) {
    std::vector<LayerCount> out;
    for (const auto& l : spec.layers) {
        LayerCount c;
        c.name = l.name;
        switch (l.kind) {
            case LayerKind::DenseTrainable:
                c.weights = l.shape[0] * l.shape[1];
                c.biases = l.shape[1];
                break;
            case LayerKind::ConvCountOnly:
                c.weights = l.shape[0] * l.shape[1] * l.shape[2] * l.shape[3];
                c.biases = l.shape[3];
                break;
            case LayerKind::LstmCountOnly: {
                // input kernel + recurrent kernel over the four gates
                const std::size_t in = l.shape[0], cell = l.shape[1];
                c.weights = in * 4 * cell + cell * 4 * cell;
                c.biases = 4 * cell;
                break;
            }
        }
        out.push_back(std::move(c));
    }
    return out;
}

LayeredParams init_params(const ModelSpec& spec, Rng& rng) {
    spec.validate();
    if (!spec.trainable())
        throw std::invalid_argument("init_params: spec contains count-only layers");
    LayeredParams p;
    p.split_index = 2 * spec.split_index;
    for (const auto& l : spec.layers) {
        const std::size_t fan_in = l.shape[0], fan_out = l.shape[1];
        ParamBlock w{{fan_in, fan_out}, std::vector<double>(fan_in * fan_out)};
        std::normal_distribution<double> dist(0.0, std::sqrt(2.0 / double(fan_in)));
        for (auto& v : w.values) v = dist(rng);
        ParamBlock b{{fan_out}, std::vector<double>(fan_out, 0.0)};
        p.blocks.push_back(std::move(w));
        p.blocks.push_back(std::move(b));
    }
    p.validate();
    return p;
}

namespace {

void check_shapes(const ModelSpec& spec, const LayeredParams& params,
                  const Batch& batch) {
    if (!spec.trainable())
        throw std::invalid_argument("training ops require an all-dense spec");
    if (params.blocks.size() != 2 * spec.layers.size())
        throw ShapeError("params do not match spec layer count");
    if (batch.input_dim != spec.input_dim)
        throw ShapeError("batch input_dim does not match spec");
    if (batch.features.size() != batch.batch_size * batch.input_dim)
        throw ShapeError("batch feature matrix size mismatch");
    if (batch.labels.size() != batch.batch_size)
        throw ShapeError("batch label count mismatch");
    for (std::size_t i = 0; i < spec.layers.size(); ++i)
        if (params.blocks[2 * i].shape != spec.layers[i].shape)
            throw ShapeError("weight block shape mismatch at layer " +
                             spec.layers[i].name);
}

// y (n x out) = x (n x in) * W (in x out) + b
void dense_forward(const std::vector<double>& x, std::size_t n, std::size_t in,
                   const ParamBlock& w, const ParamBlock& b,
                   std::vector<double>& y) {
    const std::size_t out = w.shape[1];
    y.assign(n * out, 0.0);
    for (std::size_t r = 0; r < n; ++r) {
        double* yr = &y[r * out];
        const double* xr = &x[r * in];
        for (std::size_t i = 0; i < in; ++i) {
            const double xi = xr[i];
            if (xi == 0.0) continue;
            const double* wrow = &w.values[i * out];
            for (std::size_t j = 0; j < out; ++j) yr[j] += xi * wrow[j];
        }
        for (std::size_t j = 0; j < out; ++j) yr[j] += b.values[j];
    }
}

void softmax_rows(std::vector<double>& z, std::size_t n, std::size_t k) {
    for (std::size_t r = 0; r < n; ++r) {
        double* zr = &z[r * k];
        const double mx = *std::max_element(zr, zr + k);
        double sum = 0.0;
        for (std::size_t j = 0; j < k; ++j) {
            zr[j] = std::exp(zr[j] - mx);
            sum += zr[j];
        }
        for (std::size_t j = 0; j < k; ++j) zr[j] /= sum;
    }
}

struct ForwardTrace {
    // activations[0] is the input; activations[l+1] the output of layer l
    std::vector<std::vector<double>> activations;
    // pre-activation values per layer (needed for relu backprop)
    std::vector<std::vector<double>> pre;
};

ForwardTrace run_forward(const ModelSpec& spec, const LayeredParams& params,
                         const Batch& batch) {
    ForwardTrace t;
    t.activations.push_back(batch.features);
    const std::size_t n = batch.batch_size;
    std::size_t dim = spec.input_dim;
    for (std::size_t l = 0; l < spec.layers.size(); ++l) {
        const auto& layer = spec.layers[l];
        std::vector<double> z;
        dense_forward(t.activations.back(), n, dim, params.blocks[2 * l],
                      params.blocks[2 * l + 1], z);
        dim = layer.shape[1];
        t.pre.push_back(z);
        if (layer.activation == Activation::Relu)
            for (auto& v : z) v = std::max(0.0, v);
        else if (layer.activation == Activation::Softmax)
            softmax_rows(z, n, dim);
        t.activations.push_back(std::move(z));
    }
    return t;
}

}  // namespace

std::vector<double> forward(const ModelSpec& spec, const LayeredParams& params,
                            const Batch& batch) {
    check_shapes(spec, params, batch);
    return run_forward(spec, params, batch).activations.back();
}

LossGrad loss_and_grad(const ModelSpec& spec, const LayeredParams& params,
                       const Batch& batch) {
    check_shapes(spec, params, batch);
    const std::size_t n = batch.batch_size;
    const std::size_t k = spec.num_classes;
    ForwardTrace trace = run_forward(spec, params, batch);
    const auto& probs = trace.activations.back();

    LossGrad lg;
    for (std::size_t r = 0; r < n; ++r) {
        const double p = probs[r * k + batch.labels[r]];
        lg.loss -= std::log(std::max(p, 1e-300));
    }
    lg.loss /= double(n);

    lg.grads.split_index = params.split_index;
    lg.grads.blocks.resize(params.blocks.size());

    // softmax + cross-entropy: delta = (probs - onehot) / n
    std::vector<double> delta = probs;
    for (std::size_t r = 0; r < n; ++r) delta[r * k + batch.labels[r]] -= 1.0;
    for (auto& v : delta) v /= double(n);

    for (std::size_t li = spec.layers.size(); li-- > 0;) {
        const std::size_t in = spec.layers[li].shape[0];
        const std::size_t out = spec.layers[li].shape[1];
        const auto& a_prev = trace.activations[li];

        ParamBlock gw{{in, out}, std::vector<double>(in * out, 0.0)};
        ParamBlock gb{{out}, std::vector<double>(out, 0.0)};
        for (std::size_t r = 0; r < n; ++r) {
            const double* dr = &delta[r * out];
            const double* ar = &a_prev[r * in];
            for (std::size_t i = 0; i < in; ++i) {
                const double ai = ar[i];
                if (ai == 0.0) continue;
                double* gwrow = &gw.values[i * out];
                for (std::size_t j = 0; j < out; ++j) gwrow[j] += ai * dr[j];
            }
            for (std::size_t j = 0; j < out; ++j) gb.values[j] += dr[j];
        }
        lg.grads.blocks[2 * li] = std::move(gw);
        lg.grads.blocks[2 * li + 1] = std::move(gb);

        if (li == 0) break;
        // propagate: delta_prev = delta * W^T, masked by relu'(pre)
        const auto& w = params.blocks[2 * li];
        std::vector<double> prev(n * in, 0.0);
        for (std::size_t r = 0; r < n; ++r) {
            const double* dr = &delta[r * out];
            double* pr = &prev[r * in];
            for (std::size_t i = 0; i < in; ++i) {
                const double* wrow = &w.values[i * out];
                double acc = 0.0;
                for (std::size_t j = 0; j < out; ++j) acc += wrow[j] * dr[j];
                pr[i] = acc;
            }
        }
        const auto& pre_prev = trace.pre[li - 1];
        if (spec.layers[li - 1].activation == Activation::Relu)
            for (std::size_t i = 0; i < prev.size(); ++i)
                if (pre_prev[i] <= 0.0) prev[i] = 0.0;
        delta = std::move(prev);
    }
    return lg;
}

double batch_loss(const ModelSpec& spec, const LayeredParams& params,
                  const Batch& batch) {
    check_shapes(spec, params, batch);
    const auto probs = run_forward(spec, params, batch).activations.back();
    const std::size_t k = spec.num_classes;
    double loss = 0.0;
    for (std::size_t r = 0; r < batch.batch_size; ++r)
        loss -= std::log(std::max(probs[r * k + batch.labels[r]], 1e-300));
    return loss / double(batch.batch_size);
}

double batch_accuracy(const ModelSpec& spec, const LayeredParams& params,
                      const Batch& batch) {
    const auto probs = forward(spec, params, batch);
    const std::size_t k = spec.num_classes;
    std::size_t hits = 0;
    for (std::size_t r = 0; r < batch.batch_size; ++r) {
        const double* pr = &probs[r * k];
        const std::size_t arg = std::max_element(pr, pr + k) - pr;
        if (arg == batch.labels[r]) ++hits;
    }
    return double(hits) / double(batch.batch_size);
}

LayeredParams client_sgd(const ModelSpec& spec, const LayeredParams& params,
                         const Batch& dataset, std::size_t batch_size,
                         std::size_t epochs, double eta, Rng& rng) {
    check_shapes(spec, params, dataset);
    if (dataset.batch_size == 0)
        throw std::invalid_argument("client_sgd: empty dataset");
    if (batch_size == 0 || epochs == 0 || eta < 0.0)
        throw std::invalid_argument("client_sgd: invalid hyperparameters");

    const std::size_t n = dataset.batch_size;
    const std::size_t d = dataset.input_dim;
    LayeredParams current = params;
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);

    for (std::size_t epoch = 0; epoch < epochs; ++epoch) {
        std::shuffle(order.begin(), order.end(), rng);
        for (std::size_t start = 0; start < n; start += batch_size) {
            const std::size_t bs = std::min(batch_size, n - start);
            Batch b;
            b.batch_size = bs;
            b.input_dim = d;
            b.features.resize(bs * d);
            b.labels.resize(bs);
            for (std::size_t r = 0; r < bs; ++r) {
                const std::size_t src = order[start + r];
                std::copy_n(&dataset.features[src * d], d, &b.features[r * d]);
                b.labels[r] = dataset.labels[src];
            }
            const LossGrad lg = loss_and_grad(spec, current, b);
            const std::vector<std::pair<double, const LayeredParams*>> terms = {
                {1.0, &current}, {-eta, &lg.grads}};
            current = linear_combine(terms, Selector::All);
        }
    }
    return current;
}

}  // namespace fedsim
