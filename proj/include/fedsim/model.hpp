#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "fedsim/params.hpp"
#include "fedsim/rng.hpp"

namespace fedsim {

enum class LayerKind { DenseTrainable, ConvCountOnly, LstmCountOnly };
enum class Activation { Relu, Softmax, None };

// One layer of an architecture. Shapes:
//   dense_trainable : {fan_in, fan_out}
//   conv_count_only : {kh, kw, channels_in, channels_out}
//   lstm_count_only : {input_dim, cell_size}
struct LayerDesc {
    LayerKind kind = LayerKind::DenseTrainable;
    std::string name;
    std::vector<std::size_t> shape;
    Activation activation = Activation::None;
};

struct ModelSpec {
    std::vector<LayerDesc> layers;
    std::size_t input_dim = 0;
    std::size_t num_classes = 0;
    std::size_t split_index = 0;  // layers before this index are shallow

    bool trainable() const;  // true iff every layer is dense_trainable
    void validate() const;
};

// Fully-connected spec: input_dim -> hidden... -> num_classes, relu hidden
// activations and a softmax output. split_index counts layers.
ModelSpec dense_spec(std::size_t input_dim, const std::vector<std::size_t>& hidden,
                     std::size_t num_classes, std::size_t split_index);

// Row-major feature matrix plus class labels.
struct Batch {
    std::size_t batch_size = 0;
    std::size_t input_dim = 0;
    std::vector<double> features;     // batch_size x input_dim
    std::vector<std::size_t> labels;  // in [0, num_classes)
};

struct LayerCount {
    std::string name;
    std::size_t weights = 0;
    std::size_t biases = 0;
};

// Per-layer weight/bias element counts; accepts count-only layers.
std::vector<LayerCount> param_count(const ModelSpec& spec);

// He-style init: weights ~ N(0, 2/fan_in), biases exactly zero. Two blocks
// per layer (weights {fan_in,fan_out}, biases {fan_out}) in layer order;
// the container's split_index is 2 * spec.split_index.
LayeredParams init_params(const ModelSpec& spec, Rng& rng);

// Class-probability matrix, batch_size x num_classes row-major.
std::vector<double> forward(const ModelSpec& spec, const LayeredParams& params,
                            const Batch& batch);

struct LossGrad {
    double loss = 0.0;       // mean cross-entropy over the batch
    LayeredParams grads;     // same block structure as params
};

LossGrad loss_and_grad(const ModelSpec& spec, const LayeredParams& params,
                       const Batch& batch);

double batch_loss(const ModelSpec& spec, const LayeredParams& params,
                  const Batch& batch);

// Fraction of rows whose argmax probability matches the label.
double batch_accuracy(const ModelSpec& spec, const LayeredParams& params,
                      const Batch& batch);

// The local training loop: E epochs, shuffled batches of size B (last batch
// may be smaller), one plain SGD step per batch. Pure in its inputs; returns
// the trained copy.
LayeredParams client_sgd(const ModelSpec& spec, const LayeredParams& params,
                         const Batch& dataset, std::size_t batch_size,
                         std::size_t epochs, double eta, Rng& rng);

}  // namespace fedsim
