#pragma once

// Minimal CNN framework. Activations are batched NHWC tensors ([N,H,W,C]) for
// spatial layers and [N,F] for dense layers. Backpropagation is ordinary
// first-order chain rule between layers; the fractional series only enters
// when the resulting parameter gradients are handed to the optimizer.

#include "fracgrad/fgd_optimizer.hpp"
#include "fracgrad/frac_math.hpp"
#include "fracgrad/tensor.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace fracgrad {

enum class LayerKind { dense, conv2d, maxpool2x2, relu, sigmoid, flatten };

std::string_view to_string(LayerKind kind);
LayerKind parse_layer_kind(std::string_view text);

/// One network layer. conv2d is always 3x3, stride 1, same padding with
/// weights laid out [out, 3, 3, in]; dense weights are [out, in].
struct Layer {
    LayerKind kind = LayerKind::relu;
    std::size_t in = 0;  ///< input features (dense) or channels (conv2d)
    std::size_t out = 0; ///< output features (dense) or channels (conv2d)
    std::optional<Tensor> weights;
    std::optional<Tensor> bias;

    static Layer dense(std::size_t in, std::size_t out);
    static Layer conv2d(std::size_t in_channels, std::size_t out_channels);
    static Layer maxpool2x2() { return of_kind(LayerKind::maxpool2x2); }
    static Layer relu() { return of_kind(LayerKind::relu); }
    static Layer sigmoid() { return of_kind(LayerKind::sigmoid); }
    static Layer flatten() { return of_kind(LayerKind::flatten); }
    /// Parameter-free layer of the given kind.
    static Layer of_kind(LayerKind kind) {
        Layer l;
        l.kind = kind;
        return l;
    }

    bool has_params() const noexcept { return kind == LayerKind::dense || kind == LayerKind::conv2d; }

    /// Per-sample output shape for a per-sample input shape.
    Shape output_shape(const Shape& input) const;
};

/// What a layer keeps from its forward pass for the backward pass.
struct LayerCache {
    Tensor input;
    Tensor output;
    std::vector<std::uint32_t> argmax; ///< maxpool: flat input index per output
};

struct LayerGrads {
    std::optional<Tensor> weights;
    std::optional<Tensor> bias;
};

/// Single-layer passes; the batch axis is dimension 0.
Tensor layer_forward(const Layer& layer, const Tensor& input, LayerCache* cache = nullptr);
/// Returns dL/d(input); fills `grads` with parameter gradients summed over the batch.
Tensor layer_backward(const Layer& layer, const LayerCache& cache, const Tensor& grad_output,
                      LayerGrads* grads = nullptr);

/// Identifies one trainable tensor: layer index plus weights/bias.
struct ParamRef {
    std::size_t layer = 0;
    bool is_bias = false;
};

class Network {
public:
    /// `input_shape` is per sample (e.g. {16, 16, 1}). Throws ShapeError naming
    /// the first layer whose geometry does not fit.
    Network(Shape input_shape, std::vector<Layer> layers);

    const Shape& input_shape() const noexcept { return input_shape_; }
    const std::vector<Layer>& layers() const noexcept { return layers_; }
    const Shape& output_shape() const noexcept { return output_shape_; }

    /// Trainable tensors in layer order, weights before bias.
    const std::vector<ParamRef>& parameters() const noexcept { return params_; }
    const Tensor& parameter(std::size_t index) const;
    void set_parameter(std::size_t index, Tensor value);
    std::size_t parameter_element_count() const;

    /// Uniform weights and biases in [lo, hi] from a single seeded stream.
    void init_uniform(std::uint64_t seed, double lo = -0.1, double hi = 0.1);

    /// Layers before a trailing sigmoid; their output is the score tensor.
    std::size_t score_layer_count() const noexcept;

    /// Bumped whenever a parameter changes; ties forward caches to a state.
    std::uint64_t revision() const noexcept { return revision_; }

private:
    Tensor& mutable_parameter(std::size_t index);

    Shape input_shape_;
    Shape output_shape_;
    std::vector<Layer> layers_;
    std::vector<ParamRef> params_;
    std::uint64_t revision_ = 0;
};

struct ForwardCache {
    std::vector<LayerCache> layers;
    const Network* network = nullptr;
    std::uint64_t revision = 0;
};

struct ForwardResult {
    Tensor output; ///< final activations (per-class sigmoid for classifiers)
    Tensor scores; ///< pre-sigmoid scores
    ForwardCache cache;
};

ForwardResult forward(const Network& network, const Tensor& batch);

/// Parameter gradients (order of Network::parameters()) from the gradient of
/// the loss with respect to the scores. Throws StateError if `cache` does not
/// belong to the network's current parameters.
std::vector<Tensor> backward(const Network& network, const ForwardCache& cache, const Tensor& grad_wrt_scores);

enum class LossForm {
    as_printed, ///< -(1/m) sum t log sigmoid(s), hot-class term only
    standard,   ///< adds the (1 - t) log(1 - sigmoid(s)) term
};

LossForm parse_loss_form(std::string_view text);
std::string_view to_string(LossForm form);

struct LossOutput {
    double value = 0.0;
    Tensor grad_wrt_scores;
};

inline constexpr double kProbabilityClamp = 1e-12;

/// Binary cross-entropy on pre-sigmoid scores [m, C] against one-hot targets.
LossOutput bce_loss(const Tensor& scores, const Tensor& targets, std::size_t batch_size,
                    LossForm form = LossForm::as_printed);

/// Fraction of rows whose argmax matches the one-hot target.
double accuracy(const Tensor& output, const Tensor& targets);

std::vector<ParamState> make_param_states(const Network& network, const FgdConfig& cfg);

struct TrainStepResult {
    double loss = 0.0;
    double accuracy = 0.0;
    std::vector<Tensor> gradients; ///< integer-order parameter gradients
    std::vector<StepReport> reports;
};

/// forward -> loss -> backward -> one fractional step per parameter tensor.
TrainStepResult train_step(Network& network, const Tensor& images, const Tensor& labels,
                           std::vector<ParamState>& states, const FgdConfig& cfg,
                           LossForm form = LossForm::as_printed);

struct Evaluation {
    double loss = 0.0;
    double accuracy = 0.0;
};

Evaluation evaluate(const Network& network, const Tensor& images, const Tensor& labels,
                    LossForm form = LossForm::as_printed, std::size_t chunk = 64);

/// Two [conv3x3-ReLU, maxpool] blocks with 8 and 16 filters, dense-32-ReLU,
/// dense-classes-sigmoid.
Network make_toy_vgg(std::size_t side = 16, std::size_t channels = 1, std::size_t classes = 2);

/// VGG-16 layer stack (13 conv, 3 dense). `side` must be divisible by 32.
Network make_vgg16(std::size_t side = 224, std::size_t channels = 1, std::size_t classes = 2);

/// Rows [begin, end) of a batch-major tensor.
Tensor slice_rows(const Tensor& t, std::size_t begin, std::size_t end);
/// Rows picked by index, in the given order.
Tensor gather_rows(const Tensor& t, const std::vector<std::size_t>& rows);

} // namespace fracgrad
