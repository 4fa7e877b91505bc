#include "fracgrad/nn.hpp"

#include "fracgrad/errors.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <string>

namespace fracgrad {

std::string_view to_string(LayerKind kind) {
    switch (kind) {
    case LayerKind::dense: return "dense";
    case LayerKind::conv2d: return "conv2d";
    case LayerKind::maxpool2x2: return "maxpool2x2";
    case LayerKind::relu: return "relu";
    case LayerKind::sigmoid: return "sigmoid";
    case LayerKind::flatten: return "flatten";
    }
    return "unknown";
}

LayerKind parse_layer_kind(std::string_view text) {
    for (auto k : {LayerKind::dense, LayerKind::conv2d, LayerKind::maxpool2x2, LayerKind::relu, LayerKind::sigmoid,
                   LayerKind::flatten})
        if (to_string(k) == text) return k;
    throw FormatError("unknown layer kind '" + std::string(text) + "'");
}

Layer Layer::dense(std::size_t in, std::size_t out) {
    Layer l = of_kind(LayerKind::dense);
    l.in = in;
    l.out = out;
    l.weights = Tensor({out, in});
    l.bias = Tensor({out});
    return l;
}

Layer Layer::conv2d(std::size_t in_channels, std::size_t out_channels) {
    Layer l = of_kind(LayerKind::conv2d);
    l.in = in_channels;
    l.out = out_channels;
    l.weights = Tensor({out_channels, 3, 3, in_channels});
    l.bias = Tensor({out_channels});
    return l;
}

Shape Layer::output_shape(const Shape& input) const {
    const std::string where = std::string(to_string(kind)) + " input " + shape_string(input);
    switch (kind) {
    case LayerKind::dense:
        if (input.size() != 1 || input[0] != in) throw ShapeError(where + ", expected [" + std::to_string(in) + "]");
        return {out};
    case LayerKind::conv2d:
        if (input.size() != 3 || input[2] != in)
            throw ShapeError(where + ", expected [H,W," + std::to_string(in) + "]");
        return {input[0], input[1], out};
    case LayerKind::maxpool2x2:
        if (input.size() != 3 || input[0] % 2 || input[1] % 2) throw ShapeError(where + ", expected even [H,W,C]");
        return {input[0] / 2, input[1] / 2, input[2]};
    case LayerKind::flatten: return {shape_size(input)};
    case LayerKind::relu:
    case LayerKind::sigmoid: return input;
    }
    return input;
}

namespace {

Shape sample_shape(const Tensor& batch) {
    if (batch.rank() < 2) throw ShapeError("batched tensor needs rank >= 2, got " + shape_string(batch.shape()));
    return Shape(batch.shape().begin() + 1, batch.shape().end());
}

Shape with_batch(std::size_t n, const Shape& sample) {
    Shape s{n};
    s.insert(s.end(), sample.begin(), sample.end());
    return s;
}

double sigmoid(double z) { return 1.0 / (1.0 + std::exp(-z)); }

Tensor dense_forward(const Layer& l, const Tensor& in) {
    const std::size_t n = in.dim(0);
    Tensor out({n, l.out});
    const Tensor& w = *l.weights;
    const Tensor& b = *l.bias;
    for (std::size_t s = 0; s < n; ++s) {
        const double* x = in.data() + s * l.in;
        for (std::size_t o = 0; o < l.out; ++o) {
            const double* wr = w.data() + o * l.in;
            double acc = b[o];
            for (std::size_t f = 0; f < l.in; ++f) acc += wr[f] * x[f];
            out[s * l.out + o] = acc;
        }
    }
    return out;
}

Tensor dense_backward(const Layer& l, const Tensor& in, const Tensor& go, LayerGrads* grads) {
    const std::size_t n = in.dim(0);
    Tensor gi(in.shape(), 0.0);
    const Tensor& w = *l.weights;
    Tensor gw(w.shape(), 0.0), gb(l.bias->shape(), 0.0);
    for (std::size_t s = 0; s < n; ++s) {
        const double* x = in.data() + s * l.in;
        double* gx = gi.data() + s * l.in;
        for (std::size_t o = 0; o < l.out; ++o) {
            const double g = go[s * l.out + o];
            const double* wr = w.data() + o * l.in;
            double* gwr = gw.data() + o * l.in;
            gb[o] += g;
            for (std::size_t f = 0; f < l.in; ++f) {
                gx[f] += wr[f] * g;
                gwr[f] += x[f] * g;
            }
        }
    }
    if (grads) {
        grads->weights = std::move(gw);
        grads->bias = std::move(gb);
    }
    return gi;
}

Tensor conv_forward(const Layer& l, const Tensor& in) {
    const std::size_t n = in.dim(0), h = in.dim(1), wd = in.dim(2), ci = l.in, co = l.out;
    Tensor out({n, h, wd, co});
    const Tensor& w = *l.weights;
    const Tensor& b = *l.bias;
    for (std::size_t s = 0; s < n; ++s)
        for (std::size_t y = 0; y < h; ++y)
            for (std::size_t x = 0; x < wd; ++x) {
                double* o_px = out.data() + ((s * h + y) * wd + x) * co;
                for (std::size_t o = 0; o < co; ++o) o_px[o] = b[o];
                for (int ky = 0; ky < 3; ++ky) {
                    const long iy = static_cast<long>(y) + ky - 1;
                    if (iy < 0 || iy >= static_cast<long>(h)) continue;
                    for (int kx = 0; kx < 3; ++kx) {
                        const long ix = static_cast<long>(x) + kx - 1;
                        if (ix < 0 || ix >= static_cast<long>(wd)) continue;
                        const double* i_px = in.data() + ((s * h + iy) * wd + ix) * ci;
                        for (std::size_t o = 0; o < co; ++o) {
                            const double* wk = w.data() + ((o * 3 + ky) * 3 + kx) * ci;
                            double acc = 0.0;
                            for (std::size_t c = 0; c < ci; ++c) acc += wk[c] * i_px[c];
                            o_px[o] += acc;
                        }
                    }
                }
            }
    return out;
}

Tensor conv_backward(const Layer& l, const Tensor& in, const Tensor& go, LayerGrads* grads) {
    const std::size_t n = in.dim(0), h = in.dim(1), wd = in.dim(2), ci = l.in, co = l.out;
    const Tensor& w = *l.weights;
    Tensor gi(in.shape(), 0.0);
    Tensor gw(w.shape(), 0.0), gb(l.bias->shape(), 0.0);
    for (std::size_t s = 0; s < n; ++s)
        for (std::size_t y = 0; y < h; ++y)
            for (std::size_t x = 0; x < wd; ++x) {
                const double* g_px = go.data() + ((s * h + y) * wd + x) * co;
                for (std::size_t o = 0; o < co; ++o) gb[o] += g_px[o];
                for (int ky = 0; ky < 3; ++ky) {
                    const long iy = static_cast<long>(y) + ky - 1;
                    if (iy < 0 || iy >= static_cast<long>(h)) continue;
                    for (int kx = 0; kx < 3; ++kx) {
                        const long ix = static_cast<long>(x) + kx - 1;
                        if (ix < 0 || ix >= static_cast<long>(wd)) continue;
                        const std::size_t i_off = ((s * h + iy) * wd + ix) * ci;
                        const double* i_px = in.data() + i_off;
                        double* gi_px = gi.data() + i_off;
                        for (std::size_t o = 0; o < co; ++o) {
                            const double g = g_px[o];
                            const std::size_t k_off = ((o * 3 + ky) * 3 + kx) * ci;
                            const double* wk = w.data() + k_off;
                            double* gwk = gw.data() + k_off;
                            for (std::size_t c = 0; c < ci; ++c) {
                                gi_px[c] += wk[c] * g;
                                gwk[c] += i_px[c] * g;
                            }
                        }
                    }
                }
            }
    if (grads) {
        grads->weights = std::move(gw);
        grads->bias = std::move(gb);
    }
    return gi;
}

Tensor maxpool_forward(const Tensor& in, std::vector<std::uint32_t>* argmax) {
    const std::size_t n = in.dim(0), h = in.dim(1), wd = in.dim(2), c = in.dim(3);
    const std::size_t oh = h / 2, ow = wd / 2;
    Tensor out({n, oh, ow, c});
    if (argmax) argmax->assign(out.size(), 0);
    for (std::size_t s = 0; s < n; ++s)
        for (std::size_t y = 0; y < oh; ++y)
            for (std::size_t x = 0; x < ow; ++x)
                for (std::size_t ch = 0; ch < c; ++ch) {
                    std::size_t best = ((s * h + 2 * y) * wd + 2 * x) * c + ch;
                    for (std::size_t dy = 0; dy < 2; ++dy)
                        for (std::size_t dx = 0; dx < 2; ++dx) {
                            const std::size_t idx = ((s * h + 2 * y + dy) * wd + 2 * x + dx) * c + ch;
                            if (in[idx] > in[best]) best = idx;
                        }
                    const std::size_t o = ((s * oh + y) * ow + x) * c + ch;
                    out[o] = in[best];
                    if (argmax) (*argmax)[o] = static_cast<std::uint32_t>(best);
                }
    return out;
}

} // namespace

Tensor layer_forward(const Layer& layer, const Tensor& input, LayerCache* cache) {
    const Shape out_sample = layer.output_shape(sample_shape(input));
    Tensor out;
    std::vector<std::uint32_t> argmax;
    switch (layer.kind) {
    case LayerKind::dense: out = dense_forward(layer, input); break;
    case LayerKind::conv2d: out = conv_forward(layer, input); break;
    case LayerKind::maxpool2x2: out = maxpool_forward(input, cache ? &argmax : nullptr); break;
    case LayerKind::relu:
        out = input;
        for (double& v : out.values()) v = v > 0.0 ? v : 0.0;
        break;
    case LayerKind::sigmoid:
        out = input;
        for (double& v : out.values()) v = sigmoid(v);
        break;
    case LayerKind::flatten: out = input.reshaped(with_batch(input.dim(0), out_sample)); break;
    }
    if (cache) {
        cache->input = input;
        cache->output = out;
        cache->argmax = std::move(argmax);
    }
    return out;
}

Tensor layer_backward(const Layer& layer, const LayerCache& cache, const Tensor& grad_output, LayerGrads* grads) {
    require_same_shape(cache.output, grad_output, std::string(to_string(layer.kind)) + " backward");
    const Tensor& in = cache.input;
    switch (layer.kind) {
    case LayerKind::dense: return dense_backward(layer, in, grad_output, grads);
    case LayerKind::conv2d: return conv_backward(layer, in, grad_output, grads);
    case LayerKind::maxpool2x2: {
        if (cache.argmax.size() != grad_output.size()) throw StateError("maxpool cache holds no argmax indices");
        Tensor gi(in.shape(), 0.0);
        for (std::size_t o = 0; o < grad_output.size(); ++o) gi[cache.argmax[o]] += grad_output[o];
        return gi;
    }
    case LayerKind::relu: {
        Tensor gi = grad_output;
        for (std::size_t i = 0; i < gi.size(); ++i)
            if (!(in[i] > 0.0)) gi[i] = 0.0;
        return gi;
    }
    case LayerKind::sigmoid: {
        Tensor gi = grad_output;
        for (std::size_t i = 0; i < gi.size(); ++i) gi[i] *= cache.output[i] * (1.0 - cache.output[i]);
        return gi;
    }
    case LayerKind::flatten: return grad_output.reshaped(in.shape());
    }
    return grad_output;
}

Network::Network(Shape input_shape, std::vector<Layer> layers)
    : input_shape_(std::move(input_shape)), layers_(std::move(layers)) {
    Shape s = input_shape_;
    for (std::size_t i = 0; i < layers_.size(); ++i) {
        const Layer& l = layers_[i];
        if (l.has_params() != (l.weights.has_value() && l.bias.has_value()))
            throw ShapeError("layer " + std::to_string(i) + ": parameters present iff dense or conv2d");
        if (l.kind == LayerKind::dense) {
            if (l.weights->shape() != Shape{l.out, l.in} || l.bias->shape() != Shape{l.out})
                throw ShapeError("layer " + std::to_string(i) + ": dense parameter shapes do not match geometry");
        } else if (l.kind == LayerKind::conv2d) {
            if (l.weights->shape() != Shape{l.out, 3, 3, l.in} || l.bias->shape() != Shape{l.out})
                throw ShapeError("layer " + std::to_string(i) + ": conv2d parameter shapes do not match geometry");
        }
        try {
            s = l.output_shape(s);
        } catch (const ShapeError& e) {
            throw ShapeError("layer " + std::to_string(i) + ": " + e.what());
        }
        if (l.has_params()) {
            params_.push_back({i, false});
            params_.push_back({i, true});
        }
    }
    output_shape_ = s;
}

const Tensor& Network::parameter(std::size_t index) const {
    const ParamRef& r = params_.at(index);
    const Layer& l = layers_[r.layer];
    return r.is_bias ? *l.bias : *l.weights;
}

Tensor& Network::mutable_parameter(std::size_t index) {
    const ParamRef& r = params_.at(index);
    Layer& l = layers_[r.layer];
    return r.is_bias ? *l.bias : *l.weights;
}

void Network::set_parameter(std::size_t index, Tensor value) {
    Tensor& p = mutable_parameter(index);
    require_same_shape(p, value, "set parameter " + std::to_string(index));
    p = std::move(value);
    ++revision_;
}

std::size_t Network::parameter_element_count() const {
    std::size_t n = 0;
    for (std::size_t i = 0; i < params_.size(); ++i) n += parameter(i).size();
    return n;
}

void Network::init_uniform(std::uint64_t seed, double lo, double hi) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> dist(lo, hi);
    for (std::size_t i = 0; i < params_.size(); ++i)
        for (double& v : mutable_parameter(i).values()) v = dist(rng);
    ++revision_;
}

std::size_t Network::score_layer_count() const noexcept {
    if (!layers_.empty() && layers_.back().kind == LayerKind::sigmoid) return layers_.size() - 1;
    return layers_.size();
}

ForwardResult forward(const Network& network, const Tensor& batch) {
    if (sample_shape(batch) != network.input_shape())
        throw ShapeError("layer 0: input sample shape " + shape_string(sample_shape(batch)) + ", network expects " +
                         shape_string(network.input_shape()));
    ForwardResult r;
    r.cache.network = &network;
    r.cache.revision = network.revision();
    r.cache.layers.resize(network.layers().size());
    Tensor a = batch;
    const std::size_t score_end = network.score_layer_count();
    for (std::size_t i = 0; i < network.layers().size(); ++i) {
        if (i == score_end) r.scores = a;
        try {
            a = layer_forward(network.layers()[i], a, &r.cache.layers[i]);
        } catch (const ShapeError& e) {
            throw ShapeError("layer " + std::to_string(i) + ": " + e.what());
        }
    }
    if (score_end == network.layers().size()) r.scores = a;
    r.output = std::move(a);
    return r;
}

std::vector<Tensor> backward(const Network& network, const ForwardCache& cache, const Tensor& grad_wrt_scores) {
    if (cache.network != &network || cache.layers.size() != network.layers().size())
        throw StateError("forward cache is absent or belongs to another network");
    if (cache.revision != network.revision()) throw StateError("forward cache is stale: parameters changed since forward");

    const auto& layers = network.layers();
    std::vector<LayerGrads> layer_grads(layers.size());
    Tensor g = grad_wrt_scores;
    for (std::size_t i = network.score_layer_count(); i-- > 0;)
        g = layer_backward(layers[i], cache.layers[i], g, &layer_grads[i]);

    std::vector<Tensor> out;
    out.reserve(network.parameters().size());
    for (const ParamRef& r : network.parameters()) {
        auto& lg = layer_grads[r.layer];
        out.push_back(std::move(r.is_bias ? *lg.bias : *lg.weights));
    }
    return out;
}

LossForm parse_loss_form(std::string_view text) {
    if (text == "as-printed" || text == "as_printed") return LossForm::as_printed;
    if (text == "standard") return LossForm::standard;
    throw ArgumentError("unknown loss form '" + std::string(text) + "' (expected as-printed|standard)");
}

std::string_view to_string(LossForm form) { return form == LossForm::as_printed ? "as-printed" : "standard"; }

LossOutput bce_loss(const Tensor& scores, const Tensor& targets, std::size_t batch_size, LossForm form) {
    require_same_shape(scores, targets, "bce loss");
    if (scores.rank() != 2 || scores.dim(0) != batch_size)
        throw ShapeError("bce loss expects scores shaped [" + std::to_string(batch_size) + ", C], got " +
                         shape_string(scores.shape()));
    const double m = static_cast<double>(batch_size);
    LossOutput r{0.0, Tensor(scores.shape(), 0.0)};
    for (std::size_t i = 0; i < scores.size(); ++i) {
        const double t = targets[i];
        const double f = sigmoid(scores[i]);
        const double fc = std::clamp(f, kProbabilityClamp, 1.0 - kProbabilityClamp);
        if (form == LossForm::as_printed) {
            r.value -= t * std::log(fc);
            r.grad_wrt_scores[i] = -t * (1.0 - f) / m;
        } else {
            r.value -= t * std::log(fc) + (1.0 - t) * std::log(1.0 - fc);
            r.grad_wrt_scores[i] = (f - t) / m;
        }
    }
    r.value /= m;
    return r;
}

double accuracy(const Tensor& output, const Tensor& targets) {
    require_same_shape(output, targets, "accuracy");
    if (output.rank() != 2) throw ShapeError("accuracy expects [N, C]");
    const std::size_t n = output.dim(0), c = output.dim(1);
    std::size_t hits = 0;
    for (std::size_t s = 0; s < n; ++s) {
        const double* o = output.data() + s * c;
        const double* t = targets.data() + s * c;
        if (std::max_element(o, o + c) - o == std::max_element(t, t + c) - t) ++hits;
    }
    return static_cast<double>(hits) / static_cast<double>(n);
}

std::vector<ParamState> make_param_states(const Network& network, const FgdConfig& cfg) {
    std::vector<ParamState> states;
    states.reserve(network.parameters().size());
    for (std::size_t i = 0; i < network.parameters().size(); ++i) states.push_back(init_state(network.parameter(i), cfg));
    return states;
}

TrainStepResult train_step(Network& network, const Tensor& images, const Tensor& labels,
                           std::vector<ParamState>& states, const FgdConfig& cfg, LossForm form) {
    if (states.size() != network.parameters().size())
        throw StateError("expected " + std::to_string(network.parameters().size()) + " parameter states, got " +
                         std::to_string(states.size()));
    ForwardResult fr = forward(network, images);
    LossOutput loss = bce_loss(fr.scores, labels, images.dim(0), form);
    if (!std::isfinite(loss.value)) throw NumericError("non-finite training loss", states.empty() ? 0 : states[0].iteration);

    TrainStepResult r;
    r.loss = loss.value;
    r.accuracy = accuracy(fr.output, labels);
    r.gradients = backward(network, fr.cache, loss.grad_wrt_scores);
    r.reports.reserve(states.size());
    for (std::size_t p = 0; p < states.size(); ++p) {
        try {
            r.reports.push_back(step(states[p], r.gradients[p], cfg));
        } catch (const Error& e) {
            const ParamRef& ref = network.parameters()[p];
            throw NumericError("layer " + std::to_string(ref.layer) + (ref.is_bias ? " bias: " : " weights: ") + e.what(),
                               states[p].iteration);
        }
        network.set_parameter(p, states[p].current);
    }
    return r;
}

Evaluation evaluate(const Network& network, const Tensor& images, const Tensor& labels, LossForm form,
                    std::size_t chunk) {
    const std::size_t n = images.dim(0);
    if (labels.dim(0) != n) throw ShapeError("evaluate: image and label counts differ");
    double loss_sum = 0.0, hits = 0.0;
    for (std::size_t b = 0; b < n; b += chunk) {
        const std::size_t e = std::min(n, b + chunk);
        const Tensor x = slice_rows(images, b, e);
        const Tensor t = slice_rows(labels, b, e);
        ForwardResult fr = forward(network, x);
        loss_sum += bce_loss(fr.scores, t, e - b, form).value * static_cast<double>(e - b);
        hits += accuracy(fr.output, t) * static_cast<double>(e - b);
    }
    return {loss_sum / static_cast<double>(n), hits / static_cast<double>(n)};
}

Network make_toy_vgg(std::size_t side, std::size_t channels, std::size_t classes) {
    if (side % 4) throw ArgumentError("toy network input side must be divisible by 4");
    const std::size_t flat = (side / 4) * (side / 4) * 16;
    return Network({side, side, channels},
                   {Layer::conv2d(channels, 8), Layer::relu(), Layer::maxpool2x2(), Layer::conv2d(8, 16), Layer::relu(),
                    Layer::maxpool2x2(), Layer::flatten(), Layer::dense(flat, 32), Layer::relu(),
                    Layer::dense(32, classes), Layer::sigmoid()});
}

Network make_vgg16(std::size_t side, std::size_t channels, std::size_t classes) {
    if (side % 32) throw ArgumentError("VGG-16 input side must be divisible by 32");
    std::vector<Layer> layers;
    std::size_t in = channels;
    const std::vector<std::vector<std::size_t>> blocks = {{64, 64}, {128, 128}, {256, 256, 256}, {512, 512, 512},
                                                          {512, 512, 512}};
    for (const auto& block : blocks) {
        for (std::size_t out : block) {
            layers.push_back(Layer::conv2d(in, out));
            layers.push_back(Layer::relu());
            in = out;
        }
        layers.push_back(Layer::maxpool2x2());
    }
    const std::size_t flat = (side / 32) * (side / 32) * 512;
    layers.push_back(Layer::flatten());
    layers.push_back(Layer::dense(flat, 4096));
    layers.push_back(Layer::relu());
    layers.push_back(Layer::dense(4096, 4096));
    layers.push_back(Layer::relu());
    layers.push_back(Layer::dense(4096, classes));
    layers.push_back(Layer::sigmoid());
    return Network({side, side, channels}, std::move(layers));
}

Tensor slice_rows(const Tensor& t, std::size_t begin, std::size_t end) {
    if (t.rank() < 1 || begin >= end || end > t.dim(0)) throw ShapeError("slice_rows: bad range");
    const std::size_t row = t.size() / t.dim(0);
    Shape s = t.shape();
    s[0] = end - begin;
    return Tensor(std::move(s), std::vector<double>(t.vec().begin() + static_cast<std::ptrdiff_t>(begin * row),
                                                    t.vec().begin() + static_cast<std::ptrdiff_t>(end * row)));
}

Tensor gather_rows(const Tensor& t, const std::vector<std::size_t>& rows) {
    if (t.rank() < 1 || rows.empty()) throw ShapeError("gather_rows: empty selection");
    const std::size_t row = t.size() / t.dim(0);
    Shape s = t.shape();
    s[0] = rows.size();
    std::vector<double> data;
    data.reserve(rows.size() * row);
    for (std::size_t r : rows) {
        if (r >= t.dim(0)) throw ShapeError("gather_rows: row out of range");
        data.insert(data.end(), t.vec().begin() + static_cast<std::ptrdiff_t>(r * row),
                    t.vec().begin() + static_cast<std::ptrdiff_t>((r + 1) * row));
    }
    return Tensor(std::move(s), std::move(data));
}

} // namespace fracgrad
