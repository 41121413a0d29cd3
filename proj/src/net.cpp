#include "rbedl/net.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

#include "rbedl/rng.hpp"

namespace rbedl {
namespace {

// out(o) = bias(o) + sum_i w(o, i) * in(i) with zero padding k / 2.
Field conv_forward(const ConvLayer& layer, const Field& in) {
    const std::size_t h = in.height(), w = in.width();
    const auto pad = static_cast<std::ptrdiff_t>(layer.k / 2);
    const auto H = static_cast<std::ptrdiff_t>(h), W = static_cast<std::ptrdiff_t>(w);
    Field out(layer.out, h, w);
    for (std::size_t o = 0; o < layer.out; ++o) {
        double* dst = out.plane(o);
        std::fill(dst, dst + h * w, layer.bias[o]);
        for (std::size_t i = 0; i < layer.in; ++i) {
            const double* src = in.plane(i);
            for (std::size_t ky = 0; ky < layer.k; ++ky) {
                const std::ptrdiff_t dy = static_cast<std::ptrdiff_t>(ky) - pad;
                for (std::size_t kx = 0; kx < layer.k; ++kx) {
                    const std::ptrdiff_t dx = static_cast<std::ptrdiff_t>(kx) - pad;
                    const double wt = layer.w(o, i, ky, kx);
                    const std::ptrdiff_t x0 = std::max<std::ptrdiff_t>(0, -dx);
                    const std::ptrdiff_t x1 = std::min(W, W - dx);
                    for (std::ptrdiff_t y = std::max<std::ptrdiff_t>(0, -dy); y < std::min(H, H - dy); ++y) {
                        double* row = dst + y * W;
                        const double* srow = src + (y + dy) * W;
                        for (std::ptrdiff_t x = x0; x < x1; ++x) row[x] += wt * srow[x + dx];
                    }
                }
            }
        }
    }
    return out;
}

// Accumulates kernel and bias gradients into grad; returns d loss / d input
// when want_input is set.
Field conv_backward(const ConvLayer& layer, const Field& in, const Field& g_out, ConvLayer& grad, bool want_input) {
    const std::size_t h = in.height(), w = in.width();
    const auto pad = static_cast<std::ptrdiff_t>(layer.k / 2);
    const auto H = static_cast<std::ptrdiff_t>(h), W = static_cast<std::ptrdiff_t>(w);
    Field g_in;
    if (want_input) g_in = Field(layer.in, h, w);
    for (std::size_t o = 0; o < layer.out; ++o) {
        const double* go = g_out.plane(o);
        grad.bias[o] += std::accumulate(go, go + h * w, 0.0);
        for (std::size_t i = 0; i < layer.in; ++i) {
            const double* src = in.plane(i);
            double* gi = want_input ? g_in.plane(i) : nullptr;
            for (std::size_t ky = 0; ky < layer.k; ++ky) {
                const std::ptrdiff_t dy = static_cast<std::ptrdiff_t>(ky) - pad;
                for (std::size_t kx = 0; kx < layer.k; ++kx) {
                    const std::ptrdiff_t dx = static_cast<std::ptrdiff_t>(kx) - pad;
                    const double wt = layer.w(o, i, ky, kx);
                    const std::ptrdiff_t x0 = std::max<std::ptrdiff_t>(0, -dx);
                    const std::ptrdiff_t x1 = std::min(W, W - dx);
                    double acc = 0.0;
                    for (std::ptrdiff_t y = std::max<std::ptrdiff_t>(0, -dy); y < std::min(H, H - dy); ++y) {
                        const double* grow = go + y * W;
                        const double* srow = src + (y + dy) * W;
                        for (std::ptrdiff_t x = x0; x < x1; ++x) acc += grow[x] * srow[x + dx];
                        if (gi) {
                            double* irow = gi + (y + dy) * W;
                            for (std::ptrdiff_t x = x0; x < x1; ++x) irow[x + dx] += wt * grow[x];
                        }
                    }
                    grad.w(o, i, ky, kx) += acc;
                }
            }
        }
    }
    return g_in;
}

void relu_inplace(Field& f) {
    for (double& v : f.values()) v = v > 0.0 ? v : 0.0;
}

// Zeroes the gradient wherever the pre-activation was not positive.
void relu_mask(Field& grad, const Field& pre) {
    for (std::size_t i = 0; i < grad.size(); ++i)
        if (!(pre[i] > 0.0)) grad[i] = 0.0;
}

void check_input(const NetParams& params, const Field& image) {
    if (image.channels() != params.in_channels)
        throw ShapeError("net: image has " + std::to_string(image.channels()) + " channels, model expects " +
                         std::to_string(params.in_channels));
    if (image.plane_size() == 0) throw ShapeError("net: empty image");
    for (double v : image.values())
        if (!std::isfinite(v)) throw ContractViolation("net: non-finite input intensity");
}

struct Activations {
    Field z1, a1, z2, a2, z3;
};

Activations run_forward(const NetParams& p, const Field& image) {
    Activations act;
    act.z1 = conv_forward(p.conv1, image);
    act.a1 = act.z1;
    relu_inplace(act.a1);
    act.z2 = conv_forward(p.conv2, act.a1);
    act.a2 = act.z2;
    relu_inplace(act.a2);
    act.z3 = conv_forward(p.head, act.a2);
    return act;
}

void fill_uniform(std::vector<double>& v, double limit, Rng& rng) {
    for (double& x : v) x = rng.uniform(-limit, limit);
}

}  // namespace

ConvLayer::ConvLayer(std::size_t out_channels, std::size_t in_channels, std::size_t kernel)
    : out(out_channels), in(in_channels), k(kernel),
      weight(out_channels * in_channels * kernel * kernel, 0.0), bias(out_channels, 0.0) {}

NetParams NetParams::zeros(std::size_t in_channels, std::size_t classes) {
    if (in_channels < 1) throw std::invalid_argument("NetParams: need at least one input channel");
    if (classes < 2) throw std::invalid_argument("NetParams: need at least two classes");
    NetParams p;
    p.in_channels = in_channels;
    p.classes = classes;
    p.conv1 = ConvLayer(kHiddenChannels, in_channels, 3);
    p.conv2 = ConvLayer(kHiddenChannels, kHiddenChannels, 3);
    p.head = ConvLayer(classes, kHiddenChannels, 1);
    return p;
}

NetParams NetParams::init(std::size_t in_channels, std::size_t classes, std::uint64_t seed) {
    NetParams p = zeros(in_channels, classes);
    Rng rng(seed);
    for (ConvLayer* layer : {&p.conv1, &p.conv2, &p.head}) {
        const double fan = static_cast<double>((layer->in + layer->out) * layer->k * layer->k);
        fill_uniform(layer->weight, std::sqrt(6.0 / fan), rng);
    }
    return p;
}

std::vector<std::span<double>> NetParams::tensors() {
    return {conv1.weight, conv1.bias, conv2.weight, conv2.bias, head.weight, head.bias};
}

std::vector<std::span<const double>> NetParams::tensors() const {
    return {conv1.weight, conv1.bias, conv2.weight, conv2.bias, head.weight, head.bias};
}

std::vector<std::vector<std::size_t>> NetParams::tensor_shapes() const {
    std::vector<std::vector<std::size_t>> shapes;
    for (const ConvLayer* layer : {&conv1, &conv2, &head}) {
        shapes.push_back({layer->out, layer->in, layer->k, layer->k});
        shapes.push_back({layer->out});
    }
    return shapes;
}

std::size_t NetParams::parameter_count() const {
    std::size_t n = 0;
    for (auto t : tensors()) n += t.size();
    return n;
}

std::vector<double> NetParams::flat() const {
    std::vector<double> out;
    out.reserve(parameter_count());
    for (auto t : tensors()) out.insert(out.end(), t.begin(), t.end());
    return out;
}

void NetParams::assign_flat(std::span<const double> values) {
    if (values.size() != parameter_count()) throw ShapeError("NetParams: flat size mismatch");
    for (auto t : tensors()) {
        std::copy_n(values.begin(), t.size(), t.begin());
        values = values.subspan(t.size());
    }
}

bool NetParams::same_shape(const NetParams& other) const {
    return in_channels == other.in_channels && classes == other.classes;
}

EvidenceField forward(const NetParams& params, const Field& image) {
    check_input(params, image);
    Activations act = run_forward(params, image);
    relu_inplace(act.z3);
    return {std::move(act.z3)};
}

double min_abs_preactivation(const NetParams& params, const Field& image) {
    check_input(params, image);
    const Activations act = run_forward(params, image);
    double m = std::numeric_limits<double>::infinity();
    for (const Field* z : {&act.z1, &act.z2, &act.z3})
        for (double v : z->values()) m = std::min(m, std::abs(v));
    return m;
}

Backward backward(const NetParams& params, const Field& image, const LabelField& y, const LossConfig& cfg,
                  int epoch) {
    check_input(params, image);
    const Activations act = run_forward(params, image);
    Field evidence = act.z3;
    relu_inplace(evidence);
    EdlEvaluation eval = evaluate_edl({std::move(evidence)}, y, cfg, epoch);

    Backward out{eval.value, NetParams::zeros(params.in_channels, params.classes)};
    Field g = std::move(eval.grad);
    relu_mask(g, act.z3);
    g = conv_backward(params.head, act.a2, g, out.grad.head, true);
    relu_mask(g, act.z2);
    g = conv_backward(params.conv2, act.a1, g, out.grad.conv2, true);
    relu_mask(g, act.z1);
    conv_backward(params.conv1, image, g, out.grad.conv1, false);
    return out;
}

AdamState AdamState::for_params(const NetParams& params) {
    return {NetParams::zeros(params.in_channels, params.classes), NetParams::zeros(params.in_channels, params.classes)};
}

void adam_step(NetParams& params, const NetParams& grad, AdamState& state, std::int64_t t, const AdamConfig& cfg) {
    if (t < 1) throw std::invalid_argument("adam_step: t must be >= 1");
    if (!params.same_shape(grad) || !params.same_shape(state.m) || !params.same_shape(state.v))
        throw ShapeError("adam_step: parameter, gradient and state shapes differ");
    const double c1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(t));
    const double c2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(t));
    auto p = params.tensors();
    auto g = grad.tensors();
    auto m = state.m.tensors();
    auto v = state.v.tensors();
    for (std::size_t k = 0; k < p.size(); ++k) {
        for (std::size_t i = 0; i < p[k].size(); ++i) {
            const double gi = g[k][i];
            m[k][i] = cfg.beta1 * m[k][i] + (1.0 - cfg.beta1) * gi;
            v[k][i] = cfg.beta2 * v[k][i] + (1.0 - cfg.beta2) * gi * gi;
            const double m_hat = m[k][i] / c1;
            const double v_hat = v[k][i] / c2;
            p[k][i] -= cfg.lr * m_hat / (std::sqrt(v_hat) + cfg.eps);
        }
    }
}

void TrainConfig::validate() const {
    if (epochs < 1) throw std::invalid_argument("train: epochs must be >= 1");
    if (!(adam.lr > 0.0) || !std::isfinite(adam.lr)) throw std::invalid_argument("train: lr must be > 0");
    loss.validate();
}

TrainResult train(const std::vector<TrainSample>& data, const TrainConfig& cfg, const EpochCallback& on_epoch) {
    cfg.validate();
    if (data.empty()) throw std::invalid_argument("train: empty dataset");
    const std::size_t in_channels = data.front().image.channels();
    const std::size_t classes = data.front().labels.classes();
    for (const auto& s : data)
        if (s.image.channels() != in_channels || s.labels.classes() != classes ||
            !s.image.same_plane(s.labels.labels()))
            throw ShapeError("train: samples disagree on shape or class count");

    TrainResult result{NetParams::init(in_channels, classes, derive_seed(cfg.seed, 0)), {}, 0};
    AdamState state = AdamState::for_params(result.params);
    Rng order_rng(derive_seed(cfg.seed, 1));
    std::vector<std::size_t> order(data.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    result.trace.reserve(static_cast<std::size_t>(cfg.epochs));

    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        order_rng.shuffle(order.begin(), order.end());
        LossValue mean;
        for (std::size_t idx : order) {
            const Backward b = backward(result.params, data[idx].image, data[idx].labels, cfg.loss, epoch);
            adam_step(result.params, b.grad, state, ++result.steps, cfg.adam);
            mean.total += b.value.total;
            mean.data_term += b.value.data_term;
            mean.kl_term += b.value.kl_term;
            mean.lambda = b.value.lambda;
        }
        const double n = static_cast<double>(data.size());
        mean.total /= n;
        mean.data_term /= n;
        mean.kl_term /= n;
        result.trace.push_back(mean);
        if (on_epoch) on_epoch(epoch, result.params, mean);
    }
    return result;
}

Grid<std::uint8_t> argmax_labels(const DirichletField& d) {
    Grid<std::uint8_t> labels(d.height(), d.width(), 0);
    const Field& p = d.p_hat();
    for (std::size_t i = 0; i < d.voxels(); ++i) {
        std::size_t best = 0;
        for (std::size_t j = 1; j < d.classes(); ++j)
            if (p.at(j, i) > p.at(best, i)) best = j;
        labels[i] = static_cast<std::uint8_t>(best);
    }
    return labels;
}

Prediction predict(const NetParams& params, const Field& image) {
    DirichletField d = evidence_to_alpha(forward(params, image));
    UncertaintyMap u = npe_map(d);
    Grid<std::uint8_t> labels = argmax_labels(d);
    return {std::move(d), std::move(u), std::move(labels)};
}

}  // namespace rbedl
