#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "rbedl/evidence.hpp"
#include "rbedl/losses.hpp"
#include "rbedl/metrics.hpp"

namespace rbedl {

// Convolution kernel (out, in, k, k) plus one bias per output channel.
struct ConvLayer {
    std::size_t out = 0, in = 0, k = 0;
    std::vector<double> weight;
    std::vector<double> bias;

    ConvLayer() = default;
    ConvLayer(std::size_t out_channels, std::size_t in_channels, std::size_t kernel);
    double& w(std::size_t o, std::size_t i, std::size_t ky, std::size_t kx) {
        return weight[((o * in + i) * k + ky) * k + kx];
    }
    double w(std::size_t o, std::size_t i, std::size_t ky, std::size_t kx) const {
        return weight[((o * in + i) * k + ky) * k + kx];
    }
    friend bool operator==(const ConvLayer&, const ConvLayer&) = default;
};

inline constexpr std::size_t kHiddenChannels = 8;

// conv1 (8, C_in, 3, 3), conv2 (8, 8, 3, 3), head (K, 8, 1, 1).
struct NetParams {
    std::size_t in_channels = 0;
    std::size_t classes = 0;
    ConvLayer conv1, conv2, head;

    // All-zero parameters of the right shape.
    static NetParams zeros(std::size_t in_channels, std::size_t classes);
    // Uniform in +-sqrt(6 / (fan_in + fan_out)) with fan = channels * k * k,
    // biases zero.
    static NetParams init(std::size_t in_channels, std::size_t classes, std::uint64_t seed);

    // Weight and bias arrays in file order: conv1.w, conv1.b, conv2.w, ...
    std::vector<std::span<double>> tensors();
    std::vector<std::span<const double>> tensors() const;
    // Dimensions matching tensors().
    std::vector<std::vector<std::size_t>> tensor_shapes() const;
    std::size_t parameter_count() const;
    // All parameters concatenated in tensors() order, and its inverse.
    std::vector<double> flat() const;
    void assign_flat(std::span<const double> values);
    bool same_shape(const NetParams& other) const;
    friend bool operator==(const NetParams&, const NetParams&) = default;
};

EvidenceField forward(const NetParams& params, const Field& image);

// Smallest |pre-activation| over every ReLU in the network. Finite
// differences with step h are only meaningful when this stays clear of h.
double min_abs_preactivation(const NetParams& params, const Field& image);

struct Backward {
    LossValue value;
    NetParams grad;
};

Backward backward(const NetParams& params, const Field& image, const LabelField& y, const LossConfig& cfg,
                  int epoch);

struct AdamConfig {
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

struct AdamState {
    NetParams m, v;
    static AdamState for_params(const NetParams& params);
};

// One bias-corrected Adam update at step t >= 1.
void adam_step(NetParams& params, const NetParams& grad, AdamState& state, std::int64_t t, const AdamConfig& cfg);

struct TrainSample {
    Field image;
    LabelField labels;
};

struct TrainConfig {
    int epochs = 200;
    std::uint64_t seed = 0;
    LossConfig loss;
    AdamConfig adam;

    // Throws std::invalid_argument on epochs < 1 or lr <= 0.
    void validate() const;
};

struct TrainResult {
    NetParams params;
    // Per-epoch means over the epoch's steps.
    std::vector<LossValue> trace;
    std::int64_t steps = 0;
};

// Called after each epoch with (epoch index, current params, epoch mean loss).
using EpochCallback = std::function<void(int, const NetParams&, const LossValue&)>;

// Batch size 1. Initial params come from derive_seed(seed, 0); the sample order
// is reshuffled every epoch from a generator seeded with derive_seed(seed, 1).
TrainResult train(const std::vector<TrainSample>& data, const TrainConfig& cfg, const EpochCallback& on_epoch = {});

struct Prediction {
    DirichletField dirichlet;
    UncertaintyMap uncertainty;
    Grid<std::uint8_t> labels;
};

// Argmax of the expected probability; ties go to the lower class index.
Grid<std::uint8_t> argmax_labels(const DirichletField& d);
Prediction predict(const NetParams& params, const Field& image);

}  // namespace rbedl
