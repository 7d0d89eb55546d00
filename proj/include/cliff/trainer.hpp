#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "cliff/autodiff.hpp"
#include "cliff/criterion.hpp"
#include "cliff/synthdata.hpp"

namespace cliff::trainer {

/// Aborts a run on non-finite loss or gradients; carries the last epoch
/// that completed cleanly.
struct NumericalAbort : Error {
    NumericalAbort(const std::string& msg, int last_good) : Error(msg), last_good_epoch(last_good) {}
    int last_good_epoch;
};

/// tanh MLP; the final layer is linear.
struct EncoderSpec {
    std::vector<int> layer_dims = {2, 50, 100, 50, 2};

    void validate() const;
    int input_dim() const { return layer_dims.front(); }
    int output_dim() const { return layer_dims.back(); }
};

struct EncoderParams {
    EncoderSpec spec;
    std::vector<std::vector<double>> weights;  // per layer, fan_in x fan_out row-major
    std::vector<std::vector<double>> biases;   // per layer, fan_out

    std::size_t layer_count() const { return weights.size(); }
};

/// Weights uniform in +-1/sqrt(fan_in), biases zero.
EncoderParams init_encoder(const EncoderSpec& spec, std::uint64_t seed);

struct EncoderGraph {
    ad::Tensor output;                    // n x d
    std::vector<ad::Tensor> weight_leaves;
    std::vector<ad::Tensor> bias_leaves;
};

/// Forward pass through the differentiable graph; leaves are params.
EncoderGraph encode(const EncoderParams& params, const ad::Tensor& x);

/// Plain-arithmetic forward pass (no graph); n x D row-major input.
std::vector<double> encode_plain(const EncoderParams& params, const std::vector<double>& x,
                                 std::size_t n);

struct AdamState {
    std::vector<std::vector<double>> m;
    std::vector<std::vector<double>> v;
    long step = 0;
};

AdamState make_adam_state(const std::vector<std::vector<double>>& params);

/// Standard bias-corrected Adam update, epsilon outside the square root.
void adam_step(std::vector<std::vector<double>>& params,
               const std::vector<std::vector<double>>& grads, AdamState& state, double lr,
               double beta1, double beta2, double eps);

struct TrainConfig {
    double learning_rate = 0.002;
    std::size_t batch_size = 5000;  // equal to the dataset size -> full batch
    int epochs = 1000;
    double adam_beta1 = 0.9;
    double adam_beta2 = 0.999;
    double adam_eps = 1e-8;
    criterion::CliffWeights weights;
    std::uint64_t init_seed = 1;
    std::uint64_t zeta_seed = 1;

    void validate() const;
};

struct EpochRecord {
    int epoch = 0;
    criterion::CliffLossReport report;
};

struct TrainResult {
    EncoderParams params;
    std::vector<EpochRecord> log;
};

/// Optimizes L_Cliff over the observed data. The zeta stream is seeded
/// independently of the initialization so the stochasticity sources stay
/// separable. Throws NumericalAbort on NaN loss/gradients.
TrainResult train(const synth::LatentBatch& observed, const EncoderSpec& enc,
                  const TrainConfig& cfg,
                  const std::function<void(const EpochRecord&)>& on_epoch = {});

}  // namespace cliff::trainer
