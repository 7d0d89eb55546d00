#include "cliff/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "cliff/rng.hpp"

namespace cliff::trainer {

void EncoderSpec::validate() const {
    if (layer_dims.size() < 2) throw DomainError("EncoderSpec: need at least one layer");
    for (int dim : layer_dims)
        if (dim < 1) throw DomainError("EncoderSpec: layer dims must be positive");
}

EncoderParams init_encoder(const EncoderSpec& spec, std::uint64_t seed) {
    spec.validate();
    EncoderParams p;
    p.spec = spec;
    std::mt19937_64 g(seed);
    for (std::size_t l = 0; l + 1 < spec.layer_dims.size(); ++l) {
        const int fan_in = spec.layer_dims[l];
        const int fan_out = spec.layer_dims[l + 1];
        const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
        std::vector<double> w(static_cast<std::size_t>(fan_in) * fan_out);
        for (auto& v : w) v = rng::uniform(g, -bound, bound);
        p.weights.push_back(std::move(w));
        p.biases.emplace_back(static_cast<std::size_t>(fan_out), 0.0);
    }
    return p;
}

EncoderGraph encode(const EncoderParams& params, const ad::Tensor& x) {
    const auto& dims = params.spec.layer_dims;
    if (x.cols() != static_cast<std::size_t>(dims.front()))
        throw ShapeError("encode: input width " + std::to_string(x.cols()) +
                         " does not match encoder input dim " + std::to_string(dims.front()));

    EncoderGraph gph;
    ad::Tensor h = x;
    for (std::size_t l = 0; l + 1 < dims.size(); ++l) {
        const auto fan_in = static_cast<std::size_t>(dims[l]);
        const auto fan_out = static_cast<std::size_t>(dims[l + 1]);
        ad::Tensor w = ad::Tensor::param(fan_in, fan_out, params.weights[l]);
        ad::Tensor b = ad::Tensor::param(1, fan_out, params.biases[l]);
        gph.weight_leaves.push_back(w);
        gph.bias_leaves.push_back(b);
        h = ad::add(ad::matmul(h, w), b);
        if (l + 2 < dims.size()) h = ad::tanh(h);
    }
    gph.output = h;
    return gph;
}

std::vector<double> encode_plain(const EncoderParams& params, const std::vector<double>& x,
                                 std::size_t n) {
    const auto& dims = params.spec.layer_dims;
    std::vector<double> h = x;
    for (std::size_t l = 0; l + 1 < dims.size(); ++l) {
        const auto fan_in = static_cast<std::size_t>(dims[l]);
        const auto fan_out = static_cast<std::size_t>(dims[l + 1]);
        std::vector<double> next(n * fan_out);
        for (std::size_t r = 0; r < n; ++r) {
            for (std::size_t c = 0; c < fan_out; ++c) {
                double acc = params.biases[l][c];
                for (std::size_t k = 0; k < fan_in; ++k)
                    acc += h[r * fan_in + k] * params.weights[l][k * fan_out + c];
                next[r * fan_out + c] = (l + 2 < dims.size()) ? std::tanh(acc) : acc;
            }
        }
        h = std::move(next);
    }
    return h;
}

AdamState make_adam_state(const std::vector<std::vector<double>>& params) {
    AdamState s;
    for (const auto& p : params) {
        s.m.emplace_back(p.size(), 0.0);
        s.v.emplace_back(p.size(), 0.0);
    }
    return s;
}

void adam_step(std::vector<std::vector<double>>& params,
               const std::vector<std::vector<double>>& grads, AdamState& state, double lr,
               double beta1, double beta2, double eps) {
    if (params.size() != grads.size() || params.size() != state.m.size())
        throw ShapeError("adam_step: state shapes do not match params");
    ++state.step;
    const double bc1 = 1.0 - std::pow(beta1, static_cast<double>(state.step));
    const double bc2 = 1.0 - std::pow(beta2, static_cast<double>(state.step));
    for (std::size_t p = 0; p < params.size(); ++p) {
        if (params[p].size() != grads[p].size())
            throw ShapeError("adam_step: gradient size mismatch in group " + std::to_string(p));
        for (std::size_t i = 0; i < params[p].size(); ++i) {
            const double g = grads[p][i];
            if (!std::isfinite(g))
                throw DomainError("adam_step: non-finite gradient in group " + std::to_string(p));
            state.m[p][i] = beta1 * state.m[p][i] + (1.0 - beta1) * g;
            state.v[p][i] = beta2 * state.v[p][i] + (1.0 - beta2) * g * g;
            const double mhat = state.m[p][i] / bc1;
            const double vhat = state.v[p][i] / bc2;
            params[p][i] -= lr * mhat / (std::sqrt(vhat) + eps);
        }
    }
}

void TrainConfig::validate() const {
    if (!(learning_rate >= 0.0)) throw DomainError("TrainConfig: learning rate must be >= 0");
    if (epochs < 1) throw DomainError("TrainConfig: epochs must be >= 1");
    if (batch_size < 2) throw DomainError("TrainConfig: batch size must be >= 2");
    weights.validate();
}

namespace {

// Flattens weight+bias groups into one vector-of-vectors view for Adam.
std::vector<std::vector<double>> collect_groups(const EncoderParams& p) {
    std::vector<std::vector<double>> groups;
    for (const auto& w : p.weights) groups.push_back(w);
    for (const auto& b : p.biases) groups.push_back(b);
    return groups;
}

void scatter_groups(EncoderParams& p, const std::vector<std::vector<double>>& groups) {
    const std::size_t layers = p.weights.size();
    for (std::size_t l = 0; l < layers; ++l) p.weights[l] = groups[l];
    for (std::size_t l = 0; l < layers; ++l) p.biases[l] = groups[layers + l];
}

}  // namespace

TrainResult train(const synth::LatentBatch& observed, const EncoderSpec& enc,
                  const TrainConfig& cfg, const std::function<void(const EpochRecord&)>& on_epoch) {
    enc.validate();
    cfg.validate();
    if (observed.n == 0) throw DomainError("train: dataset is empty");
    if (observed.d != static_cast<std::size_t>(enc.input_dim()))
        throw ShapeError("train: observed width does not match encoder input");
    const std::size_t n = observed.n;
    const std::size_t batch = std::min<std::size_t>(cfg.batch_size, n);
    if (batch < static_cast<std::size_t>(cfg.weights.m_conditioning) &&
        cfg.weights.lambda_biv > 0.0 && enc.output_dim() >= 2)
        throw DomainError("train: batch size must be >= M conditioning values");

    TrainResult result;
    result.params = init_encoder(enc, cfg.init_seed);
    AdamState adam = make_adam_state(collect_groups(result.params));
    std::mt19937_64 zeta_rng(cfg.zeta_seed);
    std::mt19937_64 shuffle_rng(cfg.init_seed ^ 0x9e3779b97f4a7c15ull);

    const bool full_batch = batch == n;
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});

    for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
        if (!full_batch) {
            for (std::size_t k = n - 1; k > 0; --k)
                std::swap(order[k], order[rng::index(shuffle_rng, k + 1)]);
        }

        EpochRecord record;
        record.epoch = epoch;
        std::size_t offset = 0;
        int batches = 0;
        while (offset < n) {
            std::size_t take = std::min(batch, n - offset);
            if (take < std::max<std::size_t>(2, static_cast<std::size_t>(
                                                    cfg.weights.m_conditioning)))
                break;  // drop a tail too small to condition on
            std::vector<double> xb(take * observed.d);
            for (std::size_t r = 0; r < take; ++r) {
                const std::size_t src = full_batch ? r : order[offset + r];
                for (std::size_t c = 0; c < observed.d; ++c)
                    xb[r * observed.d + c] = observed.at(src, c);
            }
            ad::Tensor x = ad::Tensor::constant(take, observed.d, std::move(xb));
            EncoderGraph graph = encode(result.params, x);

            criterion::TotalLoss loss;
            try {
                loss = criterion::total_loss(graph.output, cfg.weights, zeta_rng);
            } catch (const density::DegenerateFactorError& e) {
                throw NumericalAbort("epoch " + std::to_string(epoch) + ": " + e.what(),
                                     epoch - 1);
            }
            if (!std::isfinite(loss.total.item()))
                throw NumericalAbort("epoch " + std::to_string(epoch) + ": loss is not finite",
                                     epoch - 1);

            if (cfg.learning_rate > 0.0) {
                ad::backward(loss.total);
                std::vector<std::vector<double>> grads;
                for (const auto& w : graph.weight_leaves) grads.push_back(w.grad());
                for (const auto& b : graph.bias_leaves) grads.push_back(b.grad());
                auto groups = collect_groups(result.params);
                try {
                    adam_step(groups, grads, adam, cfg.learning_rate, cfg.adam_beta1,
                              cfg.adam_beta2, cfg.adam_eps);
                } catch (const DomainError& e) {
                    throw NumericalAbort("epoch " + std::to_string(epoch) + ": " + e.what(),
                                         epoch - 1);
                }
                scatter_groups(result.params, groups);
            }

            record.report = loss.report;
            ++batches;
            offset += take;
            if (full_batch) break;
        }
        (void)batches;
        result.log.push_back(record);
        if (on_epoch) on_epoch(record);
    }
    return result;
}

}  // namespace cliff::trainer
