#pragma once

// Block-structured network assembly and the per-sample forward/backward
// drivers. A network is `blocks` repetitions of (RotMap -> pooling) followed
// by the fixed head LogMap -> Vectorize -> [Threshold] -> FC -> SoftmaxLoss.
// The first block pools spatially (pair angle-max), further blocks pool
// temporally; any user-declared pooling sequence is accepted.

#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "lienet/errors.hpp"
#include "lienet/layers.hpp"
#include "lienet/skeleton.hpp"
#include "lienet/so3.hpp"

namespace lienet {

enum class LayerKind : std::uint8_t {
    RotMap,
    SpaPooling,
    TemPooling,
    GroupPooling,
    LogMap,
    Vectorize,
    ThresholdRelu,
    FullyConnected,
    SoftmaxLoss,
};

inline const char* layer_kind_name(LayerKind k) {
    switch (k) {
        case LayerKind::RotMap: return "RotMap";
        case LayerKind::SpaPooling: return "SpaPooling";
        case LayerKind::TemPooling: return "TemPooling";
        case LayerKind::GroupPooling: return "GroupPooling";
        case LayerKind::LogMap: return "LogMap";
        case LayerKind::Vectorize: return "Vectorize";
        case LayerKind::ThresholdRelu: return "ThresholdRelu";
        case LayerKind::FullyConnected: return "FullyConnected";
        case LayerKind::SoftmaxLoss: return "SoftmaxLoss";
    }
    return "?";
}

enum class PoolKind : std::uint8_t { Spatial = 0, Temporal = 1 };

struct NetworkSpec {
    int input_channels = 0;  // rotation features per frame
    int input_frames = 0;    // fixed sequence length after resampling
    int class_count = 0;
    std::vector<PoolKind> block_pooling;  // one entry per block
    int temporal_window = 4;
    bool use_threshold_relu = false;
    double relu_threshold = 0.1;
    bool vectorize_full = true;  // 9 matrix entries per feature (3 coords otherwise)
    std::vector<std::vector<int>> spatial_groups;  // optional second-stage pooling

    int blocks() const { return static_cast<int>(block_pooling.size()); }
};

/// Default pooling sequence: the first block pools spatially, every further
/// block temporally.
inline std::vector<PoolKind> default_block_pooling(int blocks) {
    std::vector<PoolKind> p;
    for (int b = 0; b < blocks; ++b) {
        p.push_back(b == 0 ? PoolKind::Spatial : PoolKind::Temporal);
    }
    return p;
}

struct LayerSpec {
    LayerKind kind;
    // group-stage geometry (meaningful up to and including LogMap)
    int in_frames = 0, in_channels = 0;
    int out_frames = 0, out_channels = 0;
    int window = 0;            // TemPooling
    double threshold = 0.0;    // ThresholdRelu
    int in_dim = 0, out_dim = 0;  // flat layers
};

/// Expands a NetworkSpec into the concrete layer stack with shapes, checking
/// every structural invariant. Throws InvalidSpec with an explanation.
inline std::vector<LayerSpec> plan_layers(const NetworkSpec& spec) {
    if (spec.input_channels < 1) throw InvalidSpec("input channel count must be >= 1");
    if (spec.input_frames < 1) throw InvalidSpec("input frame count must be >= 1");
    if (spec.class_count < 2) throw InvalidSpec("class count must be >= 2");
    if (spec.temporal_window < 2) throw InvalidSpec("temporal window must be >= 2");
    if (spec.relu_threshold < 0.0) throw InvalidSpec("threshold must be >= 0");

    std::vector<LayerSpec> stack;
    int frames = spec.input_frames;
    int channels = spec.input_channels;
    bool saw_spatial = false;

    auto push = [&](LayerSpec l) {
        stack.push_back(l);
    };

    for (int b = 0; b < spec.blocks(); ++b) {
        push({.kind = LayerKind::RotMap,
              .in_frames = frames,
              .in_channels = channels,
              .out_frames = frames,
              .out_channels = channels});
        if (spec.block_pooling[b] == PoolKind::Spatial) {
            if (channels % 2 != 0) {
                throw InvalidSpec("block " + std::to_string(b + 1) +
                                  ": spatial pooling needs an even channel count, got " +
                                  std::to_string(channels));
            }
            push({.kind = LayerKind::SpaPooling,
                  .in_frames = frames,
                  .in_channels = channels,
                  .out_frames = frames,
                  .out_channels = channels / 2});
            channels /= 2;
            if (!saw_spatial && !spec.spatial_groups.empty()) {
                for (const auto& g : spec.spatial_groups) {
                    if (g.empty()) throw InvalidSpec("empty spatial group");
                    for (int c : g) {
                        if (c < 0 || c >= channels) {
                            throw InvalidSpec("spatial group channel out of range");
                        }
                    }
                }
                push({.kind = LayerKind::GroupPooling,
                      .in_frames = frames,
                      .in_channels = channels,
                      .out_frames = frames,
                      .out_channels = static_cast<int>(spec.spatial_groups.size())});
                channels = static_cast<int>(spec.spatial_groups.size());
            }
            saw_spatial = true;
        } else {
            const int out_frames =
                (frames + spec.temporal_window - 1) / spec.temporal_window;
            push({.kind = LayerKind::TemPooling,
                  .in_frames = frames,
                  .in_channels = channels,
                  .out_frames = out_frames,
                  .out_channels = channels,
                  .window = spec.temporal_window});
            frames = out_frames;
        }
    }
    if (frames < 1) throw InvalidSpec("temporal length collapsed below 1");

    push({.kind = LayerKind::LogMap,
          .in_frames = frames,
          .in_channels = channels,
          .out_frames = frames,
          .out_channels = channels});

    const int width = vectorized_width(frames, channels, spec.vectorize_full);
    push({.kind = LayerKind::Vectorize,
          .in_frames = frames,
          .in_channels = channels,
          .in_dim = 0,
          .out_dim = width});
    if (spec.use_threshold_relu) {
        push({.kind = LayerKind::ThresholdRelu,
              .threshold = spec.relu_threshold,
              .in_dim = width,
              .out_dim = width});
    }
    push({.kind = LayerKind::FullyConnected,
          .in_dim = width,
          .out_dim = spec.class_count});
    push({.kind = LayerKind::SoftmaxLoss,
          .in_dim = spec.class_count,
          .out_dim = spec.class_count});
    return stack;
}

struct Network {
    NetworkSpec spec;
    std::vector<LayerSpec> layers;
    std::vector<std::vector<Mat3>> rot_weights;  // per RotMap layer, stack order
    MatX fc;                                     // class_count x width
    int epochs_completed = 0;

    int rotmap_count() const { return static_cast<int>(rot_weights.size()); }
    int fc_input_dim() const { return static_cast<int>(fc.cols()); }
};

/// Builds the network with RotMap weights initialized as Haar-random
/// rotations and the FC weight uniform in +-sqrt(6 / (in + out)).
inline Network build_network(const NetworkSpec& spec, std::mt19937_64& rng) {
    Network net;
    net.spec = spec;
    net.layers = plan_layers(spec);
    for (const auto& l : net.layers) {
        if (l.kind == LayerKind::RotMap) {
            std::vector<Mat3> w(l.in_channels);
            for (auto& m : w) m = random_rotation(rng);
            net.rot_weights.push_back(std::move(w));
        }
    }
    const auto& fc_spec = *std::find_if(
        net.layers.begin(), net.layers.end(),
        [](const LayerSpec& l) { return l.kind == LayerKind::FullyConnected; });
    const double bound = std::sqrt(6.0 / (fc_spec.in_dim + fc_spec.out_dim));
    std::uniform_real_distribution<double> uni(-bound, bound);
    net.fc.resize(fc_spec.out_dim, fc_spec.in_dim);
    for (Eigen::Index i = 0; i < net.fc.rows(); ++i) {
        for (Eigen::Index j = 0; j < net.fc.cols(); ++j) net.fc(i, j) = uni(rng);
    }
    return net;
}

inline Mat3Tensor tensor_from_sequence(const LieSequence& seq) {
    if (seq.frames.empty()) throw EmptyDataset("tensor_from_sequence: no frames");
    const int channels = static_cast<int>(seq.frames[0].rotations.size());
    Mat3Tensor out = Mat3Tensor::make(static_cast<int>(seq.frames.size()), channels);
    for (int t = 0; t < out.frames; ++t) {
        if (static_cast<int>(seq.frames[t].rotations.size()) != channels) {
            throw ShapeMismatch("tensor_from_sequence: ragged channel counts");
        }
        for (int c = 0; c < channels; ++c) out.at(t, c) = seq.frames[t].rotations[c];
    }
    return out;
}

// ---------------------------------------------------------------------------
// Per-sample forward/backward.
// ---------------------------------------------------------------------------

struct Trace {
    int label = -1;
    std::vector<Mat3Tensor> rot_inputs;  // input of each group-stage layer
    std::vector<PoolRecord> pool_records;
    std::vector<std::uint8_t> logmap_fallback;
    VecX vec_out;
    VecX relu_mask;  // empty when the layer is absent
    VecX fc_in;
    VecX logits;
    VecX probs;
    double loss = 0.0;
    int predicted = -1;
};

inline double forward(const Network& net, const Mat3Tensor& input, int label,
                      Trace& tr) {
    if (input.frames != net.spec.input_frames ||
        input.channels != net.spec.input_channels) {
        throw GeometryMismatch(
            "forward: sample geometry (" + std::to_string(input.channels) + " ch x " +
            std::to_string(input.frames) + " frames) does not match network (" +
            std::to_string(net.spec.input_channels) + " ch x " +
            std::to_string(net.spec.input_frames) + " frames)");
    }
    tr = Trace{};
    tr.label = label;
    Mat3Tensor cur = input;
    int rot_idx = 0;
    for (const auto& l : net.layers) {
        switch (l.kind) {
            case LayerKind::RotMap: {
                tr.rot_inputs.push_back(cur);
                cur = rotmap_forward(net.rot_weights[rot_idx++], cur);
                break;
            }
            case LayerKind::SpaPooling: {
                tr.rot_inputs.push_back(std::move(cur));
                PoolRecord rec;
                cur = spatial_pool_forward(tr.rot_inputs.back(), rec);
                tr.pool_records.push_back(std::move(rec));
                break;
            }
            case LayerKind::TemPooling: {
                tr.rot_inputs.push_back(std::move(cur));
                PoolRecord rec;
                cur = temporal_pool_forward(tr.rot_inputs.back(), l.window, rec);
                tr.pool_records.push_back(std::move(rec));
                break;
            }
            case LayerKind::GroupPooling: {
                tr.rot_inputs.push_back(std::move(cur));
                PoolRecord rec;
                cur = group_pool_forward(tr.rot_inputs.back(), net.spec.spatial_groups,
                                         rec);
                tr.pool_records.push_back(std::move(rec));
                break;
            }
            case LayerKind::LogMap: {
                tr.rot_inputs.push_back(std::move(cur));
                cur = logmap_forward(tr.rot_inputs.back(), tr.logmap_fallback);
                break;
            }
            case LayerKind::Vectorize: {
                tr.vec_out = vectorize(cur, net.spec.vectorize_full);
                tr.fc_in = tr.vec_out;
                break;
            }
            case LayerKind::ThresholdRelu: {
                tr.relu_mask = threshold_relu_mask(tr.vec_out, l.threshold);
                tr.fc_in = threshold_relu(tr.vec_out, l.threshold);
                break;
            }
            case LayerKind::FullyConnected: {
                tr.logits = fc_forward(net.fc, tr.fc_in);
                break;
            }
            case LayerKind::SoftmaxLoss: {
                const SoftmaxResult sm = softmax_cross_entropy(tr.logits, label);
                tr.loss = sm.loss;
                tr.probs = sm.probs;
                tr.predicted = argmax_class(sm.probs);
                break;
            }
        }
    }
    return tr.loss;
}

struct SampleGrads {
    std::vector<std::vector<Mat3>> rot_weight_grads;  // per RotMap layer
    VecX logit_grad;          // probs - onehot; FC weight grad = logit_grad fc_in^T
    double fc_weight_sign = 1.0;  // debug hook, see `mutate_layer`
    Mat3Tensor input_grad;    // filled when requested
};

/// Chain-rule backward over the trace. `mutate_layer` is a gradient-check
/// debug hook: it flips the sign of that layer's weight gradient (RotMap,
/// FullyConnected) or of its input gradient (all other kinds). -1 disables.
inline void backward(const Network& net, const Trace& tr, SampleGrads& out,
                     bool want_input_grad = false, int mutate_layer = -1) {
    out.rot_weight_grads.assign(net.rotmap_count(), {});
    out.fc_weight_sign = 1.0;

    // flat head
    VecX g_logits = tr.probs;
    g_logits[tr.label] -= 1.0;
    if (mutate_layer >= 0 &&
        net.layers[mutate_layer].kind == LayerKind::SoftmaxLoss) {
        g_logits = -g_logits;
    }
    out.logit_grad = g_logits;

    VecX g_flat = net.fc.transpose() * g_logits;
    for (int li = static_cast<int>(net.layers.size()) - 1; li >= 0; --li) {
        const LayerSpec& l = net.layers[li];
        if (l.kind == LayerKind::FullyConnected) {
            if (mutate_layer == li) out.fc_weight_sign = -1.0;
        } else if (l.kind == LayerKind::ThresholdRelu) {
            g_flat = g_flat.cwiseProduct(tr.relu_mask);
            if (mutate_layer == li) g_flat = -g_flat;
        }
    }

    // group stage, walked in reverse
    int rot_idx = net.rotmap_count() - 1;
    int pool_idx = static_cast<int>(tr.pool_records.size()) - 1;
    int tensor_idx = static_cast<int>(tr.rot_inputs.size()) - 1;
    Mat3Tensor g;
    for (int li = static_cast<int>(net.layers.size()) - 1; li >= 0; --li) {
        const LayerSpec& l = net.layers[li];
        switch (l.kind) {
            case LayerKind::Vectorize: {
                g = vectorize_backward(g_flat, l.in_frames, l.in_channels,
                                       net.spec.vectorize_full);
                if (mutate_layer == li) {
                    for (auto& m : g.data) m = -m;
                }
                break;
            }
            case LayerKind::LogMap: {
                g = logmap_backward(tr.rot_inputs[tensor_idx--], tr.logmap_fallback, g);
                if (mutate_layer == li) {
                    for (auto& m : g.data) m = -m;
                }
                break;
            }
            case LayerKind::SpaPooling:
            case LayerKind::TemPooling:
            case LayerKind::GroupPooling: {
                --tensor_idx;
                g = pool_backward(tr.pool_records[pool_idx--], g);
                if (mutate_layer == li) {
                    for (auto& m : g.data) m = -m;
                }
                break;
            }
            case LayerKind::RotMap: {
                RotMapGrads rg =
                    rotmap_backward(net.rot_weights[rot_idx], tr.rot_inputs[tensor_idx--], g);
                if (mutate_layer == li) {
                    for (auto& m : rg.weights) m = -m;
                }
                out.rot_weight_grads[rot_idx--] = std::move(rg.weights);
                g = std::move(rg.input);
                break;
            }
            default:
                break;  // flat layers handled above
        }
    }
    if (want_input_grad) out.input_grad = std::move(g);
}

}  // namespace lienet
