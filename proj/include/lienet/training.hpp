#pragma once

// Mini-batch Riemannian SGD: batch gradient bundles, the tangent-project +
// retract update for rotation weights, plain SGD for the FC head, the epoch
// loop with its log, evaluation, the finite-difference oracle harness, and
// the `LIEN` checkpoint format.

#include <Eigen/Core>

#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <limits>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "lienet/errors.hpp"
#include "lienet/network.hpp"
#include "lienet/threading.hpp"

namespace lienet {

struct OptimizerConfig {
    double learning_rate = 0.01;
    int batch_size = 30;
    int epochs = 1;
    std::uint64_t seed = 0;
    bool shuffle = true;
    bool gradcheck_mode = false;  // extra manifold assertions while training
    double lr_decay = 1.0;        // per-epoch multiplier; 1.0 = constant rate
};

struct Dataset {
    std::vector<Mat3Tensor> samples;
    std::vector<int> labels;
    std::vector<std::string> label_names;  // empty or one name per class

    int size() const { return static_cast<int>(samples.size()); }
};

inline Dataset dataset_from_sequences(const std::vector<LieSequence>& seqs,
                                      const LabelMap& labels) {
    Dataset d;
    d.label_names = labels.names;
    for (const auto& s : seqs) {
        d.samples.push_back(tensor_from_sequence(s));
        d.labels.push_back(labels.index_of(s.label));
    }
    return d;
}

// ---------------------------------------------------------------------------
// Gradient bundles
// ---------------------------------------------------------------------------

struct GradientBundle {
    std::vector<std::vector<Mat3>> rot_weight_grads;  // per RotMap layer
    MatX fc_grad;
    double loss_sum = 0.0;
    int correct = 0;
    int count = 0;
};

namespace detail {

/// Stack index of the n-th RotMap layer (for error reporting).
inline int rotmap_stack_index(const Network& net, int rot_idx) {
    int seen = 0;
    for (size_t i = 0; i < net.layers.size(); ++i) {
        if (net.layers[i].kind == LayerKind::RotMap && seen++ == rot_idx) {
            return static_cast<int>(i);
        }
    }
    return -1;
}

inline int fc_stack_index(const Network& net) {
    for (size_t i = 0; i < net.layers.size(); ++i) {
        if (net.layers[i].kind == LayerKind::FullyConnected) return static_cast<int>(i);
    }
    return -1;
}

inline void check_finite(const Network& net, const GradientBundle& b) {
    for (size_t l = 0; l < b.rot_weight_grads.size(); ++l) {
        for (const auto& m : b.rot_weight_grads[l]) {
            if (!m.allFinite()) {
                const int li = rotmap_stack_index(net, static_cast<int>(l));
                throw NonFiniteGradient(li, "non-finite RotMap weight gradient at layer " +
                                                std::to_string(li));
            }
        }
    }
    if (!b.fc_grad.allFinite()) {
        const int li = fc_stack_index(net);
        throw NonFiniteGradient(li, "non-finite FC weight gradient at layer " +
                                        std::to_string(li));
    }
}

}  // namespace detail

/// Forward/backward over a batch of sample indices, gradients averaged over
/// the batch. Per-sample work runs in parallel; the reduction is sequential
/// in sample order so results do not depend on the thread count.
inline GradientBundle backward_pass(const Network& net, const Dataset& data,
                                    std::span<const int> indices) {
    if (indices.empty()) throw EmptyDataset("backward_pass: empty batch");

    struct PerSample {
        std::vector<std::vector<Mat3>> rot_weight_grads;
        VecX logit_grad;
        VecX fc_in;
        double loss = 0.0;
        bool correct = false;
    };
    std::vector<PerSample> results(indices.size());
    parallel_for(static_cast<int>(indices.size()), [&](int k) {
        const int s = indices[k];
        Trace tr;
        forward(net, data.samples[s], data.labels[s], tr);
        SampleGrads g;
        backward(net, tr, g);
        results[k] = PerSample{std::move(g.rot_weight_grads), std::move(g.logit_grad),
                               std::move(tr.fc_in), tr.loss,
                               tr.predicted == data.labels[s]};
    });

    GradientBundle b;
    b.rot_weight_grads.resize(net.rotmap_count());
    for (int l = 0; l < net.rotmap_count(); ++l) {
        b.rot_weight_grads[l].assign(net.rot_weights[l].size(), Mat3::Zero());
    }
    b.fc_grad = MatX::Zero(net.fc.rows(), net.fc.cols());
    for (const auto& r : results) {
        for (int l = 0; l < net.rotmap_count(); ++l) {
            for (size_t c = 0; c < b.rot_weight_grads[l].size(); ++c) {
                b.rot_weight_grads[l][c] += r.rot_weight_grads[l][c];
            }
        }
        b.fc_grad.noalias() += r.logit_grad * r.fc_in.transpose();
        b.loss_sum += r.loss;
        b.correct += r.correct ? 1 : 0;
        b.count += 1;
    }
    const double inv = 1.0 / b.count;
    for (auto& layer : b.rot_weight_grads) {
        for (auto& m : layer) m *= inv;
    }
    b.fc_grad *= inv;
    detail::check_finite(net, b);
    return b;
}

/// One Riemannian update per rotation weight: project the Euclidean gradient
/// onto the tangent space at W, step, and retract back onto the manifold.
inline void riemannian_step(std::vector<Mat3>& weights,
                            const std::vector<Mat3>& euclid_grads, double lr) {
    if (weights.size() != euclid_grads.size()) {
        throw ShapeMismatch("riemannian_step: weight/gradient count mismatch");
    }
    for (size_t c = 0; c < weights.size(); ++c) {
        const Mat3 riem = tangent_project(weights[c], euclid_grads[c]);
        weights[c] = project_to_rotation(weights[c] - lr * riem);
    }
}

struct StepStats {
    double loss_sum = 0.0;
    int correct = 0;
    int count = 0;
};

/// One SGD step over a batch: RotMap weights via the retraction update, the
/// FC weight via a plain Euclidean step.
inline StepStats sgd_step(Network& net, const Dataset& data,
                          std::span<const int> indices, double lr) {
    const GradientBundle b = backward_pass(net, data, indices);
    for (int l = 0; l < net.rotmap_count(); ++l) {
        riemannian_step(net.rot_weights[l], b.rot_weight_grads[l], lr);
    }
    net.fc.noalias() -= lr * b.fc_grad;
    return StepStats{b.loss_sum, b.correct, b.count};
}

// ---------------------------------------------------------------------------
// Training loop
// ---------------------------------------------------------------------------

struct EpochRecord {
    int epoch = 0;  // 1-based, continues across resumes
    double mean_loss = 0.0;
    double train_acc = 0.0;
    double val_acc = std::numeric_limits<double>::quiet_NaN();
    double drift = 0.0;  // max over weights of ||W^T W - I||_F
    double seconds = 0.0;
};

struct TrainingLog {
    std::vector<EpochRecord> epochs;
    long total_steps = 0;
    bool aborted = false;
    std::string abort_reason;
};

inline double max_weight_drift(const Network& net) {
    double drift = 0.0;
    for (const auto& layer : net.rot_weights) {
        for (const auto& w : layer) drift = std::max(drift, orthogonality_drift(w));
    }
    return drift;
}

struct EvalResult {
    double accuracy = 0.0;
    Eigen::MatrixXi confusion;  // row = true class, column = predicted
    double mean_loss = 0.0;
};

inline EvalResult evaluate(const Network& net, const Dataset& data) {
    if (data.size() == 0) throw EmptyDataset("evaluate: empty dataset");
    std::vector<int> preds(data.size());
    std::vector<double> losses(data.size());
    parallel_for(data.size(), [&](int i) {
        Trace tr;
        forward(net, data.samples[i], data.labels[i], tr);
        preds[i] = tr.predicted;
        losses[i] = tr.loss;
    });
    EvalResult r;
    r.confusion = Eigen::MatrixXi::Zero(net.spec.class_count, net.spec.class_count);
    int correct = 0;
    double loss_sum = 0.0;
    for (int i = 0; i < data.size(); ++i) {
        r.confusion(data.labels[i], preds[i]) += 1;
        correct += preds[i] == data.labels[i] ? 1 : 0;
        loss_sum += losses[i];
    }
    r.accuracy = static_cast<double>(correct) / data.size();
    r.mean_loss = loss_sum / data.size();
    return r;
}

namespace detail {

/// Deterministic Fisher-Yates shuffle (independent of the standard library's
/// std::shuffle implementation).
inline void fisher_yates(std::vector<int>& v, std::mt19937_64& rng) {
    for (size_t i = v.size(); i > 1; --i) {
        const size_t j = rng() % i;
        std::swap(v[i - 1], v[j]);
    }
}

}  // namespace detail

/// Epoch loop around sgd_step with per-epoch shuffling. Deterministic under
/// (seed, data, config). On a non-finite gradient or degenerate retraction
/// the run aborts, the last completed epoch's weights are restored, and the
/// log carries the reason. `epochs` is the total target, so a resumed
/// network trains only the remainder.
inline TrainingLog train(Network& net, const Dataset& data, const OptimizerConfig& cfg,
                         const Dataset* validation = nullptr) {
    if (data.size() == 0) throw EmptyDataset("train: empty dataset");
    for (int label : data.labels) {
        if (label < 0 || label >= net.spec.class_count) {
            throw LabelOutOfRange("train: label " + std::to_string(label) +
                                  " outside [0, " +
                                  std::to_string(net.spec.class_count) + ")");
        }
    }

    TrainingLog log;
    std::mt19937_64 rng(cfg.seed);
    std::vector<int> order(data.size());
    for (int i = 0; i < data.size(); ++i) order[i] = i;

    double lr = cfg.learning_rate * std::pow(cfg.lr_decay, net.epochs_completed);
    for (int epoch = net.epochs_completed + 1; epoch <= cfg.epochs; ++epoch) {
        const Network snapshot = net;
        const auto t0 = std::chrono::steady_clock::now();
        if (cfg.shuffle) detail::fisher_yates(order, rng);

        StepStats epoch_stats;
        try {
            for (int start = 0; start < data.size(); start += cfg.batch_size) {
                const int count = std::min(cfg.batch_size, data.size() - start);
                const StepStats s =
                    sgd_step(net, data, std::span<const int>(order).subspan(start, count), lr);
                epoch_stats.loss_sum += s.loss_sum;
                epoch_stats.correct += s.correct;
                epoch_stats.count += s.count;
                ++log.total_steps;
            }
        } catch (const NumericError& e) {
            net = snapshot;  // retain the last-good weights
            log.aborted = true;
            log.abort_reason = e.what();
            break;
        }

        EpochRecord rec;
        rec.epoch = epoch;
        rec.mean_loss = epoch_stats.loss_sum / epoch_stats.count;
        rec.train_acc = static_cast<double>(epoch_stats.correct) / epoch_stats.count;
        rec.drift = max_weight_drift(net);
        if (validation && validation->size() > 0) {
            rec.val_acc = evaluate(net, *validation).accuracy;
        }
        if (cfg.gradcheck_mode && rec.drift >= 1e-8) {
            net = snapshot;
            log.aborted = true;
            log.abort_reason = "weight drift exceeded 1e-8";
            break;
        }
        rec.seconds =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        log.epochs.push_back(rec);
        net.epochs_completed = epoch;
        lr *= cfg.lr_decay;
    }
    return log;
}

inline void write_training_log(const std::string& path, const TrainingLog& log) {
    std::ofstream out(path);
    if (!out) throw DataError(path + ": cannot open for writing");
    out << "epoch,loss,train_acc,val_acc,drift,seconds\n";
    out.precision(12);
    for (const auto& e : log.epochs) {
        out << e.epoch << "," << e.mean_loss << "," << e.train_acc << ",";
        if (!std::isnan(e.val_acc)) out << e.val_acc;
        out << "," << e.drift << "," << e.seconds << "\n";
    }
}

// ---------------------------------------------------------------------------
// Finite-difference oracle harness
// ---------------------------------------------------------------------------

struct GradCheckTolerances {
    double flat = 1e-4;    // LogMap chain, FC, softmax (step 1e-6)
    double rotmap = 1e-3;  // tangent-directional checks through the retraction
};

struct LayerCheck {
    int layer_index = -1;
    std::string name;
    double max_rel_err = 0.0;
    double tol = 0.0;
    bool pass = false;
};

struct GradCheckReport {
    std::vector<LayerCheck> checks;

    bool all_pass() const {
        for (const auto& c : checks) {
            if (!c.pass) return false;
        }
        return true;
    }
};

namespace detail {

inline double rel_err(double a, double b) {
    return std::abs(a - b) / std::max({std::abs(a), std::abs(b), 1e-6});
}

inline double loss_of(const Network& net, const Mat3Tensor& sample, int label) {
    Trace tr;
    return forward(net, sample, label, tr);
}

/// True when two traces took the same discrete path (pooling argmax choices
/// and logmap fallback flags). Central differences are only meaningful for
/// probes that do not cross such a switch.
inline bool same_discrete_path(const Trace& a, const Trace& b) {
    if (a.pool_records.size() != b.pool_records.size()) return false;
    for (size_t p = 0; p < a.pool_records.size(); ++p) {
        if (a.pool_records[p].argmax != b.pool_records[p].argmax) return false;
    }
    return a.logmap_fallback == b.logmap_fallback;
}

/// Follows a set of influenced entries from the input of `start_layer` down
/// to the LogMap input, along the trace's pooling argmax records.
inline std::vector<char> influence_at_logmap(const Network& net, const Trace& tr,
                                             size_t start_layer,
                                             std::vector<char> mask) {
    int pool_idx = 0;
    for (size_t li = 0; li < start_layer; ++li) {
        const LayerKind k = net.layers[li].kind;
        if (k == LayerKind::SpaPooling || k == LayerKind::TemPooling ||
            k == LayerKind::GroupPooling) {
            ++pool_idx;
        }
    }
    for (size_t li = start_layer; li < net.layers.size(); ++li) {
        const LayerKind k = net.layers[li].kind;
        if (k == LayerKind::SpaPooling || k == LayerKind::TemPooling ||
            k == LayerKind::GroupPooling) {
            const PoolRecord& rec = tr.pool_records[pool_idx++];
            std::vector<char> next(rec.argmax.size(), 0);
            for (size_t o = 0; o < rec.argmax.size(); ++o) {
                next[o] = mask[rec.argmax[o]];
            }
            mask = std::move(next);
        } else if (k == LayerKind::LogMap) {
            break;
        }
    }
    return mask;
}

/// Central differences in raw matrix space lose accuracy where the group
/// logarithm's coefficient blows up (theta near pi: truncation error grows
/// like h^2 / sin^4) and can cross the arccos clamp kink (theta near 0).
/// Probes reaching such entries are excluded from the oracle.
inline bool fd_well_conditioned(const Mat3Tensor& logmap_input,
                                const std::vector<char>& mask) {
    constexpr double kLowGuard = 0.01;
    constexpr double kHighGuard = 0.05;
    for (size_t i = 0; i < logmap_input.data.size(); ++i) {
        if (!mask[i]) continue;
        const double theta = rotation_angle(logmap_input.data[i]);
        if (theta < kLowGuard || theta > kPi - kHighGuard) return false;
    }
    return true;
}

}  // namespace detail

/// Compares every analytic gradient route against central differences of the
/// end-to-end loss: FC weight coordinates and raw input-matrix entries (the
/// chain through LogMap, pooling routing and RotMap data gradients) at step
/// 1e-6, softmax logits directly, and RotMap weights along random tangent
/// directions through the retraction, Gamma(W +- h T). `mutate_layer` flips
/// one layer's backward sign so the harness can prove it catches corruption.
inline GradCheckReport finite_difference_check(const Network& net,
                                               const Mat3Tensor& sample, int label,
                                               const GradCheckTolerances& tol,
                                               std::mt19937_64& rng,
                                               int mutate_layer = -1) {
    GradCheckReport report;
    Trace tr;
    forward(net, sample, label, tr);
    SampleGrads grads;
    backward(net, tr, grads, /*want_input_grad=*/true, mutate_layer);

    const double h_flat = 1e-6;
    const double h_tangent = 1e-5;

    // softmax: analytic logit gradient vs differences through the loss only
    {
        double worst = 0.0;
        for (Eigen::Index i = 0; i < tr.logits.size(); ++i) {
            VecX lp = tr.logits, lm = tr.logits;
            lp[i] += h_flat;
            lm[i] -= h_flat;
            const double numeric = (softmax_cross_entropy(lp, label).loss -
                                    softmax_cross_entropy(lm, label).loss) /
                                   (2.0 * h_flat);
            double analytic = tr.probs[i] - (i == label ? 1.0 : 0.0);
            if (mutate_layer >= 0 &&
                net.layers[mutate_layer].kind == LayerKind::SoftmaxLoss) {
                analytic = -analytic;
            }
            worst = std::max(worst, detail::rel_err(analytic, numeric));
        }
        const int li = static_cast<int>(net.layers.size()) - 1;
        report.checks.push_back(
            {li, "SoftmaxLoss", worst, tol.flat, worst <= tol.flat});
    }

    // FC weight coordinates
    {
        std::uniform_int_distribution<int> row(0, static_cast<int>(net.fc.rows()) - 1);
        std::uniform_int_distribution<int> col(0, static_cast<int>(net.fc.cols()) - 1);
        double worst = 0.0;
        Network probe = net;
        for (int k = 0; k < 24; ++k) {
            const int i = row(rng);
            const int j = col(rng);
            const double saved = probe.fc(i, j);
            probe.fc(i, j) = saved + h_flat;
            const double lp = detail::loss_of(probe, sample, label);
            probe.fc(i, j) = saved - h_flat;
            const double lm = detail::loss_of(probe, sample, label);
            probe.fc(i, j) = saved;
            const double numeric = (lp - lm) / (2.0 * h_flat);
            const double analytic =
                grads.fc_weight_sign * grads.logit_grad[i] * tr.fc_in[j];
            worst = std::max(worst, detail::rel_err(analytic, numeric));
        }
        report.checks.push_back({detail::fc_stack_index(net), "FullyConnected", worst,
                                 tol.flat, worst <= tol.flat});
    }

    // input-entry chain: covers LogMap analytic gradients plus the pooling
    // routing and RotMap data gradients below it. Probes whose perturbation
    // flips a pooling argmax (or a logmap fallback flag) land on a
    // non-differentiable switch and are skipped.
    {
        std::uniform_int_distribution<int> pick_t(0, sample.frames - 1);
        std::uniform_int_distribution<int> pick_c(0, sample.channels - 1);
        std::uniform_int_distribution<int> pick_ij(0, 2);
        const Mat3Tensor& logmap_in = tr.rot_inputs.back();
        double worst = 0.0;
        Mat3Tensor probe = sample;
        Trace tp, tm;
        for (int k = 0; k < 24; ++k) {
            const int t = pick_t(rng);
            const int c = pick_c(rng);
            const int i = pick_ij(rng);
            const int j = pick_ij(rng);
            std::vector<char> mask(
                static_cast<size_t>(sample.frames) * sample.channels, 0);
            mask[static_cast<size_t>(t) * sample.channels + c] = 1;
            if (!detail::fd_well_conditioned(
                    logmap_in, detail::influence_at_logmap(net, tr, 0, mask))) {
                continue;
            }
            const double saved = probe.at(t, c)(i, j);
            probe.at(t, c)(i, j) = saved + h_flat;
            const double lp = forward(net, probe, label, tp);
            probe.at(t, c)(i, j) = saved - h_flat;
            const double lm = forward(net, probe, label, tm);
            probe.at(t, c)(i, j) = saved;
            if (!detail::same_discrete_path(tr, tp) ||
                !detail::same_discrete_path(tr, tm)) {
                continue;
            }
            const double numeric = (lp - lm) / (2.0 * h_flat);
            const double analytic = grads.input_grad.at(t, c)(i, j);
            worst = std::max(worst, detail::rel_err(analytic, numeric));
        }
        int logmap_index = -1;
        for (size_t li = 0; li < net.layers.size(); ++li) {
            if (net.layers[li].kind == LayerKind::LogMap) {
                logmap_index = static_cast<int>(li);
            }
        }
        report.checks.push_back(
            {logmap_index, "LogMap", worst, tol.flat, worst <= tol.flat});
    }

    // RotMap weights along tangent directions, through the retraction; the
    // same discrete-path guard applies since a weight step shifts every
    // angle in its channel.
    for (int l = 0; l < net.rotmap_count(); ++l) {
        const int stack_index = detail::rotmap_stack_index(net, l);
        const LayerSpec& rot_layer = net.layers[stack_index];
        std::uniform_int_distribution<int> pick_c(
            0, static_cast<int>(net.rot_weights[l].size()) - 1);
        std::normal_distribution<double> gauss(0.0, 1.0);
        const Mat3Tensor& logmap_in = tr.rot_inputs.back();
        double worst = 0.0;
        Network probe = net;
        Trace tp, tm;
        for (int k = 0; k < 6; ++k) {
            const int c = pick_c(rng);
            std::vector<char> mask(
                static_cast<size_t>(rot_layer.in_frames) * rot_layer.in_channels, 0);
            for (int t = 0; t < rot_layer.in_frames; ++t) {
                mask[static_cast<size_t>(t) * rot_layer.in_channels + c] = 1;
            }
            if (!detail::fd_well_conditioned(
                    logmap_in,
                    detail::influence_at_logmap(net, tr, stack_index, mask))) {
                continue;
            }
            const Mat3& w = net.rot_weights[l][c];
            Vec3 dir(gauss(rng), gauss(rng), gauss(rng));
            while (dir.norm() < 1e-6) dir = Vec3(gauss(rng), gauss(rng), gauss(rng));
            const Mat3 tangent = w * skew3(dir.normalized());

            probe.rot_weights[l][c] = project_to_rotation(w + h_tangent * tangent);
            const double lp = forward(probe, sample, label, tp);
            probe.rot_weights[l][c] = project_to_rotation(w - h_tangent * tangent);
            const double lm = forward(probe, sample, label, tm);
            probe.rot_weights[l][c] = w;
            if (!detail::same_discrete_path(tr, tp) ||
                !detail::same_discrete_path(tr, tm)) {
                continue;
            }
            const double numeric = (lp - lm) / (2.0 * h_tangent);
            const double analytic =
                frobenius_inner(tangent_project(w, grads.rot_weight_grads[l][c]), tangent);
            worst = std::max(worst, detail::rel_err(analytic, numeric));
        }
        report.checks.push_back({stack_index, "RotMap[" + std::to_string(l) + "]", worst,
                                 tol.rotmap, worst <= tol.rotmap});
    }
    return report;
}

// ---------------------------------------------------------------------------
// LIEN checkpoint format: magic, u32 version, serialized NetworkSpec, then
// per-layer weights in stack order (RotMap: u32 channel count + 9 float64
// per matrix; FC: u32 rows, u32 cols, row-major float64).
// ---------------------------------------------------------------------------

inline constexpr std::uint32_t kCheckpointVersion = 1;

namespace detail {

inline void put_u32(std::ofstream& out, std::uint32_t v) {
    out.write(reinterpret_cast<const char*>(&v), 4);
}
inline void put_u8(std::ofstream& out, std::uint8_t v) {
    out.write(reinterpret_cast<const char*>(&v), 1);
}
inline void put_f64(std::ofstream& out, double v) {
    out.write(reinterpret_cast<const char*>(&v), 8);
}
inline std::uint32_t get_u32(std::ifstream& in) {
    std::uint32_t v = 0;
    in.read(reinterpret_cast<char*>(&v), 4);
    return v;
}
inline std::uint8_t get_u8(std::ifstream& in) {
    std::uint8_t v = 0;
    in.read(reinterpret_cast<char*>(&v), 1);
    return v;
}
inline double get_f64(std::ifstream& in) {
    double v = 0;
    in.read(reinterpret_cast<char*>(&v), 8);
    return v;
}

}  // namespace detail

inline void save_checkpoint(const std::string& path, const Network& net) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError(path + ": cannot open for writing");
    out.write("LIEN", 4);
    detail::put_u32(out, kCheckpointVersion);
    const NetworkSpec& s = net.spec;
    detail::put_u32(out, static_cast<std::uint32_t>(s.class_count));
    detail::put_u32(out, static_cast<std::uint32_t>(s.input_channels));
    detail::put_u32(out, static_cast<std::uint32_t>(s.input_frames));
    detail::put_u32(out, static_cast<std::uint32_t>(s.block_pooling.size()));
    for (const PoolKind p : s.block_pooling) {
        detail::put_u8(out, static_cast<std::uint8_t>(p));
    }
    detail::put_u32(out, static_cast<std::uint32_t>(s.temporal_window));
    detail::put_u8(out, s.use_threshold_relu ? 1 : 0);
    detail::put_f64(out, s.relu_threshold);
    detail::put_u8(out, s.vectorize_full ? 1 : 0);
    detail::put_u32(out, static_cast<std::uint32_t>(s.spatial_groups.size()));
    for (const auto& g : s.spatial_groups) {
        detail::put_u32(out, static_cast<std::uint32_t>(g.size()));
        for (int c : g) detail::put_u32(out, static_cast<std::uint32_t>(c));
    }
    detail::put_u32(out, static_cast<std::uint32_t>(net.epochs_completed));

    for (const auto& layer : net.rot_weights) {
        detail::put_u32(out, static_cast<std::uint32_t>(layer.size()));
        for (const auto& w : layer) {
            for (int i = 0; i < 3; ++i)
                for (int j = 0; j < 3; ++j) detail::put_f64(out, w(i, j));
        }
    }
    detail::put_u32(out, static_cast<std::uint32_t>(net.fc.rows()));
    detail::put_u32(out, static_cast<std::uint32_t>(net.fc.cols()));
    for (Eigen::Index i = 0; i < net.fc.rows(); ++i) {
        for (Eigen::Index j = 0; j < net.fc.cols(); ++j) {
            detail::put_f64(out, net.fc(i, j));
        }
    }
    if (!out) throw DataError(path + ": write failed");
}

inline Network load_checkpoint(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw MalformedFile(path + ": cannot open");
    char magic[4];
    in.read(magic, 4);
    if (!in || std::memcmp(magic, "LIEN", 4) != 0) {
        throw MalformedFile(path + ": bad magic");
    }
    if (detail::get_u32(in) != kCheckpointVersion) {
        throw MalformedFile(path + ": unsupported version");
    }
    NetworkSpec s;
    s.class_count = static_cast<int>(detail::get_u32(in));
    s.input_channels = static_cast<int>(detail::get_u32(in));
    s.input_frames = static_cast<int>(detail::get_u32(in));
    const std::uint32_t blocks = detail::get_u32(in);
    for (std::uint32_t b = 0; b < blocks; ++b) {
        s.block_pooling.push_back(static_cast<PoolKind>(detail::get_u8(in)));
    }
    s.temporal_window = static_cast<int>(detail::get_u32(in));
    s.use_threshold_relu = detail::get_u8(in) != 0;
    s.relu_threshold = detail::get_f64(in);
    s.vectorize_full = detail::get_u8(in) != 0;
    const std::uint32_t groups = detail::get_u32(in);
    for (std::uint32_t g = 0; g < groups; ++g) {
        std::vector<int> grp(detail::get_u32(in));
        for (auto& c : grp) c = static_cast<int>(detail::get_u32(in));
        s.spatial_groups.push_back(std::move(grp));
    }
    const int epochs_completed = static_cast<int>(detail::get_u32(in));
    if (!in) throw MalformedFile(path + ": truncated spec block");

    Network net;
    net.spec = s;
    net.layers = plan_layers(s);
    net.epochs_completed = epochs_completed;
    for (const auto& l : net.layers) {
        if (l.kind != LayerKind::RotMap) continue;
        const std::uint32_t channels = detail::get_u32(in);
        if (static_cast<int>(channels) != l.in_channels) {
            throw MalformedFile(path + ": RotMap channel count mismatch");
        }
        std::vector<Mat3> weights(channels);
        for (auto& w : weights) {
            for (int i = 0; i < 3; ++i)
                for (int j = 0; j < 3; ++j) w(i, j) = detail::get_f64(in);
        }
        net.rot_weights.push_back(std::move(weights));
    }
    const std::uint32_t rows = detail::get_u32(in);
    const std::uint32_t cols = detail::get_u32(in);
    net.fc.resize(rows, cols);
    for (std::uint32_t i = 0; i < rows; ++i) {
        for (std::uint32_t j = 0; j < cols; ++j) net.fc(i, j) = detail::get_f64(in);
    }
    if (!in) throw MalformedFile(path + ": truncated weights");
    return net;
}

}  // namespace lienet
