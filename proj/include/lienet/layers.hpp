#pragma once

// Forward and backward computation for the individual network layers:
// rotation mapping, angle-max pooling (spatial pair / temporal window /
// body-part group), the group-logarithm layer with its analytic gradient,
// vectorization, threshold nonlinearity, fully connected and softmax loss.
//
// Group-stage data lives in a frames x channels grid of 3x3 matrices; the
// same grid type carries gradients through the backward pass.

#include <Eigen/Core>

#include <cstdint>
#include <vector>

#include "lienet/errors.hpp"
#include "lienet/so3.hpp"

namespace lienet {

using VecX = Eigen::VectorXd;
using MatX = Eigen::MatrixXd;

struct Mat3Tensor {
    int frames = 0;
    int channels = 0;
    std::vector<Mat3> data;  // (t, c) -> data[t * channels + c]

    static Mat3Tensor make(int frames, int channels) {
        Mat3Tensor out;
        out.frames = frames;
        out.channels = channels;
        out.data.assign(static_cast<size_t>(frames) * channels, Mat3::Zero());
        return out;
    }

    Mat3& at(int t, int c) { return data[static_cast<size_t>(t) * channels + c]; }
    const Mat3& at(int t, int c) const {
        return data[static_cast<size_t>(t) * channels + c];
    }
    bool same_shape(const Mat3Tensor& o) const {
        return frames == o.frames && channels == o.channels;
    }
};

// ---------------------------------------------------------------------------
// RotMap: one rotation weight per channel, shared across frames.
// ---------------------------------------------------------------------------

inline Mat3Tensor rotmap_forward(const std::vector<Mat3>& weights,
                                 const Mat3Tensor& in) {
    if (static_cast<int>(weights.size()) != in.channels) {
        throw ShapeMismatch("rotmap_forward: weight/channel count mismatch");
    }
    Mat3Tensor out = Mat3Tensor::make(in.frames, in.channels);
    for (int t = 0; t < in.frames; ++t) {
        for (int c = 0; c < in.channels; ++c) {
            out.at(t, c) = weights[c] * in.at(t, c);
        }
    }
    return out;
}

struct RotMapGrads {
    Mat3Tensor input;              // dL/d(input), same shape as the input
    std::vector<Mat3> weights;     // dL/dW per channel, summed over frames
};

/// Input gradient W^T G per entry; weight gradient sum_t G(t) R(t)^T per
/// channel (the weight is shared across frames).
inline RotMapGrads rotmap_backward(const std::vector<Mat3>& weights,
                                   const Mat3Tensor& in, const Mat3Tensor& upstream) {
    if (!in.same_shape(upstream) ||
        static_cast<int>(weights.size()) != in.channels) {
        throw ShapeMismatch("rotmap_backward: shape mismatch");
    }
    RotMapGrads g;
    g.input = Mat3Tensor::make(in.frames, in.channels);
    g.weights.assign(in.channels, Mat3::Zero());
    for (int t = 0; t < in.frames; ++t) {
        for (int c = 0; c < in.channels; ++c) {
            const Mat3& up = upstream.at(t, c);
            g.input.at(t, c) = weights[c].transpose() * up;
            g.weights[c] += up * in.at(t, c).transpose();
        }
    }
    return g;
}

// ---------------------------------------------------------------------------
// Angle-max pooling. Every variant records, per output entry, the flat index
// of the winning input entry; backward is a uniform scatter along those
// records. Ties always choose the first/earliest candidate.
// ---------------------------------------------------------------------------

struct PoolRecord {
    int in_frames = 0, in_channels = 0;
    int out_frames = 0, out_channels = 0;
    std::vector<int> argmax;  // flat input index per flat output index
};

/// Halves the channel count: of each adjacent (R_{m,n}, R_{n,m}) channel
/// pair, keeps the matrix with the larger rotation angle.
inline Mat3Tensor spatial_pool_forward(const Mat3Tensor& in, PoolRecord& rec) {
    if (in.channels % 2 != 0) {
        throw OddChannelCount("spatial_pool_forward: channel count must be even");
    }
    const int out_channels = in.channels / 2;
    Mat3Tensor out = Mat3Tensor::make(in.frames, out_channels);
    rec = PoolRecord{in.frames, in.channels, in.frames, out_channels, {}};
    rec.argmax.resize(static_cast<size_t>(in.frames) * out_channels);
    for (int t = 0; t < in.frames; ++t) {
        for (int j = 0; j < out_channels; ++j) {
            const int c0 = 2 * j;
            const int pick =
                rotation_angle(in.at(t, c0 + 1)) > rotation_angle(in.at(t, c0))
                    ? c0 + 1
                    : c0;
            out.at(t, j) = in.at(t, pick);
            rec.argmax[static_cast<size_t>(t) * out_channels + j] =
                t * in.channels + pick;
        }
    }
    return out;
}

/// Pools non-overlapping windows of p consecutive frames per channel; the
/// trailing partial window pools over its actual size.
inline Mat3Tensor temporal_pool_forward(const Mat3Tensor& in, int window,
                                        PoolRecord& rec) {
    if (window < 2) {
        throw ShapeMismatch("temporal_pool_forward: window must be >= 2");
    }
    const int out_frames = (in.frames + window - 1) / window;
    Mat3Tensor out = Mat3Tensor::make(out_frames, in.channels);
    rec = PoolRecord{in.frames, in.channels, out_frames, in.channels, {}};
    rec.argmax.resize(static_cast<size_t>(out_frames) * in.channels);
    for (int w = 0; w < out_frames; ++w) {
        const int t0 = w * window;
        const int t1 = std::min(t0 + window, in.frames);
        for (int c = 0; c < in.channels; ++c) {
            int best = t0;
            double best_angle = rotation_angle(in.at(t0, c));
            for (int t = t0 + 1; t < t1; ++t) {
                const double a = rotation_angle(in.at(t, c));
                if (a > best_angle) {
                    best_angle = a;
                    best = t;
                }
            }
            out.at(w, c) = in.at(best, c);
            rec.argmax[static_cast<size_t>(w) * in.channels + c] =
                best * in.channels + c;
        }
    }
    return out;
}

/// Second-stage spatial pooling over declared channel groups (kept behind a
/// configuration flag; not part of the default block layout).
inline Mat3Tensor group_pool_forward(const Mat3Tensor& in,
                                     const std::vector<std::vector<int>>& groups,
                                     PoolRecord& rec) {
    const int out_channels = static_cast<int>(groups.size());
    if (out_channels == 0) {
        throw ShapeMismatch("group_pool_forward: no groups declared");
    }
    for (const auto& g : groups) {
        if (g.empty()) throw ShapeMismatch("group_pool_forward: empty group");
        for (int c : g) {
            if (c < 0 || c >= in.channels)
                throw ShapeMismatch("group_pool_forward: channel index out of range");
        }
    }
    Mat3Tensor out = Mat3Tensor::make(in.frames, out_channels);
    rec = PoolRecord{in.frames, in.channels, in.frames, out_channels, {}};
    rec.argmax.resize(static_cast<size_t>(in.frames) * out_channels);
    for (int t = 0; t < in.frames; ++t) {
        for (int j = 0; j < out_channels; ++j) {
            int best = groups[j][0];
            double best_angle = rotation_angle(in.at(t, best));
            for (size_t k = 1; k < groups[j].size(); ++k) {
                const double a = rotation_angle(in.at(t, groups[j][k]));
                if (a > best_angle) {
                    best_angle = a;
                    best = groups[j][k];
                }
            }
            out.at(t, j) = in.at(t, best);
            rec.argmax[static_cast<size_t>(t) * out_channels + j] =
                t * in.channels + best;
        }
    }
    return out;
}

/// Routes each upstream gradient to its recorded argmax entry; everything
/// else receives zero.
inline Mat3Tensor pool_backward(const PoolRecord& rec, const Mat3Tensor& upstream) {
    if (upstream.frames != rec.out_frames || upstream.channels != rec.out_channels ||
        rec.argmax.size() !=
            static_cast<size_t>(rec.out_frames) * rec.out_channels) {
        throw StaleRecords("pool_backward: records do not match upstream shape");
    }
    Mat3Tensor grads = Mat3Tensor::make(rec.in_frames, rec.in_channels);
    for (size_t i = 0; i < rec.argmax.size(); ++i) {
        grads.data[rec.argmax[i]] += upstream.data[i];
    }
    return grads;
}

// ---------------------------------------------------------------------------
// LogMap: elementwise group logarithm. Entries within the guard of a
// half-turn use the axis-angle fallback theta * skew(axis) so the layer is
// total; those entries are flagged for the backward pass.
// ---------------------------------------------------------------------------

inline Mat3 logmap_fallback(const Mat3& r) {
    return rotation_angle(r) * skew3(rotation_axis(r));
}

inline Mat3Tensor logmap_forward(const Mat3Tensor& in,
                                 std::vector<std::uint8_t>& fallback) {
    Mat3Tensor out = Mat3Tensor::make(in.frames, in.channels);
    fallback.assign(in.data.size(), 0);
    for (size_t i = 0; i < in.data.size(); ++i) {
        try {
            out.data[i] = log_map(in.data[i]);
        } catch (const NearPiSingularity&) {
            out.data[i] = logmap_fallback(in.data[i]);
            fallback[i] = 1;
        }
    }
    return out;
}

/// Analytic gradient of L = log(R) against R for upstream G = dL/d(log R):
/// with c(t) = t / (2 sin t),
///   dL/dR = c(t) (G - G^T) - c'(t)/(2 sin t) * <G, R - R^T>_F * I,
/// the second term coming from d(theta)/dR = -I / (2 sin t). Series branches
/// keep both coefficients smooth through t -> 0.
inline Mat3 logmap_entry_gradient(const Mat3& r, const Mat3& g) {
    const double theta = rotation_angle(r);
    double c, cp_over_2s;  // c(theta), c'(theta) / (2 sin theta)
    if (theta < kSeriesCutoff) {
        const double t2 = theta * theta;
        c = 0.5 + t2 / 12.0 + 7.0 * t2 * t2 / 720.0;
        cp_over_2s = 1.0 / 12.0 + t2 / 30.0;
    } else {
        const double s = std::sin(theta);
        c = theta / (2.0 * s);
        const double cp = (s - theta * std::cos(theta)) / (2.0 * s * s);
        cp_over_2s = cp / (2.0 * s);
    }
    const Mat3 g_skew = g - g.transpose();
    const double pairing = frobenius_inner(g, r - r.transpose());
    return c * g_skew - cp_over_2s * pairing * Mat3::Identity();
}

/// Central-difference gradient through the axis-angle fallback, used for the
/// rare near-pi entries where the analytic form does not apply.
inline Mat3 logmap_fallback_gradient_fd(const Mat3& r, const Mat3& g) {
    const double h = 1e-6;
    Mat3 out;
    for (int i = 0; i < 3; ++i) {
        for (int j = 0; j < 3; ++j) {
            Mat3 rp = r, rm = r;
            rp(i, j) += h;
            rm(i, j) -= h;
            out(i, j) = (frobenius_inner(g, logmap_fallback(rp)) -
                         frobenius_inner(g, logmap_fallback(rm))) /
                        (2.0 * h);
        }
    }
    return out;
}

inline Mat3Tensor logmap_backward(const Mat3Tensor& in,
                                  const std::vector<std::uint8_t>& fallback,
                                  const Mat3Tensor& upstream) {
    if (!in.same_shape(upstream) || fallback.size() != in.data.size()) {
        throw ShapeMismatch("logmap_backward: shape mismatch");
    }
    Mat3Tensor grads = Mat3Tensor::make(in.frames, in.channels);
    for (size_t i = 0; i < in.data.size(); ++i) {
        grads.data[i] = fallback[i]
                            ? logmap_fallback_gradient_fd(in.data[i], upstream.data[i])
                            : logmap_entry_gradient(in.data[i], upstream.data[i]);
    }
    return grads;
}

// ---------------------------------------------------------------------------
// Vectorize: frames x channels x 9 row-major flatten (channel varies faster
// than frame). The 3-coordinate mode emits the independent skew entries
// instead; backward is the exact inverse placement.
// ---------------------------------------------------------------------------

inline int vectorized_width(int frames, int channels, bool full9) {
    return frames * channels * (full9 ? 9 : 3);
}

inline VecX vectorize(const Mat3Tensor& in, bool full9 = true) {
    VecX out(vectorized_width(in.frames, in.channels, full9));
    Eigen::Index k = 0;
    for (int t = 0; t < in.frames; ++t) {
        for (int c = 0; c < in.channels; ++c) {
            const Mat3& m = in.at(t, c);
            if (full9) {
                for (int i = 0; i < 3; ++i)
                    for (int j = 0; j < 3; ++j) out[k++] = m(i, j);
            } else {
                const Vec3 v = vee(m);
                out[k++] = v.x();
                out[k++] = v.y();
                out[k++] = v.z();
            }
        }
    }
    return out;
}

inline Mat3Tensor vectorize_backward(const VecX& upstream, int frames, int channels,
                                     bool full9 = true) {
    if (upstream.size() != vectorized_width(frames, channels, full9)) {
        throw ShapeMismatch("vectorize_backward: length mismatch");
    }
    Mat3Tensor grads = Mat3Tensor::make(frames, channels);
    Eigen::Index k = 0;
    for (int t = 0; t < frames; ++t) {
        for (int c = 0; c < channels; ++c) {
            Mat3& m = grads.at(t, c);
            if (full9) {
                for (int i = 0; i < 3; ++i)
                    for (int j = 0; j < 3; ++j) m(i, j) = upstream[k++];
            } else {
                // the forward read exactly these three entries
                m(2, 1) = upstream[k++];
                m(0, 2) = upstream[k++];
                m(1, 0) = upstream[k++];
            }
        }
    }
    return grads;
}

// ---------------------------------------------------------------------------
// Threshold nonlinearity (optional, default off): zeroes entries with
// magnitude below epsilon; backward masks identically.
// ---------------------------------------------------------------------------

inline VecX threshold_relu(const VecX& x, double eps) {
    VecX out = x;
    for (Eigen::Index i = 0; i < out.size(); ++i) {
        if (std::abs(out[i]) < eps) out[i] = 0.0;
    }
    return out;
}

inline VecX threshold_relu_mask(const VecX& x, double eps) {
    VecX mask(x.size());
    for (Eigen::Index i = 0; i < x.size(); ++i) {
        mask[i] = std::abs(x[i]) < eps ? 0.0 : 1.0;
    }
    return mask;
}

// ---------------------------------------------------------------------------
// Fully connected head and softmax cross-entropy loss.
// ---------------------------------------------------------------------------

inline VecX fc_forward(const MatX& w, const VecX& x) {
    if (w.cols() != x.size()) {
        throw ShapeMismatch("fc_forward: weight columns do not match input length");
    }
    return w * x;
}

struct FcGrads {
    VecX input;   // W^T g
    MatX weight;  // g x^T
};

inline FcGrads fc_backward(const MatX& w, const VecX& x, const VecX& upstream) {
    if (w.rows() != upstream.size() || w.cols() != x.size()) {
        throw ShapeMismatch("fc_backward: shape mismatch");
    }
    return FcGrads{w.transpose() * upstream, upstream * x.transpose()};
}

struct SoftmaxResult {
    double loss = 0.0;
    VecX probs;
    VecX logit_grad;  // probs - onehot(label)
};

/// Log-sum-exp stabilized softmax with cross-entropy loss.
inline SoftmaxResult softmax_cross_entropy(const VecX& logits, int label) {
    if (label < 0 || label >= logits.size()) {
        throw LabelOutOfRange("softmax_cross_entropy: label " + std::to_string(label) +
                              " outside [0, " + std::to_string(logits.size()) + ")");
    }
    SoftmaxResult r;
    const double m = logits.maxCoeff();
    const VecX shifted = logits.array() - m;
    const VecX exps = shifted.array().exp();
    const double z = exps.sum();
    r.probs = exps / z;
    r.loss = std::log(z) - shifted[label];
    r.logit_grad = r.probs;
    r.logit_grad[label] -= 1.0;
    return r;
}

/// Argmax with ties resolved toward the lowest class index.
inline int argmax_class(const VecX& probs) {
    int best = 0;
    for (Eigen::Index i = 1; i < probs.size(); ++i) {
        if (probs[i] > probs[best]) best = static_cast<int>(i);
    }
    return best;
}

}  // namespace lienet
