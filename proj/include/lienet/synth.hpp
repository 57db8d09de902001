#pragma once

// Desk-scale synthetic classification task: a planar chain skeleton whose
// bones swing around the z axis at per-bone frequencies. Class identity
// factors into a base-pose pattern (a readable positional signal) and a
// swing-amplitude level (an oscillation-energy signal). A per-sample random
// phase and speed factor scrambles frame positions, so the amplitude bit is
// carried by the spread of the bone-pair angles rather than by their means;
// per-frame Gaussian angular jitter adds measurement noise on top. Classes
// are separable by construction and everything is deterministic under the
// seed (the template geometry depends only on the structural fields, so the
// class structure is stable across seeds).

#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "lienet/skeleton.hpp"
#include "lienet/so3.hpp"

namespace lienet {

struct SyntheticTaskSpec {
    int class_count = 4;
    int joint_count = 6;  // chain topology: joint_count - 1 bones
    int frames = 20;
    int train_per_class = 50;
    int test_per_class = 50;
    double noise_sigma = 0.1;    // radians of per-frame angular jitter
    double speed_jitter = 0.25;  // per-sample speed factor in [1 - j, 1 + j]
    double phase_jitter = 25.0;  // per-sample start offset, in frames
    std::uint64_t seed = 1;
};

inline SkeletonTopology synth_topology(const SyntheticTaskSpec& spec) {
    SkeletonTopology topo;
    topo.joint_count = spec.joint_count;
    for (int j = 0; j + 1 < spec.joint_count; ++j) topo.bones.emplace_back(j, j + 1);
    return topo;
}

namespace detail {

// Task geometry constants: bone b rests at planar angle kBaseAngle +
// b * kAngleSpacing and oscillates at kFreqLo..kFreqHi radians per frame.
// Classes alternate the sign pattern of a +-kPoseDelta posture offset
// (class % 2) and step the swing amplitude between kAmplitudeLo and
// kAmplitudeHi (class / 2).
inline constexpr double kBaseAngle = 0.5;
inline constexpr double kAngleSpacing = 0.58;
inline constexpr double kFreqLo = 0.8;
inline constexpr double kFreqHi = 1.3;
inline constexpr double kPoseDelta = 0.15;
inline constexpr double kAmplitudeLo = 0.04;
inline constexpr double kAmplitudeHi = 0.40;

/// Planar rest angle of bone b for a class (the pose pattern).
inline double rest_angle(int cls, int bone) {
    const double sign = (bone % 2 ? 1.0 : -1.0) * (cls % 2 ? 1.0 : -1.0);
    return kBaseAngle + kAngleSpacing * bone + sign * kPoseDelta;
}

/// Swing amplitude of bone b for a class (the energy level). With more than
/// four classes the levels interpolate between lo and hi.
inline double swing_amplitude(const SyntheticTaskSpec& spec, int cls) {
    const int level_count = std::max(2, (spec.class_count + 1) / 2);
    const int level = cls / 2;
    return kAmplitudeLo + (kAmplitudeHi - kAmplitudeLo) * level / (level_count - 1.0);
}

inline double swing_frequency(const SyntheticTaskSpec& spec, int bone) {
    const int bones = spec.joint_count - 1;
    return bones > 1 ? kFreqLo + (kFreqHi - kFreqLo) * bone / (bones - 1.0) : kFreqLo;
}

/// Joint positions of one class at effective time t_eff, plus optional
/// per-bone angular jitter.
inline JointFrame pose_at(const SyntheticTaskSpec& spec, int cls, double t_eff,
                          double sigma, std::mt19937_64& rng) {
    std::normal_distribution<double> gauss(0.0, 1.0);
    JointFrame frame;
    frame.positions.resize(spec.joint_count);
    frame.positions[0] = Vec3::Zero();
    const double amplitude = swing_amplitude(spec, cls);
    for (int b = 0; b + 1 < spec.joint_count; ++b) {
        const double angle = rest_angle(cls, b) +
                             amplitude * std::sin(swing_frequency(spec, b) * t_eff);
        Vec3 dir(std::cos(angle), std::sin(angle), 0.0);
        if (sigma > 0.0) {
            Vec3 jitter_axis(gauss(rng), gauss(rng), gauss(rng));
            while (jitter_axis.norm() < 1e-6) {
                jitter_axis = Vec3(gauss(rng), gauss(rng), gauss(rng));
            }
            const double jitter_angle = std::abs(sigma * gauss(rng));
            dir = rotation_from_axis_angle({jitter_axis.normalized(), jitter_angle}) * dir;
        }
        frame.positions[b + 1] = frame.positions[b] + dir;
    }
    return frame;
}

}  // namespace detail

/// The noiseless, nominal-speed, zero-phase motion of one class.
inline SkeletonSequence synth_clean(const SyntheticTaskSpec& spec, int cls) {
    std::mt19937_64 unused(0);
    SkeletonSequence seq;
    seq.source_id = "clean_c" + std::to_string(cls);
    seq.label = "class" + std::to_string(cls);
    for (int t = 0; t < spec.frames; ++t) {
        seq.frames.push_back(
            detail::pose_at(spec, cls, static_cast<double>(t), 0.0, unused));
    }
    return seq;
}

/// Draws `per_class` samples of every class with speed/phase variation and
/// angular jitter. `stream` keeps train and test draws independent.
inline std::vector<SkeletonSequence> synth_samples(const SyntheticTaskSpec& spec,
                                                   int per_class,
                                                   const std::string& stream) {
    std::uint64_t salt = 0xcbf29ce484222325ULL;
    for (const char ch : stream) salt = (salt ^ ch) * 0x100000001b3ULL;
    std::mt19937_64 rng(spec.seed ^ salt);
    std::uniform_real_distribution<double> uni(0.0, 1.0);

    std::vector<SkeletonSequence> out;
    for (int c = 0; c < spec.class_count; ++c) {
        for (int i = 0; i < per_class; ++i) {
            const double speed = 1.0 + spec.speed_jitter * (2.0 * uni(rng) - 1.0);
            const double phase = spec.phase_jitter * uni(rng);
            SkeletonSequence seq;
            seq.source_id = stream + "_c" + std::to_string(c) + "_s" + std::to_string(i);
            seq.label = "class" + std::to_string(c);
            for (int t = 0; t < spec.frames; ++t) {
                seq.frames.push_back(detail::pose_at(spec, c, t * speed + phase,
                                                     spec.noise_sigma, rng));
            }
            out.push_back(std::move(seq));
        }
    }
    return out;
}

inline std::vector<SkeletonSequence> synth_train_split(const SyntheticTaskSpec& spec) {
    return synth_samples(spec, spec.train_per_class, "train");
}

inline std::vector<SkeletonSequence> synth_test_split(const SyntheticTaskSpec& spec) {
    return synth_samples(spec, spec.test_per_class, "test");
}

}  // namespace lienet
