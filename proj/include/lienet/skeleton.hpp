#pragma once

// Skeleton-to-Lie-group feature extraction: relative bone geometry as
// rotation matrices, fixed-length geodesic resampling, and the two on-disk
// formats (the `SKEL v1` text format for raw joint data and the `LIEF`
// binary cache for extracted curves).

#include <algorithm>
#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "lienet/errors.hpp"
#include "lienet/so3.hpp"

namespace lienet {

/// Bones shorter than this are treated as capture dropouts.
inline constexpr double kBoneLengthEps = 1e-8;

struct SkeletonTopology {
    int joint_count = 0;
    std::vector<std::pair<int, int>> bones;  // (start, end), canonical order

    int bone_count() const { return static_cast<int>(bones.size()); }
};

/// Number of rotation features per frame: both orders of every bone pair,
/// 2 * C(M, 2) = M (M - 1).
inline int lie_channels(int bone_count) {
    return bone_count * (bone_count - 1);
}

inline void validate_topology(const SkeletonTopology& topo) {
    if (topo.joint_count <= 0) {
        throw DataError("topology: joint count must be positive");
    }
    for (const auto& [s, e] : topo.bones) {
        if (s < 0 || e < 0 || s >= topo.joint_count || e >= topo.joint_count) {
            throw DataError("topology: bone index out of range");
        }
        if (s == e) {
            throw DataError("topology: bone connects a joint to itself");
        }
    }
}

/// All joint positions of one skeleton at one time instant.
struct JointFrame {
    std::vector<Vec3> positions;
};

/// One skeleton at one time instant as a point on SO(3)^(M(M-1)): for every
/// bone pair {m, n} with m < n, the rotations R_{m,n} then R_{n,m}.
struct LieFrame {
    std::vector<Mat3> rotations;
};

/// A fixed-topology temporal sequence of LieFrames (a curve on the product
/// group), with classification label and provenance.
struct LieSequence {
    std::vector<LieFrame> frames;
    std::string label;  // empty when unlabeled
    std::string source_id;
};

/// Raw joint sequence as parsed from a SKEL file.
struct SkeletonSequence {
    std::string source_id;
    std::string label;
    std::vector<JointFrame> frames;
};

inline Vec3 edge_vector(const JointFrame& frame, const SkeletonTopology& topo,
                        int bone_index) {
    const auto& [s, e] = topo.bones.at(bone_index);
    return frame.positions.at(e) - frame.positions.at(s);
}

/// Minimum rotation carrying the direction of em onto the direction of en:
/// axis (em x en)/|em x en|, angle between the directions. Exactly
/// antiparallel inputs rotate by pi - delta about a deterministic
/// perpendicular (rejection of (0,0,1) from the edge, or (0,1,0) when the
/// edge is collinear with z) so the result stays inside the log domain.
inline Mat3 relative_rotation(const Vec3& em, const Vec3& en) {
    const double lm = em.norm();
    const double ln = en.norm();
    if (lm <= kBoneLengthEps || ln <= kBoneLengthEps) {
        throw DegenerateBone("relative_rotation: bone below length floor");
    }
    const Vec3 a = em / lm;
    const Vec3 b = en / ln;
    const Vec3 cross = a.cross(b);
    const double dot = std::clamp(a.dot(b), -1.0, 1.0);
    const double cn = cross.norm();
    if (cn < 1e-12) {
        if (dot > 0.0) return Mat3::Identity();
        Vec3 perp = Vec3(0, 0, 1) - a.z() * a;
        if (perp.norm() < 1e-6) {
            perp = Vec3(0, 1, 0);
        } else {
            perp.normalize();
        }
        return rotation_from_axis_angle({perp, kPi - kAngleEps});
    }
    // atan2 form of arccos(a.b); identical value, stable at both ends.
    return rotation_from_axis_angle({cross / cn, std::atan2(cn, dot)});
}

/// Counters accumulated during extraction and returned to the caller.
struct ExtractStats {
    long degenerate_substitutions = 0;  // identity matrices emitted for bad bones
};

namespace detail {

/// Gauge rotation for a (reference, partner) direction pair: carries the
/// reference onto +x and the partner into the upper xy half-plane. Built
/// from the pair itself, so it co-rotates with the scene and the resulting
/// features are invariant to any global rotation of the input joints.
inline Mat3 pair_gauge(const Vec3& reference, const Vec3& partner) {
    const Vec3 rej = partner - partner.dot(reference) * reference;
    Mat3 q;
    q.row(0) = reference;
    q.row(1) = rej.normalized();
    q.row(2) = reference.cross(rej.normalized());
    return q;
}

inline Mat3 pair_feature(const Vec3& reference, const Vec3& partner) {
    static const Vec3 x_axis(1, 0, 0);
    const Vec3 rej = partner - partner.dot(reference) * reference;
    if (rej.norm() < 1e-12) {
        // Partner parallel to the reference: the gauge is free and the
        // feature depends only on the sign of the alignment.
        return relative_rotation(partner.dot(reference) > 0.0 ? x_axis : -x_axis,
                                 x_axis);
    }
    return relative_rotation(pair_gauge(reference, partner) * partner, x_axis);
}

}  // namespace detail

/// Extract the Lie-group features of one frame: for every bone pair {m, n}
/// with m < n (lexicographic), the partner edge is translated to the
/// reference origin, rotated into the reference-local frame (reference on
/// the x-axis), and compared against the x-axis by relative_rotation —
/// first with n as reference (R_{m,n}), then with m (R_{n,m}). Degenerate
/// bones contribute identity entries and bump the stats counter.
inline LieFrame frame_to_lie(const JointFrame& frame, const SkeletonTopology& topo,
                             ExtractStats* stats = nullptr) {
    const int m_bones = topo.bone_count();
    if (static_cast<int>(frame.positions.size()) != topo.joint_count) {
        throw InconsistentJointCount("frame_to_lie: frame does not match topology");
    }
    std::vector<Vec3> dir(m_bones);
    std::vector<bool> ok(m_bones);
    for (int b = 0; b < m_bones; ++b) {
        const Vec3 e = edge_vector(frame, topo, b);
        ok[b] = e.norm() > kBoneLengthEps;
        dir[b] = ok[b] ? Vec3(e.normalized()) : Vec3::Zero();
    }

    auto feature = [&](int partner, int reference) -> Mat3 {
        if (!ok[partner] || !ok[reference]) {
            if (stats) ++stats->degenerate_substitutions;
            return Mat3::Identity();
        }
        return detail::pair_feature(dir[reference], dir[partner]);
    };

    LieFrame out;
    out.rotations.reserve(lie_channels(m_bones));
    for (int m = 0; m < m_bones; ++m) {
        for (int n = m + 1; n < m_bones; ++n) {
            out.rotations.push_back(feature(m, n));  // R_{m,n}
            out.rotations.push_back(feature(n, m));  // R_{n,m}
        }
    }
    return out;
}

/// Resample a sequence to exactly n frames. Sample positions are uniform in
/// [0, T-1]; fractional positions interpolate geodesically per matrix, with
/// a nearest-neighbor fallback for half-turn-apart entries. Endpoints map to
/// endpoints; n == T reproduces the input bitwise.
inline LieSequence resample_sequence(const LieSequence& seq, int n) {
    const int t_in = static_cast<int>(seq.frames.size());
    if (t_in < 1) throw EmptyDataset("resample_sequence: empty input sequence");
    if (n < 1) throw ShapeMismatch("resample_sequence: target length must be >= 1");

    LieSequence out;
    out.label = seq.label;
    out.source_id = seq.source_id;
    out.frames.resize(n);

    if (t_in == 1 || n == 1) {
        for (int i = 0; i < n; ++i) out.frames[i] = seq.frames[0];
        return out;
    }
    const int channels = static_cast<int>(seq.frames[0].rotations.size());
    for (int i = 0; i < n; ++i) {
        const double pos = std::min(
            static_cast<double>(i) * static_cast<double>(t_in - 1) / (n - 1),
            static_cast<double>(t_in - 1));
        const int lo = static_cast<int>(pos);
        const double frac = pos - lo;
        if (frac == 0.0) {  // integral positions (incl. both endpoints) copy
            out.frames[i] = seq.frames[lo];
            continue;
        }
        LieFrame f;
        f.rotations.resize(channels);
        for (int c = 0; c < channels; ++c) {
            const Mat3& r0 = seq.frames[lo].rotations[c];
            const Mat3& r1 = seq.frames[lo + 1].rotations[c];
            try {
                f.rotations[c] = geodesic_interpolate(r0, r1, frac);
            } catch (const NearPiSingularity&) {
                f.rotations[c] = frac < 0.5 ? r0 : r1;
            }
        }
        out.frames[i] = std::move(f);
    }
    return out;
}

// ---------------------------------------------------------------------------
// SKEL v1 text format
// ---------------------------------------------------------------------------

inline std::pair<SkeletonTopology, std::vector<SkeletonSequence>> load_skeleton_file(
    const std::string& path) {
    std::ifstream in(path);
    if (!in) throw MalformedFile(path + ": cannot open");

    auto fail = [&](int line, const std::string& msg) -> void {
        throw MalformedFile(path + ":" + std::to_string(line) + ": " + msg);
    };

    int line_no = 0;
    std::string line;
    auto next_line = [&]() -> bool {
        while (std::getline(in, line)) {
            ++line_no;
            if (!line.empty() && line.back() == '\r') line.pop_back();
            return true;
        }
        return false;
    };

    if (!next_line()) fail(1, "empty file");
    SkeletonTopology topo;
    {
        std::istringstream hs(line);
        std::string magic, ver, jtok, btok;
        hs >> magic >> ver >> jtok >> btok;
        if (magic != "SKEL" || ver != "v1") fail(line_no, "expected 'SKEL v1' header");
        if (jtok.rfind("joints=", 0) != 0 || btok.rfind("bones=", 0) != 0)
            fail(line_no, "expected joints=<J> bones=<M>");
        try {
            topo.joint_count = std::stoi(jtok.substr(7));
        } catch (...) {
            fail(line_no, "bad joint count");
        }
        int bone_count = 0;
        try {
            bone_count = std::stoi(btok.substr(6));
        } catch (...) {
            fail(line_no, "bad bone count");
        }
        if (!next_line()) fail(line_no + 1, "missing bone list");
        std::istringstream bs(line);
        std::string tag;
        bs >> tag;
        if (tag != "bones:") fail(line_no, "expected 'bones:' line");
        std::string pair_tok;
        while (bs >> pair_tok) {
            const auto dash = pair_tok.find('-');
            if (dash == std::string::npos) fail(line_no, "bone pair missing '-'");
            try {
                topo.bones.emplace_back(std::stoi(pair_tok.substr(0, dash)),
                                        std::stoi(pair_tok.substr(dash + 1)));
            } catch (...) {
                fail(line_no, "bad bone pair '" + pair_tok + "'");
            }
        }
        if (static_cast<int>(topo.bones.size()) != bone_count)
            fail(line_no, "bone list length does not match header");
        try {
            validate_topology(topo);
        } catch (const DataError& e) {
            fail(line_no, e.what());
        }
    }

    std::vector<SkeletonSequence> sequences;
    while (next_line()) {
        if (line.empty()) continue;
        std::istringstream ss(line);
        std::string tag, source_id, ltok, ftok;
        ss >> tag >> source_id >> ltok >> ftok;
        if (tag != "seq") fail(line_no, "expected 'seq' header");
        if (ltok.rfind("label=", 0) != 0 || ftok.rfind("frames=", 0) != 0)
            fail(line_no, "expected label=<string> frames=<T>");
        SkeletonSequence seq;
        seq.source_id = source_id;
        seq.label = ltok.substr(6);
        int frames = 0;
        try {
            frames = std::stoi(ftok.substr(7));
        } catch (...) {
            fail(line_no, "bad frame count");
        }
        if (frames < 1) fail(line_no, "empty sequence body");
        for (int f = 0; f < frames; ++f) {
            if (!next_line()) fail(line_no + 1, "unexpected end of file inside sequence");
            std::istringstream fs(line);
            JointFrame jf;
            double v;
            std::vector<double> vals;
            while (fs >> v) vals.push_back(v);
            if (static_cast<int>(vals.size()) != 3 * topo.joint_count) {
                throw InconsistentJointCount(
                    path + ":" + std::to_string(line_no) + ": frame " +
                    std::to_string(f) + " of sequence '" + seq.source_id + "' has " +
                    std::to_string(vals.size()) + " values, expected " +
                    std::to_string(3 * topo.joint_count));
            }
            jf.positions.reserve(topo.joint_count);
            for (int j = 0; j < topo.joint_count; ++j) {
                jf.positions.emplace_back(vals[3 * j], vals[3 * j + 1], vals[3 * j + 2]);
            }
            seq.frames.push_back(std::move(jf));
        }
        sequences.push_back(std::move(seq));
    }
    return {topo, sequences};
}

inline void save_skeleton_file(const std::string& path, const SkeletonTopology& topo,
                               const std::vector<SkeletonSequence>& sequences) {
    std::ofstream out(path);
    if (!out) throw DataError(path + ": cannot open for writing");
    out.precision(17);
    out << "SKEL v1 joints=" << topo.joint_count << " bones=" << topo.bone_count()
        << "\n";
    out << "bones:";
    for (const auto& [s, e] : topo.bones) out << " " << s << "-" << e;
    out << "\n";
    for (const auto& seq : sequences) {
        out << "seq " << seq.source_id << " label=" << seq.label
            << " frames=" << seq.frames.size() << "\n";
        for (const auto& f : seq.frames) {
            for (size_t j = 0; j < f.positions.size(); ++j) {
                if (j) out << " ";
                out << f.positions[j].x() << " " << f.positions[j].y() << " "
                    << f.positions[j].z();
            }
            out << "\n";
        }
    }
}

// ---------------------------------------------------------------------------
// LIEF binary cache: magic, u32 version, u32 channels, u32 frames, then
// frames x channels rotation matrices as 9 little-endian float64 (row-major).
// ---------------------------------------------------------------------------

static_assert(std::endian::native == std::endian::little,
              "LIEF cache I/O assumes a little-endian host");

inline constexpr std::uint32_t kFeatureCacheVersion = 1;

inline void write_feature_cache(const std::string& path, const LieSequence& seq) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError(path + ": cannot open for writing");
    const std::uint32_t channels =
        seq.frames.empty() ? 0 : static_cast<std::uint32_t>(seq.frames[0].rotations.size());
    const std::uint32_t frames = static_cast<std::uint32_t>(seq.frames.size());
    out.write("LIEF", 4);
    const std::uint32_t version = kFeatureCacheVersion;
    out.write(reinterpret_cast<const char*>(&version), 4);
    out.write(reinterpret_cast<const char*>(&channels), 4);
    out.write(reinterpret_cast<const char*>(&frames), 4);
    for (const auto& frame : seq.frames) {
        for (const auto& r : frame.rotations) {
            for (int i = 0; i < 3; ++i) {
                for (int j = 0; j < 3; ++j) {
                    const double v = r(i, j);
                    out.write(reinterpret_cast<const char*>(&v), 8);
                }
            }
        }
    }
    if (!out) throw DataError(path + ": write failed");
}

inline LieSequence read_feature_cache(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw MalformedFile(path + ": cannot open");
    char magic[4];
    in.read(magic, 4);
    if (!in || std::memcmp(magic, "LIEF", 4) != 0)
        throw MalformedFile(path + ": bad magic");
    std::uint32_t version = 0, channels = 0, frames = 0;
    in.read(reinterpret_cast<char*>(&version), 4);
    in.read(reinterpret_cast<char*>(&channels), 4);
    in.read(reinterpret_cast<char*>(&frames), 4);
    if (!in || version != kFeatureCacheVersion)
        throw MalformedFile(path + ": unsupported version");
    LieSequence seq;
    seq.frames.resize(frames);
    for (auto& frame : seq.frames) {
        frame.rotations.resize(channels);
        for (auto& r : frame.rotations) {
            for (int i = 0; i < 3; ++i) {
                for (int j = 0; j < 3; ++j) {
                    double v;
                    in.read(reinterpret_cast<char*>(&v), 8);
                    r(i, j) = v;
                }
            }
        }
    }
    if (!in) throw MalformedFile(path + ": truncated matrix data");
    return seq;
}

/// Sorted label-name to class-index mapping shared between train and eval.
struct LabelMap {
    std::vector<std::string> names;

    static LabelMap from_labels(std::vector<std::string> labels) {
        std::sort(labels.begin(), labels.end());
        labels.erase(std::unique(labels.begin(), labels.end()), labels.end());
        return LabelMap{std::move(labels)};
    }

    int index_of(const std::string& label) const {
        const auto it = std::lower_bound(names.begin(), names.end(), label);
        if (it == names.end() || *it != label) {
            throw UnknownLabel("unknown label '" + label + "'");
        }
        return static_cast<int>(it - names.begin());
    }

    int size() const { return static_cast<int>(names.size()); }
};

}  // namespace lienet
