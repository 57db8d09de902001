#include <catch2/catch_amalgamated.hpp>

#include <fstream>

#include "helpers.hpp"
#include "lienet/skeleton.hpp"

using namespace lienet;
using namespace lienet::testing;
using Catch::Matchers::WithinAbs;

namespace {

SkeletonTopology chain_topology(int joints) {
    SkeletonTopology topo;
    topo.joint_count = joints;
    for (int j = 0; j + 1 < joints; ++j) topo.bones.emplace_back(j, j + 1);
    return topo;
}

JointFrame random_frame(int joints, std::mt19937_64& rng) {
    std::normal_distribution<double> g(0.0, 1.0);
    JointFrame f;
    for (int j = 0; j < joints; ++j) f.positions.emplace_back(g(rng), g(rng), g(rng));
    return f;
}

}  // namespace

TEST_CASE("edge_vector") {
    SkeletonTopology topo = chain_topology(3);
    JointFrame f;
    f.positions = {Vec3(0, 0, 0), Vec3(1, 0, 0), Vec3(1, 0, 0)};
    REQUIRE(edge_vector(f, topo, 0) == Vec3(1, 0, 0));
    REQUIRE(edge_vector(f, topo, 1) == Vec3(0, 0, 0));  // coincident joints

    f.positions = {Vec3(1, 2, 3), Vec3(4, 6, 3), Vec3(0, 0, 0)};
    REQUIRE(edge_vector(f, topo, 0) == Vec3(3, 4, 0));
}

TEST_CASE("relative_rotation") {
    SECTION("parallel edges give identity") {
        REQUIRE((relative_rotation(Vec3(2, 1, 0), Vec3(4, 2, 0)) - Mat3::Identity())
                    .norm() < 1e-12);
    }

    SECTION("canonical quarter turn") {
        const Mat3 r = relative_rotation(Vec3(1, 0, 0), Vec3(0, 1, 0));
        REQUIRE((r - rot_z(kPi / 2)).norm() < 1e-12);
        REQUIRE_THAT(rotation_angle(r), WithinAbs(kPi / 2, 1e-12));
        REQUIRE((rotation_axis(r) - Vec3(0, 0, 1)).norm() < 1e-12);
    }

    SECTION("antiparallel edges rotate by pi - delta about (0,0,1)") {
        const Mat3 r = relative_rotation(Vec3(1, 0, 0), Vec3(-1, 0, 0));
        // arccos conditioning near pi limits the recovered-angle accuracy
        REQUIRE_THAT(rotation_angle(r), WithinAbs(kPi - kAngleEps, 1e-9));
        REQUIRE((rotation_axis(r) - Vec3(0, 0, 1)).norm() < 1e-9);
        // maps the first direction to within delta of the second
        const double miss =
            std::acos(std::clamp((r * Vec3(1, 0, 0)).dot(Vec3(-1, 0, 0)), -1.0, 1.0));
        REQUIRE(miss <= kAngleEps + 1e-9);
        REQUIRE_NOTHROW(log_map(r));
    }

    SECTION("carries the first direction onto the second") {
        std::mt19937_64 rng(41);
        std::uniform_real_distribution<double> len(0.1, 5.0);
        for (int i = 0; i < 500; ++i) {
            const Vec3 em = len(rng) * random_unit(rng);
            const Vec3 en = len(rng) * random_unit(rng);
            const Mat3 r = relative_rotation(em, en);
            REQUIRE(is_rotation(r));
            REQUIRE((r * em.normalized() - en.normalized()).norm() < 1e-8);
        }
    }

    SECTION("degenerate bones throw") {
        REQUIRE_THROWS_AS(relative_rotation(Vec3::Zero(), Vec3(1, 0, 0)),
                          DegenerateBone);
        REQUIRE_THROWS_AS(relative_rotation(Vec3(1, 0, 0), Vec3(1e-9, 0, 0)),
                          DegenerateBone);
    }
}

TEST_CASE("frame_to_lie shapes and degenerate handling") {
    SECTION("fully aligned skeleton gives all identities") {
        SkeletonTopology topo = chain_topology(4);  // 3 bones along +x
        JointFrame f;
        for (int j = 0; j < 4; ++j) f.positions.emplace_back(double(j), 0.0, 0.0);
        const LieFrame lf = frame_to_lie(f, topo);
        REQUIRE(lf.rotations.size() == 6);  // 2 C(3,2)
        for (const auto& r : lf.rotations) {
            REQUIRE((r - Mat3::Identity()).norm() < 1e-12);
        }
    }

    SECTION("19-bone skeleton yields 342 channels") {
        std::mt19937_64 rng(43);
        SkeletonTopology topo = chain_topology(20);
        const LieFrame lf = frame_to_lie(random_frame(20, rng), topo);
        REQUIRE(lf.rotations.size() == 342);
        for (const auto& r : lf.rotations) REQUIRE(is_rotation(r));
    }

    SECTION("degenerate bone becomes identity and is counted") {
        SkeletonTopology topo = chain_topology(4);
        JointFrame f;
        f.positions = {Vec3(0, 0, 0), Vec3(1, 0, 0), Vec3(1, 0, 0), Vec3(1, 1, 0)};
        // bone 1 has zero length; it participates in pairs {0,1} and {1,2}
        ExtractStats stats;
        const LieFrame lf = frame_to_lie(f, topo, &stats);
        REQUIRE(stats.degenerate_substitutions == 4);
        REQUIRE((lf.rotations[0] - Mat3::Identity()).norm() == 0.0);  // pair {0,1}
        REQUIRE((lf.rotations[1] - Mat3::Identity()).norm() == 0.0);
        // pair {0,2} is healthy
        REQUIRE((lf.rotations[2] - Mat3::Identity()).norm() > 0.1);
    }

    SECTION("wrong frame size throws") {
        SkeletonTopology topo = chain_topology(4);
        JointFrame f;
        f.positions = {Vec3(0, 0, 0), Vec3(1, 0, 0)};
        REQUIRE_THROWS_AS(frame_to_lie(f, topo), InconsistentJointCount);
    }
}

TEST_CASE("frame_to_lie invariances") {
    std::mt19937_64 rng(47);
    SkeletonTopology topo = chain_topology(6);

    SECTION("global rotation") {
        for (int trial = 0; trial < 100; ++trial) {
            const JointFrame f = random_frame(6, rng);
            const Mat3 q = random_rotation(rng);
            JointFrame g;
            for (const auto& p : f.positions) g.positions.push_back(q * p);
            const LieFrame a = frame_to_lie(f, topo);
            const LieFrame b = frame_to_lie(g, topo);
            for (size_t k = 0; k < a.rotations.size(); ++k) {
                REQUIRE((a.rotations[k] - b.rotations[k]).cwiseAbs().maxCoeff() < 1e-8);
            }
        }
    }

    SECTION("translation on a dyadic grid is exact") {
        // Positions and offset on the same binary grid make the joint sums
        // exact, so the extracted features must match bitwise.
        std::uniform_int_distribution<int> grid(-(1 << 20), 1 << 20);
        for (int trial = 0; trial < 20; ++trial) {
            JointFrame f;
            for (int j = 0; j < 6; ++j) {
                f.positions.emplace_back(grid(rng) / 1048576.0, grid(rng) / 1048576.0,
                                         grid(rng) / 1048576.0);
            }
            const Vec3 offset(grid(rng) / 1048576.0, grid(rng) / 1048576.0,
                              grid(rng) / 1048576.0);
            JointFrame g;
            for (const auto& p : f.positions) g.positions.push_back(p + offset);
            const LieFrame a = frame_to_lie(f, topo);
            const LieFrame b = frame_to_lie(g, topo);
            for (size_t k = 0; k < a.rotations.size(); ++k) {
                REQUIRE(a.rotations[k] == b.rotations[k]);
            }
        }
    }

    SECTION("arbitrary translation and positive scale") {
        std::uniform_real_distribution<double> scale(0.1, 10.0);
        std::normal_distribution<double> off(0.0, 5.0);
        for (int trial = 0; trial < 100; ++trial) {
            const JointFrame f = random_frame(6, rng);
            const Vec3 t(off(rng), off(rng), off(rng));
            const double c = scale(rng);
            JointFrame g, h;
            for (const auto& p : f.positions) {
                g.positions.push_back(p + t);
                h.positions.push_back(c * p);
            }
            const LieFrame a = frame_to_lie(f, topo);
            const LieFrame b = frame_to_lie(g, topo);
            const LieFrame s = frame_to_lie(h, topo);
            for (size_t k = 0; k < a.rotations.size(); ++k) {
                REQUIRE((a.rotations[k] - b.rotations[k]).cwiseAbs().maxCoeff() < 1e-8);
                REQUIRE((a.rotations[k] - s.rotations[k]).cwiseAbs().maxCoeff() < 1e-10);
            }
        }
    }

    SECTION("pair order is deterministic") {
        const JointFrame f = random_frame(6, rng);
        const LieFrame a = frame_to_lie(f, topo);
        const LieFrame b = frame_to_lie(f, topo);
        REQUIRE(a.rotations.size() == b.rotations.size());
        for (size_t k = 0; k < a.rotations.size(); ++k) {
            REQUIRE(a.rotations[k] == b.rotations[k]);
        }
    }
}

TEST_CASE("resample_sequence") {
    std::mt19937_64 rng(53);

    auto make_seq = [&](int frames, int channels) {
        LieSequence s;
        s.source_id = "s";
        for (int t = 0; t < frames; ++t) {
            LieFrame f;
            for (int c = 0; c < channels; ++c) f.rotations.push_back(random_rotation(rng));
            s.frames.push_back(std::move(f));
        }
        return s;
    };

    SECTION("n == T returns the identical sequence") {
        const LieSequence s = make_seq(7, 3);
        const LieSequence r = resample_sequence(s, 7);
        for (int t = 0; t < 7; ++t)
            for (int c = 0; c < 3; ++c)
                REQUIRE(r.frames[t].rotations[c] == s.frames[t].rotations[c]);
    }

    SECTION("single frame is replicated") {
        const LieSequence s = make_seq(1, 2);
        const LieSequence r = resample_sequence(s, 5);
        REQUIRE(r.frames.size() == 5);
        for (int t = 0; t < 5; ++t)
            for (int c = 0; c < 2; ++c)
                REQUIRE(r.frames[t].rotations[c] == s.frames[0].rotations[c]);
    }

    SECTION("geodesic midpoint") {
        LieSequence s;
        LieFrame f0, f1;
        f0.rotations = {Mat3::Identity()};
        f1.rotations = {rot_z(kPi / 2)};
        s.frames = {f0, f1};
        const LieSequence r = resample_sequence(s, 3);
        REQUIRE(r.frames.size() == 3);
        REQUIRE(r.frames[0].rotations[0] == f0.rotations[0]);
        REQUIRE(r.frames[2].rotations[0] == f1.rotations[0]);
        REQUIRE((r.frames[1].rotations[0] - rot_z(kPi / 4)).norm() < 1e-12);
    }

    SECTION("idempotence") {
        const LieSequence s = make_seq(9, 2);
        const LieSequence once = resample_sequence(s, 5);
        const LieSequence twice = resample_sequence(once, 5);
        for (int t = 0; t < 5; ++t)
            for (int c = 0; c < 2; ++c)
                REQUIRE(
                    (twice.frames[t].rotations[c] - once.frames[t].rotations[c]).norm() <
                    1e-9);
    }

    SECTION("half-turn entries fall back to nearest neighbor") {
        LieSequence s;
        LieFrame f0, f1;
        f0.rotations = {Mat3::Identity()};
        f1.rotations = {rot_z(kPi)};
        s.frames = {f0, f1};
        const LieSequence r = resample_sequence(s, 5);
        REQUIRE(r.frames[1].rotations[0] == f0.rotations[0]);  // frac 0.25
        REQUIRE(r.frames[3].rotations[0] == f1.rotations[0]);  // frac 0.75
    }

    SECTION("preconditions") {
        LieSequence empty;
        REQUIRE_THROWS_AS(resample_sequence(empty, 4), EmptyDataset);
        REQUIRE_THROWS_AS(resample_sequence(make_seq(3, 1), 0), ShapeMismatch);
    }
}

TEST_CASE("SKEL v1 parsing") {
    TempDir dir;

    SECTION("well-formed file round-trips") {
        const std::string path = dir.file("ok.skel");
        {
            std::ofstream out(path);
            out << "SKEL v1 joints=3 bones=2\n"
                << "bones: 0-1 1-2\n"
                << "seq sample0 label=wave frames=2\n"
                << "0 0 0 1 0 0 1 1 0\n"
                << "0 0 0 1 0 0 2 1 0.5\n";
        }
        const auto [topo, seqs] = load_skeleton_file(path);
        REQUIRE(topo.joint_count == 3);
        REQUIRE(topo.bone_count() == 2);
        REQUIRE(topo.bones[1] == std::make_pair(1, 2));
        REQUIRE(seqs.size() == 1);
        REQUIRE(seqs[0].label == "wave");
        REQUIRE(seqs[0].source_id == "sample0");
        REQUIRE(seqs[0].frames.size() == 2);
        REQUIRE(seqs[0].frames[1].positions[2] == Vec3(2, 1, 0.5));
    }

    SECTION("save/load round trip preserves coordinates") {
        std::mt19937_64 rng(59);
        SkeletonTopology topo = chain_topology(4);
        std::vector<SkeletonSequence> seqs(2);
        for (int s = 0; s < 2; ++s) {
            seqs[s].source_id = "seq" + std::to_string(s);
            seqs[s].label = "c" + std::to_string(s);
            for (int t = 0; t < 3; ++t) seqs[s].frames.push_back(random_frame(4, rng));
        }
        const std::string path = dir.file("rt.skel");
        save_skeleton_file(path, topo, seqs);
        const auto [topo2, seqs2] = load_skeleton_file(path);
        REQUIRE(topo2.bones == topo.bones);
        REQUIRE(seqs2.size() == 2);
        for (int s = 0; s < 2; ++s) {
            REQUIRE(seqs2[s].label == seqs[s].label);
            for (int t = 0; t < 3; ++t)
                for (int j = 0; j < 4; ++j)
                    REQUIRE(seqs2[s].frames[t].positions[j] ==
                            seqs[s].frames[t].positions[j]);
        }
    }

    SECTION("wrong coordinate count names the frame index") {
        const std::string path = dir.file("badframe.skel");
        {
            std::ofstream out(path);
            out << "SKEL v1 joints=2 bones=1\n"
                << "bones: 0-1\n"
                << "seq s label=a frames=2\n"
                << "0 0 0 1 0 0\n"
                << "0 0 0 1 0\n";
        }
        REQUIRE_THROWS_WITH(load_skeleton_file(path),
                            Catch::Matchers::ContainsSubstring("frame 1"));
        REQUIRE_THROWS_AS(load_skeleton_file(path), InconsistentJointCount);
    }

    SECTION("empty sequence body is malformed") {
        const std::string path = dir.file("empty.skel");
        {
            std::ofstream out(path);
            out << "SKEL v1 joints=2 bones=1\n"
                << "bones: 0-1\n"
                << "seq s label=a frames=0\n";
        }
        REQUIRE_THROWS_AS(load_skeleton_file(path), MalformedFile);
    }

    SECTION("syntax errors carry line numbers") {
        const std::string path = dir.file("badheader.skel");
        {
            std::ofstream out(path);
            out << "SKEL v2 joints=2 bones=1\n";
        }
        REQUIRE_THROWS_WITH(load_skeleton_file(path),
                            Catch::Matchers::ContainsSubstring(":1:"));
    }

    SECTION("self-bone is rejected") {
        const std::string path = dir.file("selfbone.skel");
        {
            std::ofstream out(path);
            out << "SKEL v1 joints=2 bones=1\n"
                << "bones: 1-1\n";
        }
        REQUIRE_THROWS_AS(load_skeleton_file(path), MalformedFile);
    }
}

TEST_CASE("LIEF feature cache") {
    TempDir dir;
    std::mt19937_64 rng(61);

    LieSequence seq;
    seq.source_id = "x";
    for (int t = 0; t < 4; ++t) {
        LieFrame f;
        for (int c = 0; c < 6; ++c) f.rotations.push_back(random_rotation(rng));
        seq.frames.push_back(std::move(f));
    }

    SECTION("round trip is bitwise") {
        const std::string path = dir.file("a.lief");
        write_feature_cache(path, seq);
        const LieSequence back = read_feature_cache(path);
        REQUIRE(back.frames.size() == 4);
        for (int t = 0; t < 4; ++t)
            for (int c = 0; c < 6; ++c)
                REQUIRE(back.frames[t].rotations[c] == seq.frames[t].rotations[c]);
    }

    SECTION("header layout: magic, version, channels, frames") {
        const std::string path = dir.file("b.lief");
        write_feature_cache(path, seq);
        std::ifstream in(path, std::ios::binary);
        char magic[4];
        std::uint32_t version, channels, frames;
        in.read(magic, 4);
        in.read(reinterpret_cast<char*>(&version), 4);
        in.read(reinterpret_cast<char*>(&channels), 4);
        in.read(reinterpret_cast<char*>(&frames), 4);
        REQUIRE(std::string(magic, 4) == "LIEF");
        REQUIRE(version == 1);
        REQUIRE(channels == 6);
        REQUIRE(frames == 4);
        REQUIRE(std::filesystem::file_size(path) == 16 + 4ull * 6 * 9 * 8);
    }

    SECTION("bad magic and truncation are malformed") {
        const std::string path = dir.file("c.lief");
        {
            std::ofstream out(path, std::ios::binary);
            out << "NOPE";
        }
        REQUIRE_THROWS_AS(read_feature_cache(path), MalformedFile);

        const std::string path2 = dir.file("d.lief");
        write_feature_cache(path2, seq);
        std::filesystem::resize_file(path2, 40);
        REQUIRE_THROWS_AS(read_feature_cache(path2), MalformedFile);
    }
}

TEST_CASE("LabelMap") {
    const LabelMap map = LabelMap::from_labels({"wave", "kick", "wave", "punch"});
    REQUIRE(map.size() == 3);
    REQUIRE(map.names == std::vector<std::string>{"kick", "punch", "wave"});
    REQUIRE(map.index_of("punch") == 1);
    REQUIRE_THROWS_AS(map.index_of("jump"), UnknownLabel);
}
