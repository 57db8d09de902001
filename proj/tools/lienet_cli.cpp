// Command-line entry point: synthetic data generation, feature extraction,
// training, evaluation and gradient checking over the SKEL/LIEF/LIEN file
// formats. Configuration comes from a `key = value` file with one section
// per command; flags override file values and the effective configuration is
// echoed into the output directory.

#include <fcntl.h>
#include <unistd.h>

#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "lienet/config.hpp"
#include "lienet/network.hpp"
#include "lienet/skeleton.hpp"
#include "lienet/synth.hpp"
#include "lienet/training.hpp"

namespace fs = std::filesystem;
using namespace lienet;

namespace {

/// Exclusive claim on an output directory via a lock file; released on exit.
class OutputDir {
  public:
    explicit OutputDir(const std::string& path) : dir_(path) {
        fs::create_directories(dir_);
        lock_path_ = dir_ / "lock";
        fd_ = ::open(lock_path_.c_str(), O_CREAT | O_EXCL | O_WRONLY, 0644);
        if (fd_ < 0) {
            throw ConfigError("output directory is locked (remove " +
                              lock_path_.string() + " if no run is active)");
        }
    }
    ~OutputDir() {
        if (fd_ >= 0) {
            ::close(fd_);
            ::unlink(lock_path_.c_str());
        }
    }
    OutputDir(const OutputDir&) = delete;
    OutputDir& operator=(const OutputDir&) = delete;

    fs::path file(const std::string& name) const { return dir_ / name; }
    const fs::path& path() const { return dir_; }

  private:
    fs::path dir_;
    fs::path lock_path_;
    int fd_ = -1;
};

std::string sanitize_filename(const std::string& s) {
    std::string out;
    for (const char c : s) {
        out += (std::isalnum(static_cast<unsigned char>(c)) || c == '-' || c == '_')
                   ? c
                   : '_';
    }
    return out.empty() ? std::string("seq") : out;
}

struct ExtractedData {
    std::vector<LieSequence> sequences;
    long degenerate = 0;
};

ExtractedData extract_sequences(const SkeletonTopology& topo,
                                const std::vector<SkeletonSequence>& raw,
                                int resample_n) {
    ExtractedData out;
    ExtractStats stats;
    for (const auto& s : raw) {
        LieSequence ls;
        ls.label = s.label;
        ls.source_id = s.source_id;
        for (const auto& f : s.frames) {
            ls.frames.push_back(frame_to_lie(f, topo, &stats));
        }
        if (resample_n >= 1) ls = resample_sequence(ls, resample_n);
        out.sequences.push_back(std::move(ls));
    }
    out.degenerate = stats.degenerate_substitutions;
    return out;
}

struct LoadedData {
    std::vector<LieSequence> sequences;
    long degenerate = 0;
};

/// Accepts either a SKEL file (features extracted on the fly) or a cache
/// directory holding LIEF files plus an index.csv sidecar.
LoadedData load_features(const std::string& path, int resample_n) {
    LoadedData out;
    if (fs::is_directory(path)) {
        const fs::path index = fs::path(path) / "index.csv";
        std::ifstream in(index);
        if (!in) throw MalformedFile(index.string() + ": cannot open cache index");
        std::string line;
        std::getline(in, line);  // header
        while (std::getline(in, line)) {
            if (line.empty()) continue;
            std::istringstream ls(line);
            std::string file, label, source;
            std::getline(ls, file, ',');
            std::getline(ls, label, ',');
            std::getline(ls, source, ',');
            if (file.empty() || label.empty()) {
                throw MalformedFile(index.string() + ": malformed row '" + line + "'");
            }
            LieSequence seq = read_feature_cache((fs::path(path) / file).string());
            seq.label = label;
            seq.source_id = source;
            if (resample_n >= 1) seq = resample_sequence(seq, resample_n);
            out.sequences.push_back(std::move(seq));
        }
        if (out.sequences.empty()) {
            throw EmptyDataset(index.string() + ": no cached sequences listed");
        }
        return out;
    }
    const auto [topo, raw] = load_skeleton_file(path);
    ExtractedData ex = extract_sequences(topo, raw, resample_n);
    out.sequences = std::move(ex.sequences);
    out.degenerate = ex.degenerate;
    return out;
}

LabelMap labels_of(const std::vector<LieSequence>& seqs) {
    std::vector<std::string> names;
    for (const auto& s : seqs) names.push_back(s.label);
    return LabelMap::from_labels(std::move(names));
}

void write_label_file(const fs::path& path, const LabelMap& labels) {
    std::ofstream out(path);
    for (const auto& n : labels.names) out << n << "\n";
}

LabelMap read_label_file(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw MalformedFile(path.string() + ": cannot open label file");
    LabelMap map;
    std::string line;
    while (std::getline(in, line)) {
        if (!line.empty()) map.names.push_back(line);
    }
    return map;
}

SyntheticTaskSpec synth_spec_from(const RunConfig& cfg) {
    SyntheticTaskSpec task;
    task.class_count = static_cast<int>(cfg.get_int("synth.classes", task.class_count));
    task.joint_count = static_cast<int>(cfg.get_int("synth.joints", task.joint_count));
    task.frames = static_cast<int>(cfg.get_int("synth.frames", task.frames));
    task.train_per_class =
        static_cast<int>(cfg.get_int("synth.train_per_class", task.train_per_class));
    task.test_per_class =
        static_cast<int>(cfg.get_int("synth.test_per_class", task.test_per_class));
    task.noise_sigma = cfg.get_double("synth.sigma", task.noise_sigma);
    task.speed_jitter = cfg.get_double("synth.speed_jitter", task.speed_jitter);
    task.phase_jitter = cfg.get_double("synth.phase_jitter", task.phase_jitter);
    task.seed = static_cast<std::uint64_t>(cfg.get_int("global.seed", 1));
    if (task.class_count < 2) throw ConfigError("synth.classes must be >= 2");
    if (task.joint_count < 3) throw ConfigError("synth.joints must be >= 3");
    if (task.frames < 1) throw ConfigError("synth.frames must be >= 1");
    return task;
}

std::vector<PoolKind> pooling_from(const RunConfig& cfg, const std::string& key,
                                   int blocks) {
    const std::string text = cfg.get_string(key, "");
    if (text.empty()) return default_block_pooling(blocks);
    std::vector<PoolKind> pools;
    std::istringstream in(text);
    std::string tok;
    while (std::getline(in, tok, ',')) {
        if (tok == "spa") {
            pools.push_back(PoolKind::Spatial);
        } else if (tok == "tem") {
            pools.push_back(PoolKind::Temporal);
        } else {
            throw ConfigError(key + ": expected comma-separated spa/tem, got '" + tok +
                              "'");
        }
    }
    return pools;
}

NetworkSpec network_spec_from(const RunConfig& cfg, const std::string& section,
                              int channels, int frames, int classes) {
    NetworkSpec spec;
    spec.input_channels = channels;
    spec.input_frames = frames;
    spec.class_count = classes;
    const int blocks = static_cast<int>(cfg.get_int(section + ".blocks", 1));
    spec.block_pooling = pooling_from(cfg, section + ".pooling", blocks);
    spec.temporal_window =
        static_cast<int>(cfg.get_int(section + ".tem_window", spec.temporal_window));
    spec.use_threshold_relu = cfg.get_bool(section + ".relu", false);
    spec.relu_threshold = cfg.get_double(section + ".relu_eps", spec.relu_threshold);
    spec.vectorize_full = !cfg.get_bool(section + ".vec3", false);
    return spec;
}

void print_shapes(const NetworkSpec& spec) {
    const auto stack = plan_layers(spec);
    std::cout << "layer stack:\n";
    std::vector<int> frames_prog{spec.input_frames};
    std::vector<int> channel_prog{spec.input_channels};
    for (size_t i = 0; i < stack.size(); ++i) {
        const LayerSpec& l = stack[i];
        std::cout << "  " << std::setw(2) << i << "  " << std::setw(14) << std::left
                  << layer_kind_name(l.kind) << std::right;
        if (l.kind == LayerKind::FullyConnected || l.kind == LayerKind::SoftmaxLoss ||
            l.kind == LayerKind::ThresholdRelu) {
            std::cout << "  " << l.in_dim << " -> " << l.out_dim;
        } else if (l.kind == LayerKind::Vectorize) {
            std::cout << "  " << l.in_frames << " x " << l.in_channels << " -> "
                      << l.out_dim << "\nvectorized width: " << l.out_dim;
        } else {
            std::cout << "  " << l.in_frames << " x " << l.in_channels << " -> "
                      << l.out_frames << " x " << l.out_channels;
            const bool pooling = l.kind == LayerKind::SpaPooling ||
                                 l.kind == LayerKind::TemPooling ||
                                 l.kind == LayerKind::GroupPooling;
            if (pooling) frames_prog.push_back(l.out_frames);
            if (l.out_channels != l.in_channels) channel_prog.push_back(l.out_channels);
        }
        std::cout << "\n";
    }
    std::cout << "temporal progression: " << frames_prog[0];
    for (size_t i = 1; i < frames_prog.size(); ++i) {
        std::cout << " -> " << frames_prog[i];
    }
    std::cout << "\nchannel progression: " << channel_prog[0];
    for (size_t i = 1; i < channel_prog.size(); ++i) {
        std::cout << " -> " << channel_prog[i];
    }
    std::cout << "\n";
}

int cmd_synth(RunConfig& cfg) {
    const SyntheticTaskSpec task = synth_spec_from(cfg);
    OutputDir out(cfg.get_string("global.out", "out"));
    const SkeletonTopology topo = synth_topology(task);
    save_skeleton_file(out.file("train.skel").string(), topo, synth_train_split(task));
    save_skeleton_file(out.file("test.skel").string(), topo, synth_test_split(task));
    cfg.write_echo(out.file("config.echo").string());
    std::cout << "synth: " << task.class_count << " classes x " << task.train_per_class
              << "+" << task.test_per_class << " samples, " << task.frames
              << " frames, " << topo.bone_count() << " bones -> "
              << out.file("train.skel").string() << ", "
              << out.file("test.skel").string() << "\n";
    return 0;
}

int cmd_extract(RunConfig& cfg) {
    const std::string input = cfg.require_string("extract.input");
    const int n = static_cast<int>(cfg.get_int("extract.n", 0));
    OutputDir out(cfg.get_string("global.out", "out"));

    const auto [topo, raw] = load_skeleton_file(input);
    const ExtractedData ex = extract_sequences(topo, raw, n);

    std::ofstream index(out.file("index.csv"));
    index << "file,label,source_id\n";
    for (size_t i = 0; i < ex.sequences.size(); ++i) {
        const LieSequence& seq = ex.sequences[i];
        std::ostringstream name;
        name << std::setw(4) << std::setfill('0') << i << "_"
             << sanitize_filename(seq.source_id) << ".lief";
        write_feature_cache(out.file(name.str()).string(), seq);
        index << name.str() << "," << seq.label << "," << seq.source_id << "\n";
    }
    cfg.write_echo(out.file("config.echo").string());
    const int channels = ex.sequences.empty()
                             ? 0
                             : static_cast<int>(ex.sequences[0].frames[0].rotations.size());
    std::cout << "extract: " << ex.sequences.size() << " sequences, " << channels
              << " channels, " << ex.degenerate << " degenerate-bone fallbacks\n";
    return 0;
}

int cmd_train(RunConfig& cfg, bool shapes_only) {
    const std::uint64_t seed = static_cast<std::uint64_t>(cfg.get_int("global.seed", 1));
    const int n = static_cast<int>(cfg.get_int("train.n", 0));

    if (shapes_only) {
        int channels = static_cast<int>(cfg.get_int("train.channels", 0));
        if (channels == 0) {
            const int bones = static_cast<int>(cfg.get_int("train.bones", 0));
            if (bones < 2) {
                throw ConfigError("--shapes-only needs train.channels or train.bones");
            }
            channels = lie_channels(bones);
        }
        const int frames = n >= 1 ? n : static_cast<int>(cfg.get_int("train.frames", 0));
        if (frames < 1) throw ConfigError("--shapes-only needs train.n or train.frames");
        const int classes = static_cast<int>(cfg.get_int("train.classes", 2));
        print_shapes(network_spec_from(cfg, "train", channels, frames, classes));
        return 0;
    }

    const std::string data_path = cfg.require_string("train.data");
    OutputDir out(cfg.get_string("global.out", "out"));

    const LoadedData loaded = load_features(data_path, n);
    const LabelMap labels = labels_of(loaded.sequences);
    const Dataset data = dataset_from_sequences(loaded.sequences, labels);

    Dataset val;
    const std::string val_path = cfg.get_string("train.val", "");
    if (!val_path.empty()) {
        val = dataset_from_sequences(load_features(val_path, n).sequences, labels);
    }

    const int channels = data.samples[0].channels;
    const int frames = data.samples[0].frames;
    const int classes = static_cast<int>(cfg.get_int("train.classes", labels.size()));
    if (classes < labels.size()) {
        throw ConfigError("train.classes is smaller than the number of labels in the data");
    }

    Network net;
    const std::string resume = cfg.get_string("train.resume", "");
    if (!resume.empty()) {
        net = load_checkpoint(resume);
        if (net.spec.input_channels != channels || net.spec.input_frames != frames) {
            throw GeometryMismatch(
                "resume checkpoint geometry (" + std::to_string(net.spec.input_channels) +
                " ch x " + std::to_string(net.spec.input_frames) +
                " frames) does not match data (" + std::to_string(channels) + " ch x " +
                std::to_string(frames) + ")");
        }
    } else {
        std::mt19937_64 rng(seed);
        net = build_network(network_spec_from(cfg, "train", channels, frames, classes),
                            rng);
    }

    OptimizerConfig opt;
    opt.learning_rate = cfg.get_double("train.lr", opt.learning_rate);
    opt.batch_size = static_cast<int>(cfg.get_int("train.batch", opt.batch_size));
    opt.epochs = static_cast<int>(cfg.get_int("train.epochs", 10));
    opt.seed = seed;
    opt.shuffle = cfg.get_bool("train.shuffle", true);
    opt.lr_decay = cfg.get_double("train.lr_decay", opt.lr_decay);
    opt.gradcheck_mode = cfg.get_bool("train.gradcheck_mode", false);
    if (opt.learning_rate <= 0.0) throw ConfigError("train.lr must be > 0");
    if (opt.batch_size < 1) throw ConfigError("train.batch must be >= 1");

    const int first_epoch = net.epochs_completed;
    const TrainingLog log = train(net, data, opt, val.size() ? &val : nullptr);
    for (const auto& e : log.epochs) {
        std::cout << "epoch " << e.epoch << "  loss " << std::fixed
                  << std::setprecision(6) << e.mean_loss << "  train_acc "
                  << std::setprecision(4) << e.train_acc;
        if (!std::isnan(e.val_acc)) std::cout << "  val_acc " << e.val_acc;
        std::cout << "  drift " << std::scientific << std::setprecision(2) << e.drift
                  << std::defaultfloat << "\n";
    }

    save_checkpoint(out.file("checkpoint.lien").string(), net);
    write_label_file(out.file("labels.txt"), labels);
    const fs::path log_path = out.file("training_log.csv");
    if (first_epoch > 0 && fs::exists(log_path)) {
        // resumed run: append rows under the existing header
        std::ofstream app(log_path, std::ios::app);
        app.precision(12);
        for (const auto& e : log.epochs) {
            app << e.epoch << "," << e.mean_loss << "," << e.train_acc << ",";
            if (!std::isnan(e.val_acc)) app << e.val_acc;
            app << "," << e.drift << "," << e.seconds << "\n";
        }
    } else {
        write_training_log(log_path.string(), log);
    }
    cfg.write_echo(out.file("config.echo").string());

    if (log.aborted) {
        throw NonFiniteGradient(-1, "training aborted: " + log.abort_reason +
                                        " (last-good checkpoint retained)");
    }
    std::cout << "trained " << log.epochs.size() << " epochs (" << net.epochs_completed
              << " total) -> " << out.file("checkpoint.lien").string() << "\n";
    return 0;
}

int cmd_eval(RunConfig& cfg) {
    const std::string ckpt_path = cfg.require_string("eval.checkpoint");
    const std::string data_path = cfg.require_string("eval.data");
    const int n = static_cast<int>(cfg.get_int("eval.n", 0));
    OutputDir out(cfg.get_string("global.out", "out"));

    const Network net = load_checkpoint(ckpt_path);
    const LoadedData loaded = load_features(data_path, n);

    LabelMap labels;
    const fs::path label_file = fs::path(ckpt_path).parent_path() / "labels.txt";
    if (fs::exists(label_file)) {
        labels = read_label_file(label_file);
    } else {
        labels = labels_of(loaded.sequences);
    }
    if (labels.size() > net.spec.class_count) {
        throw GeometryMismatch("label map has " + std::to_string(labels.size()) +
                               " classes but the checkpoint expects " +
                               std::to_string(net.spec.class_count));
    }
    const Dataset data = dataset_from_sequences(loaded.sequences, labels);
    const EvalResult r = evaluate(net, data);

    std::cout << "accuracy: " << std::fixed << std::setprecision(6) << r.accuracy
              << "\nmean loss: " << r.mean_loss << "\nconfusion (rows = true):\n";
    for (int i = 0; i < r.confusion.rows(); ++i) {
        std::cout << "  ";
        for (int j = 0; j < r.confusion.cols(); ++j) {
            std::cout << std::setw(6) << r.confusion(i, j);
        }
        const std::string name =
            i < labels.size() ? labels.names[i] : ("class" + std::to_string(i));
        std::cout << "   " << name << "\n";
    }

    std::ofstream csv(out.file("eval.csv"));
    csv.precision(12);
    csv << "accuracy," << r.accuracy << "\nmean_loss," << r.mean_loss << "\n";
    for (int i = 0; i < r.confusion.rows(); ++i) {
        for (int j = 0; j < r.confusion.cols(); ++j) {
            csv << (j ? "," : "") << r.confusion(i, j);
        }
        csv << "\n";
    }
    cfg.write_echo(out.file("config.echo").string());
    return 0;
}

int cmd_gradcheck(RunConfig& cfg, int mutate_layer) {
    const std::uint64_t seed = static_cast<std::uint64_t>(cfg.get_int("global.seed", 1));
    const int bones = static_cast<int>(cfg.get_int("gradcheck.bones", 5));
    const int frames = static_cast<int>(cfg.get_int("gradcheck.frames", 8));
    const int classes = static_cast<int>(cfg.get_int("gradcheck.classes", 3));
    const int blocks = static_cast<int>(cfg.get_int("gradcheck.blocks", 1));
    const int seeds = static_cast<int>(cfg.get_int("gradcheck.seeds", 5));
    GradCheckTolerances tol;
    tol.flat = cfg.get_double("gradcheck.tol_flat", tol.flat);
    tol.rotmap = cfg.get_double("gradcheck.tol_rotmap", tol.rotmap);

    NetworkSpec spec;
    spec.input_channels = lie_channels(bones);
    spec.input_frames = frames;
    spec.class_count = classes;
    spec.block_pooling = pooling_from(cfg, "gradcheck.pooling", blocks);
    spec.temporal_window =
        static_cast<int>(cfg.get_int("gradcheck.tem_window", spec.temporal_window));

    std::map<std::string, LayerCheck> worst;
    for (int s = 0; s < seeds; ++s) {
        std::mt19937_64 rng(seed + s);
        Network net = build_network(spec, rng);
        if (mutate_layer >= static_cast<int>(net.layers.size())) {
            throw ConfigError("--mutate index beyond the layer stack");
        }
        std::uniform_real_distribution<double> ang(0.05, 2.9);
        std::normal_distribution<double> gauss(0.0, 1.0);
        Mat3Tensor sample = Mat3Tensor::make(frames, spec.input_channels);
        for (auto& m : sample.data) {
            Vec3 axis(gauss(rng), gauss(rng), gauss(rng));
            while (axis.norm() < 1e-6) axis = Vec3(gauss(rng), gauss(rng), gauss(rng));
            m = rotation_from_axis_angle({axis.normalized(), ang(rng)});
        }
        const GradCheckReport report =
            finite_difference_check(net, sample, s % classes, tol, rng, mutate_layer);
        for (const auto& c : report.checks) {
            auto [it, fresh] = worst.try_emplace(c.name, c);
            if (!fresh && c.max_rel_err > it->second.max_rel_err) it->second = c;
        }
    }

    if (mutate_layer >= 0) {
        std::cout << "mutated layer " << mutate_layer << "\n";
    }
    bool all_pass = true;
    for (const auto& [name, c] : worst) {
        std::cout << (c.pass ? "pass" : "FAIL") << "  layer " << std::setw(2)
                  << c.layer_index << "  " << std::setw(14) << std::left << name
                  << std::right << "  max rel err " << std::scientific
                  << std::setprecision(3) << c.max_rel_err << "  tol " << c.tol
                  << std::defaultfloat << "\n";
        all_pass = all_pass && c.pass;
    }
    std::cout << (all_pass ? "gradcheck passed" : "gradcheck FAILED") << " over "
              << seeds << " seeds\n";
    return all_pass ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Deep network training on rotation-group features of skeleton data"};
    app.require_subcommand(1);
    app.fallthrough();  // global flags may follow the subcommand

    std::string config_path;
    std::string out_dir;
    long long seed = -1;
    bool shapes_only = false;
    std::vector<std::string> overrides;
    app.add_option("--config", config_path,
                   "configuration file (key = value, [section] per command)");
    app.add_option("--seed", seed, "run seed (overrides the config)");
    app.add_option("--out", out_dir, "output directory");
    app.add_flag("--shapes-only", shapes_only,
                 "print the layer shape progression and exit (train)");
    app.add_option("--set", overrides, "extra section.key=value overrides")->take_all();

    auto* synth = app.add_subcommand("synth", "generate the synthetic task as SKEL files");
    auto* extract = app.add_subcommand("extract", "extract LIEF feature caches from a SKEL file");
    auto* train_cmd = app.add_subcommand("train", "train a network");
    auto* eval_cmd = app.add_subcommand("eval", "evaluate a checkpoint");
    auto* gradcheck = app.add_subcommand("gradcheck", "finite-difference gradient oracle");

    std::string opt_input, opt_data, opt_val, opt_checkpoint, opt_resume;
    long long opt_n = -1, opt_epochs = -1, opt_batch = -1, opt_blocks = -1;
    double opt_lr = -1.0;
    int mutate_layer = -1;
    extract->add_option("--input", opt_input, "SKEL input file");
    extract->add_option("--n", opt_n, "target resampled length");
    train_cmd->add_option("--data", opt_data, "SKEL file or cache directory");
    train_cmd->add_option("--val", opt_val, "validation SKEL file or cache directory");
    train_cmd->add_option("--n", opt_n, "target resampled length");
    train_cmd->add_option("--epochs", opt_epochs, "total epoch target");
    train_cmd->add_option("--batch", opt_batch, "batch size");
    train_cmd->add_option("--lr", opt_lr, "learning rate");
    train_cmd->add_option("--blocks", opt_blocks, "RotMap/RotPooling block count");
    train_cmd->add_option("--resume", opt_resume, "checkpoint to continue from");
    eval_cmd->add_option("--data", opt_data, "SKEL file or cache directory");
    eval_cmd->add_option("--checkpoint", opt_checkpoint, "checkpoint to evaluate");
    eval_cmd->add_option("--n", opt_n, "target resampled length");
    gradcheck->add_option("--mutate", mutate_layer,
                          "flip the backward sign of one layer (index into the stack)");

    CLI11_PARSE(app, argc, argv);

    try {
        RunConfig cfg;
        if (!config_path.empty()) cfg.load_file(config_path);
        for (const auto& kv : overrides) {
            const auto eq = kv.find('=');
            if (eq == std::string::npos || kv.find('.') == std::string::npos ||
                kv.find('.') > eq) {
                throw ConfigError("--set expects section.key=value, got '" + kv + "'");
            }
            cfg.set(kv.substr(0, eq), kv.substr(eq + 1));
        }
        if (seed >= 0) cfg.set("global.seed", std::to_string(seed));
        if (!out_dir.empty()) cfg.set("global.out", out_dir);
        if (!opt_input.empty()) cfg.set("extract.input", opt_input);
        if (!opt_resume.empty()) cfg.set("train.resume", opt_resume);
        if (!opt_val.empty()) cfg.set("train.val", opt_val);
        if (opt_epochs >= 0) cfg.set("train.epochs", std::to_string(opt_epochs));
        if (opt_batch >= 0) cfg.set("train.batch", std::to_string(opt_batch));
        if (opt_lr >= 0) cfg.set("train.lr", std::to_string(opt_lr));
        if (opt_blocks >= 0) cfg.set("train.blocks", std::to_string(opt_blocks));

        if (*synth) return cmd_synth(cfg);
        if (*extract) {
            if (opt_n >= 0) cfg.set("extract.n", std::to_string(opt_n));
            return cmd_extract(cfg);
        }
        if (*train_cmd) {
            if (!opt_data.empty()) cfg.set("train.data", opt_data);
            if (opt_n >= 0) cfg.set("train.n", std::to_string(opt_n));
            return cmd_train(cfg, shapes_only);
        }
        if (*eval_cmd) {
            if (!opt_data.empty()) cfg.set("eval.data", opt_data);
            if (!opt_checkpoint.empty()) cfg.set("eval.checkpoint", opt_checkpoint);
            if (opt_n >= 0) cfg.set("eval.n", std::to_string(opt_n));
            return cmd_eval(cfg);
        }
        if (*gradcheck) return cmd_gradcheck(cfg, mutate_layer);
        return 1;
    } catch (const ConfigError& e) {
        std::cerr << "error: config: " << e.what() << "\n";
        return 2;
    } catch (const DataError& e) {
        std::cerr << "error: data: " << e.what() << "\n";
        return 3;
    } catch (const NumericError& e) {
        std::cerr << "error: numeric: " << e.what() << "\n";
        return 4;
    } catch (const std::exception& e) {
        std::cerr << "error: internal: " << e.what() << "\n";
        return 1;
    }
}
