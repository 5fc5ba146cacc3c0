// biodiff: batch front door over the library. simulate | train | generate |
// restore | evaluate | augment, plain key=value config files, stable exit
// codes (0 ok, 2 usage/validation, 3 numerical, 1 io).
#include <omp.h>

#include <algorithm>
#include <charconv>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "biodiff/data.hpp"
#include "biodiff/engine.hpp"
#include "biodiff/errors.hpp"
#include "biodiff/eval.hpp"

namespace fs = std::filesystem;
using namespace biodiff;

namespace {

constexpr int kOk = 0, kIo = 1, kUsage = 2, kNumeric = 3;

struct UsageError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

std::string fmt(double v) {
    char b[40];
    auto r = std::to_chars(b, b + sizeof b, v);
    return std::string(b, r.ptr);
}

long long parse_ll(const std::string& key, const std::string& v) {
    long long out = 0;
    auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
    if (ec != std::errc{} || p != v.data() + v.size())
        throw UsageError("bad integer for '" + key + "': '" + v + "'");
    return out;
}

double parse_f(const std::string& key, const std::string& v) {
    try {
        size_t used = 0;
        const double out = std::stod(v, &used);
        if (used != v.size()) throw std::invalid_argument(v);
        return out;
    } catch (const std::exception&) {
        throw UsageError("bad number for '" + key + "': '" + v + "'");
    }
}

// Options registered here can come from the command line or a key=value
// config file (flags win), and are echoed into the resolved-config dump.
struct OptReg {
    struct Entry {
        std::string name;
        CLI::Option* opt;
        std::function<void(const std::string&)> set;
        std::function<std::string()> get;
    };
    std::vector<Entry> entries;

    Entry* find(const std::string& name) {
        for (auto& e : entries)
            if (e.name == name) return &e;
        return nullptr;
    }

    void add_int(CLI::App* cmd, const std::string& name, int* var, const std::string& help) {
        CLI::Option* o = cmd->add_option("--" + name, *var, help);
        entries.push_back({name, o, [var, name](const std::string& v) { *var = (int)parse_ll(name, v); },
                           [var] { return std::to_string(*var); }});
    }
    void add_u64(CLI::App* cmd, const std::string& name, unsigned long long* var,
                 const std::string& help) {
        CLI::Option* o = cmd->add_option("--" + name, *var, help);
        entries.push_back({name, o,
                           [var, name](const std::string& v) {
                               *var = (unsigned long long)parse_ll(name, v);
                           },
                           [var] { return std::to_string(*var); }});
    }
    void add_f(CLI::App* cmd, const std::string& name, double* var, const std::string& help) {
        CLI::Option* o = cmd->add_option("--" + name, *var, help);
        entries.push_back({name, o, [var, name](const std::string& v) { *var = parse_f(name, v); },
                           [var] { return fmt(*var); }});
    }
    void add_str(CLI::App* cmd, const std::string& name, std::string* var,
                 const std::string& help) {
        CLI::Option* o = cmd->add_option("--" + name, *var, help);
        entries.push_back({name, o, [var](const std::string& v) { *var = v; },
                           [var] { return *var; }});
    }
    void add_flag(CLI::App* cmd, const std::string& name, bool* var, const std::string& help) {
        CLI::Option* o = cmd->add_flag("--" + name, *var, help);
        entries.push_back({name, o,
                           [var, name](const std::string& v) {
                               if (v == "1" || v == "true")
                                   *var = true;
                               else if (v == "0" || v == "false")
                                   *var = false;
                               else
                                   throw UsageError("bad flag value for '" + name + "': '" + v + "'");
                           },
                           [var] { return *var ? "1" : "0"; }});
    }
};

// key=value lines; '#' comments. Flags passed on the command line win.
void apply_config(const std::string& path, const std::string& command, OptReg* global,
                  OptReg* local) {
    std::ifstream in(path);
    if (!in) throw UsageError("cannot read config file '" + path + "'");
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const size_t h = line.find('#');
        if (h != std::string::npos) line.resize(h);
        const size_t b = line.find_first_not_of(" \t\r");
        if (b == std::string::npos) continue;
        const size_t e = line.find_last_not_of(" \t\r");
        line = line.substr(b, e - b + 1);
        const size_t eq = line.find('=');
        if (eq == std::string::npos)
            throw UsageError("config line " + std::to_string(lineno) + " is not key=value");
        std::string key = line.substr(0, eq), value = line.substr(eq + 1);
        while (!key.empty() && (key.back() == ' ' || key.back() == '\t')) key.pop_back();
        size_t vs = value.find_first_not_of(" \t");
        value = vs == std::string::npos ? "" : value.substr(vs);
        if (key == "command") {
            if (value != command)
                throw UsageError("config file is for command '" + value + "', not '" + command +
                                 "'");
            continue;
        }
        OptReg::Entry* ent = local->find(key);
        if (!ent) ent = global->find(key);
        if (!ent) throw UsageError("unknown config key '" + key + "'");
        if (ent->opt->count() > 0) continue;  // command line wins
        ent->set(value);
    }
}

void write_text(const fs::path& path, const std::string& content) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
    out << content;
    if (!out.good()) throw IoError("failed writing '" + path.string() + "'");
}

void write_resolved_config(const fs::path& out_dir, const std::string& command, OptReg& global,
                           OptReg& local) {
    std::string text = "command=" + command + "\n";
    for (const auto& e : global.entries) text += e.name + "=" + e.get() + "\n";
    for (const auto& e : local.entries) text += e.name + "=" + e.get() + "\n";
    write_text(out_dir / (command + "_config.txt"), text);
}

void require_file(const std::string& path, const std::string& flag) {
    if (path.empty()) throw UsageError("--" + flag + " is required");
    if (!fs::exists(path)) throw UsageError("--" + flag + ": no such file '" + path + "'");
}

std::vector<int> parse_mults(const std::string& s) {
    std::vector<int> out;
    std::string cur;
    for (char c : s + ",") {
        if (c == ',') {
            if (cur.empty()) throw UsageError("bad --channel-mults '" + s + "'");
            out.push_back((int)parse_ll("channel-mults", cur));
            if (out.back() < 1) throw UsageError("--channel-mults entries must be >= 1");
            cur.clear();
        } else {
            cur += c;
        }
    }
    return out;
}

// ---- command payloads -----------------------------------------------------

struct GlobalArgs {
    unsigned long long seed = 0;
    std::string config;
    std::string out = ".";
    bool verbose = false;
};

struct SimulateArgs {
    int n_per_class = 100;
    int n_test_per_class = -1;  // -1: n_per_class / 4
    int length = 512;
    double obs_noise = 1.0;
};

int cmd_simulate(const GlobalArgs& g, SimulateArgs& a, OptReg& greg, OptReg& lreg) {
    if (a.n_per_class < 1) throw UsageError("--n-per-class must be >= 1");
    if (a.length < 8) throw UsageError("--length must be >= 8");
    if (a.obs_noise < 0) throw UsageError("--obs-noise must be >= 0");
    if (a.n_test_per_class < 0) a.n_test_per_class = std::max(1, a.n_per_class / 4);
    if (a.n_test_per_class < 1) throw UsageError("--n-test-per-class must be >= 1");
    const int n_test = a.n_test_per_class;

    SimOptions opt;
    opt.length = a.length;
    opt.obs_noise = a.obs_noise;
    const fs::path dir(g.out);
    write_resolved_config(dir, "simulate", greg, lreg);

    const Dataset train_ds = gen_simulated(a.n_per_class, g.seed, opt);
    const Dataset test_ds = gen_simulated(n_test, derive_seed(g.seed, "test"), opt);
    write_csv((dir / "train.csv").string(), train_ds);
    write_csv((dir / "test.csv").string(), test_ds);
    write_text(dir / "manifest.txt", simulated_manifest(a.n_per_class, g.seed, opt));
    std::cout << "wrote " << (dir / "train.csv").string() << " (" << train_ds.size() << " rows)\n"
              << "wrote " << (dir / "test.csv").string() << " (" << test_ds.size() << " rows)\n";
    return kOk;
}

struct TrainArgs {
    std::string data, regime = "uncond", schedule;
    int timesteps = 0;  // 0: regime default
    int epochs = 100, batch_size = 32, patience = 10;
    double lr = 3e-4, val_fraction = 0.1, ema = 0.0;
    bool log_elbo = false;
    int base_channels = 32, res_groups = 8, attn_heads = 4, time_embed_dim = 0;
    std::string channel_mults = "1,2,4";
    double cond_drop = 0.5;
    int csv_channels = 1;
    std::string corrupt;
    double corrupt_amplitude = 0.0, corrupt_rate = 0.0;
    int corrupt_factor = 2;
};

int cmd_train(const GlobalArgs& g, TrainArgs& a, OptReg& greg, OptReg& lreg) {
    require_file(a.data, "data");
    TrainRegime regime;
    try {
        regime = regime_from_string(a.regime);
    } catch (const std::invalid_argument& e) {
        throw UsageError(e.what());
    }
    const std::vector<int> mults = parse_mults(a.channel_mults);
    std::optional<CorruptionSpec> corruptor;
    if (!a.corrupt.empty()) {
        CorruptionSpec spec;
        spec.kind = corruption_kind_from_string(a.corrupt);
        spec.amplitude = a.corrupt_amplitude;
        spec.rate = a.corrupt_rate;
        spec.factor = a.corrupt_factor;
        spec.seed = derive_seed(g.seed, "corrupt");
        corruptor = spec;
    } else if (regime == TrainRegime::signal) {
        throw UsageError("--regime signal needs --corrupt (thermal|drift|spikes|mask|downsample)");
    }

    const NoiseSchedule def = default_schedule(regime);
    const ScheduleKind kind =
        a.schedule.empty() ? def.kind : schedule_kind_from_string(a.schedule);
    const int T = a.timesteps > 0 ? a.timesteps : def.T;
    const NoiseSchedule sched = (kind == def.kind && T == def.T) ? def : build_schedule(kind, T);
    a.schedule = to_string(kind);
    a.timesteps = T;

    const fs::path dir(g.out);
    write_resolved_config(dir, "train", greg, lreg);

    CsvLayout layout;
    layout.channels = a.csv_channels;
    const Dataset data = load_csv(a.data, layout);

    UNetConfig cfg;
    cfg.in_channels = data.channels;
    cfg.signal_length = data.length;
    cfg.base_channels = a.base_channels;
    cfg.channel_mults = mults;
    cfg.res_groups = a.res_groups;
    cfg.attn_heads = a.attn_heads;
    cfg.time_embed_dim = a.time_embed_dim;
    cfg.cond_drop_prob = a.cond_drop;
    cfg.signal_cond = regime == TrainRegime::signal;
    if (regime == TrainRegime::label) {
        int max_label = -1;
        for (const auto& [cls, cnt] : class_counts(data)) max_label = std::max(max_label, cls);
        if (max_label < 0) throw UsageError("--regime label needs labeled data");
        cfg.num_classes = max_label + 1;
    }
    UNet model(cfg, derive_seed(g.seed, "init"));

    TrainConfig tcfg;
    tcfg.lr = a.lr;
    tcfg.batch_size = a.batch_size;
    tcfg.epochs = a.epochs;
    tcfg.early_stop_patience = a.patience;
    tcfg.val_fraction = a.val_fraction;
    if (a.ema > 0.0) tcfg.ema_decay = a.ema;
    tcfg.seed = g.seed;
    tcfg.log_elbo = a.log_elbo;

    std::ofstream log((dir / "train_log.csv").string());
    if (!log) throw IoError("cannot open train_log.csv for writing");
    log << "epoch,train_loss,val_loss\n";
    const bool verbose = g.verbose;
    const Checkpoint ckpt = train(&model, data, regime, corruptor, tcfg, sched,
                                  [&log, verbose](const EpochStats& s) {
                                      log << s.epoch << ',' << fmt(s.train_loss) << ','
                                          << fmt(s.val_loss) << '\n';
                                      log.flush();
                                      if (verbose)
                                          std::cerr << "epoch " << s.epoch << " train "
                                                    << s.train_loss << " val " << s.val_loss
                                                    << '\n';
                                  });
    save_checkpoint((dir / "model.ckpt").string(), ckpt);
    std::cout << "wrote " << (dir / "model.ckpt").string() << " (best val "
              << fmt(ckpt.best_val_loss) << " after " << ckpt.epochs_completed << " epochs)\n";
    return kOk;
}

struct GenerateArgs {
    std::string ckpt, cond;
    int n = 10, label = -1;
    double guidance = 0.0, var_interp = 0.0;
    int csv_channels = 1;
};

int cmd_generate(const GlobalArgs& g, const GenerateArgs& a, OptReg& greg, OptReg& lreg) {
    require_file(a.ckpt, "ckpt");
    if (a.n < 0) throw UsageError("--n must be >= 0");
    if (a.guidance < 0) throw UsageError("--guidance must be >= 0");

    const fs::path dir(g.out);
    write_resolved_config(dir, "generate", greg, lreg);

    const Checkpoint ckpt = load_checkpoint(a.ckpt);
    SampleOptions opt;
    opt.var_interp = a.var_interp;
    Dataset out;
    switch (ckpt.regime) {
        case TrainRegime::unconditional:
            if (a.label >= 0)
                throw UsageError("--label requires a label-conditional checkpoint");
            out = sample_unconditional(ckpt, a.n, g.seed, opt);
            break;
        case TrainRegime::label: {
            if (a.label < 0) throw UsageError("--label is required for this checkpoint");
            GuidanceConfig gc;
            gc.weight = a.guidance;
            out = sample_label_conditional(ckpt, a.label, a.n, gc, g.seed, opt);
            break;
        }
        case TrainRegime::signal: {
            require_file(a.cond, "cond");
            CsvLayout layout;
            layout.channels = a.csv_channels;
            const Dataset cond = load_csv(a.cond, layout);
            out.channels = ckpt.config.in_channels;
            out.length = ckpt.config.signal_length;
            for (size_t i = 0; i < cond.size(); ++i)
                out.signals.push_back(sample_signal_conditional(
                    ckpt, cond.signals[i], derive_seed(g.seed, "generate", (uint64_t)i), opt));
            break;
        }
    }
    write_csv((dir / "generated.csv").string(), out);
    std::cout << "wrote " << (dir / "generated.csv").string() << " (" << out.size() << " rows)\n";
    return kOk;
}

struct RestoreArgs {
    std::string ckpt, data, task = "denoise";
    int factor = 1;
    int csv_channels = 1;
};

int cmd_restore(const GlobalArgs& g, const RestoreArgs& a, OptReg& greg, OptReg& lreg) {
    require_file(a.ckpt, "ckpt");
    require_file(a.data, "data");
    RestoreTask task;
    try {
        task = restore_task_from_string(a.task);
    } catch (const std::invalid_argument&) {
        throw UsageError("unknown task '" + a.task + "' (valid: denoise, impute, upsample)");
    }
    if (a.factor < 1) throw UsageError("--factor must be >= 1");

    const fs::path dir(g.out);
    write_resolved_config(dir, "restore", greg, lreg);

    const Checkpoint ckpt = load_checkpoint(a.ckpt);
    CsvLayout layout;
    layout.channels = a.csv_channels;
    const Dataset degraded = load_csv(a.data, layout);
    const int model_len = ckpt.config.signal_length;

    Dataset out;
    out.channels = ckpt.config.in_channels;
    out.length = model_len;
    for (size_t i = 0; i < degraded.size(); ++i) {
        Signal row = degraded.signals[i];
        if (row.length() != model_len) {
            if (row.length() * a.factor == model_len)
                row = resample_length(row, model_len);  // naive upsample to full rate
            else
                throw UsageError("row length " + std::to_string(row.length()) +
                                 " does not match the model length " + std::to_string(model_len) +
                                 " (or length x factor)");
        }
        out.signals.push_back(
            restore(ckpt, row, task, derive_seed(g.seed, "restore", (uint64_t)i)));
    }
    write_csv((dir / "restored.csv").string(), out);
    std::cout << "wrote " << (dir / "restored.csv").string() << " (" << out.size() << " rows)\n";
    return kOk;
}

struct EvaluateArgs {
    std::string real, synth, project;
    int pairs = 200;
    bool classifier = false;
    int csv_channels = 1;
};

int cmd_evaluate(const GlobalArgs& g, const EvaluateArgs& a, OptReg& greg, OptReg& lreg) {
    require_file(a.real, "real");
    require_file(a.synth, "synth");
    if (a.pairs < 1) throw UsageError("--pairs must be >= 1");

    const fs::path dir(g.out);
    write_resolved_config(dir, "evaluate", greg, lreg);

    CsvLayout layout;
    layout.channels = a.csv_channels;
    const Dataset real_ds = load_csv(a.real, layout);
    const Dataset synth_ds = load_csv(a.synth, layout);

    const MetricReport rep = evaluate_fidelity(real_ds, synth_ds, a.pairs, g.seed);
    std::string text = rep.to_text();
    if (a.classifier) {
        // train on the synthetic rows, score on the real ones
        const F1Report f1 = train_cnn_classifier(synth_ds, real_ds, derive_seed(g.seed, "cnn"));
        for (const auto& [cls, score] : f1.per_class_f1)
            text += "f1_class_" + std::to_string(cls) + "=" + fmt(score) + "\n";
        text += "f1_average=" + fmt(f1.average) + "\n";
    }
    if (!a.project.empty())
        export_projection(real_ds, synth_ds, ProjectionMethod::pca, (dir / a.project).string());
    write_text(dir / "report.txt", text);
    std::cout << text;
    return kOk;
}

struct AugmentArgs {
    std::string ckpt, data;
    int target = 0;  // 0: balance to the current majority
    double guidance = 0.0;
    int csv_channels = 1;
};

int cmd_augment(const GlobalArgs& g, const AugmentArgs& a, OptReg& greg, OptReg& lreg) {
    require_file(a.ckpt, "ckpt");
    require_file(a.data, "data");
    if (a.target < 0) throw UsageError("--target must be >= 0");

    const fs::path dir(g.out);
    write_resolved_config(dir, "augment", greg, lreg);

    const Checkpoint ckpt = load_checkpoint(a.ckpt);
    CsvLayout layout;
    layout.channels = a.csv_channels;
    const Dataset data = load_csv(a.data, layout);
    int target = a.target;
    if (target == 0)
        for (const auto& [cls, cnt] : class_counts(data)) target = std::max(target, cnt);
    GuidanceConfig gc;
    gc.weight = a.guidance;
    const Dataset out = augment_balance(data, ckpt, target, g.seed, gc);
    write_csv((dir / "augmented.csv").string(), out, /*synth_flag_column=*/true);
    std::cout << "wrote " << (dir / "augmented.csv").string() << " (" << out.size() << " rows, "
              << (out.size() - data.size()) << " appended)\n";
    return kOk;
}

}  // namespace

int main(int argc, char** argv) {
    if (const char* env = std::getenv("BIODIFF_NUM_THREADS")) {
        const int n = std::atoi(env);
        if (n > 0) omp_set_num_threads(n);
    }

    CLI::App app{"diffusion synthesis and restoration of multichannel 1-D biomedical signals"};
    app.require_subcommand(1);

    GlobalArgs g;
    OptReg greg;
    greg.add_u64(&app, "seed", &g.seed, "master seed; all randomness derives from it");
    greg.add_str(&app, "out", &g.out, "output directory (created if missing)");
    greg.add_flag(&app, "verbose", &g.verbose, "progress to stderr");
    CLI::Option* config_opt = app.add_option("--config", g.config, "key=value config file");

    SimulateArgs sim;
    CLI::App* c_sim = app.add_subcommand("simulate", "write a simulated cylinder-bell-funnel corpus");
    OptReg sreg;
    sreg.add_int(c_sim, "n-per-class", &sim.n_per_class, "training rows per class");
    sreg.add_int(c_sim, "n-test-per-class", &sim.n_test_per_class, "test rows per class (-1: n/4)");
    sreg.add_int(c_sim, "length", &sim.length, "samples per signal");
    sreg.add_f(c_sim, "obs-noise", &sim.obs_noise, "observation noise std");

    TrainArgs tr;
    CLI::App* c_tr = app.add_subcommand("train", "train a denoiser and write a checkpoint");
    OptReg treg;
    treg.add_str(c_tr, "data", &tr.data, "training CSV");
    treg.add_str(c_tr, "regime", &tr.regime, "uncond | label | signal");
    treg.add_str(c_tr, "schedule", &tr.schedule, "linear | cosine (default: regime choice)");
    treg.add_int(c_tr, "timesteps", &tr.timesteps, "diffusion steps (default: regime choice)");
    treg.add_int(c_tr, "epochs", &tr.epochs, "max epochs");
    treg.add_int(c_tr, "batch-size", &tr.batch_size, "minibatch size");
    treg.add_int(c_tr, "patience", &tr.patience, "early-stop patience in epochs");
    treg.add_f(c_tr, "lr", &tr.lr, "adam learning rate");
    treg.add_f(c_tr, "val-fraction", &tr.val_fraction, "validation split fraction");
    treg.add_f(c_tr, "ema", &tr.ema, "EMA decay for sampling weights (0: off)");
    treg.add_flag(c_tr, "log-elbo", &tr.log_elbo, "estimate variational terms per epoch");
    treg.add_int(c_tr, "base-channels", &tr.base_channels, "U-Net width");
    treg.add_str(c_tr, "channel-mults", &tr.channel_mults, "comma list, e.g. 1,2,4");
    treg.add_int(c_tr, "res-groups", &tr.res_groups, "groupnorm groups");
    treg.add_int(c_tr, "attn-heads", &tr.attn_heads, "attention heads");
    treg.add_int(c_tr, "time-embed-dim", &tr.time_embed_dim, "time embedding dim (0: 4x width)");
    treg.add_f(c_tr, "cond-drop", &tr.cond_drop, "label dropout prob (classifier-free guidance)");
    treg.add_int(c_tr, "csv-channels", &tr.csv_channels, "channels per CSV row");
    treg.add_str(c_tr, "corrupt", &tr.corrupt, "corruption kind for signal pairs");
    treg.add_f(c_tr, "corrupt-amplitude", &tr.corrupt_amplitude, "corruption amplitude");
    treg.add_f(c_tr, "corrupt-rate", &tr.corrupt_rate, "corruption rate in [0,1]");
    treg.add_int(c_tr, "corrupt-factor", &tr.corrupt_factor, "downsample factor");

    GenerateArgs gen;
    CLI::App* c_gen = app.add_subcommand("generate", "sample signals from a checkpoint");
    OptReg genreg;
    genreg.add_str(c_gen, "ckpt", &gen.ckpt, "checkpoint path");
    genreg.add_int(c_gen, "n", &gen.n, "number of samples");
    genreg.add_int(c_gen, "label", &gen.label, "class id (label-conditional checkpoints)");
    genreg.add_f(c_gen, "guidance", &gen.guidance, "classifier-free guidance weight");
    genreg.add_f(c_gen, "var-interp", &gen.var_interp, "reverse variance interpolation in [0,1]");
    genreg.add_str(c_gen, "cond", &gen.cond, "condition CSV (signal-conditional checkpoints)");
    genreg.add_int(c_gen, "csv-channels", &gen.csv_channels, "channels per CSV row");

    RestoreArgs rst;
    CLI::App* c_rst = app.add_subcommand("restore", "denoise / impute / upsample degraded signals");
    OptReg rreg;
    rreg.add_str(c_rst, "ckpt", &rst.ckpt, "signal-conditional checkpoint");
    rreg.add_str(c_rst, "data", &rst.data, "degraded CSV");
    rreg.add_str(c_rst, "task", &rst.task, "denoise | impute | upsample");
    rreg.add_int(c_rst, "factor", &rst.factor, "upsample factor when rows are short");
    rreg.add_int(c_rst, "csv-channels", &rst.csv_channels, "channels per CSV row");

    EvaluateArgs ev;
    CLI::App* c_ev = app.add_subcommand("evaluate", "fidelity metrics for a synthetic set");
    OptReg evreg;
    evreg.add_str(c_ev, "real", &ev.real, "real CSV");
    evreg.add_str(c_ev, "synth", &ev.synth, "synthetic CSV");
    evreg.add_int(c_ev, "pairs", &ev.pairs, "coherence pair draws");
    evreg.add_flag(c_ev, "classifier", &ev.classifier, "also train-on-synth / test-on-real F1");
    evreg.add_str(c_ev, "project", &ev.project, "also write a 2-D PCA projection CSV (filename)");
    evreg.add_int(c_ev, "csv-channels", &ev.csv_channels, "channels per CSV row");

    AugmentArgs aug;
    CLI::App* c_aug = app.add_subcommand("augment", "balance classes with synthetic rows");
    OptReg augreg;
    augreg.add_str(c_aug, "ckpt", &aug.ckpt, "label-conditional checkpoint");
    augreg.add_str(c_aug, "data", &aug.data, "labeled CSV to balance");
    augreg.add_int(c_aug, "target", &aug.target, "rows per class (0: current majority)");
    augreg.add_f(c_aug, "guidance", &aug.guidance, "guidance weight for sampling");
    augreg.add_int(c_aug, "csv-channels", &aug.csv_channels, "channels per CSV row");

    for (CLI::App* sc : {c_sim, c_tr, c_gen, c_rst, c_ev, c_aug}) sc->fallthrough();

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kUsage;
    }

    CLI::App* active = app.get_subcommands().front();
    const std::string command = active->get_name();
    OptReg* local = nullptr;
    if (command == "simulate") local = &sreg;
    if (command == "train") local = &treg;
    if (command == "generate") local = &genreg;
    if (command == "restore") local = &rreg;
    if (command == "evaluate") local = &evreg;
    if (command == "augment") local = &augreg;

    try {
        if (config_opt->count() > 0) apply_config(g.config, command, &greg, local);
        std::error_code ec;
        fs::create_directories(g.out, ec);
        if (ec) throw IoError("cannot create output directory '" + g.out + "': " + ec.message());

        if (command == "simulate") return cmd_simulate(g, sim, greg, sreg);
        if (command == "train") return cmd_train(g, tr, greg, treg);
        if (command == "generate") return cmd_generate(g, gen, greg, genreg);
        if (command == "restore") return cmd_restore(g, rst, greg, rreg);
        if (command == "evaluate") return cmd_evaluate(g, ev, greg, evreg);
        return cmd_augment(g, aug, greg, augreg);
    } catch (const UsageError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kUsage;
    } catch (const TrainingDiverged& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kNumeric;
    } catch (const ParseError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kUsage;
    } catch (const EmptyDataset& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kUsage;
    } catch (const CorruptCheckpoint& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kIo;
    } catch (const UnsupportedVersion& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kIo;
    } catch (const IoError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kIo;
    } catch (const std::invalid_argument& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kUsage;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kIo;
    }
}
