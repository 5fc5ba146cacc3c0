#pragma once

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "biodiff/data.hpp"
#include "biodiff/schedule.hpp"
#include "biodiff/signal.hpp"
#include "biodiff/unet.hpp"

namespace biodiff {

enum class TrainRegime { unconditional, label, signal };

TrainRegime regime_from_string(const std::string& name);
std::string to_string(TrainRegime regime);

// Regime defaults: T=1000 cosine for unconditional/label generation,
// T=2000 linear for signal-conditional restoration models.
NoiseSchedule default_schedule(TrainRegime regime);

struct TrainConfig {
    double lr = 3e-4;  // adam
    double adam_beta1 = 0.9;
    double adam_beta2 = 0.999;
    double adam_eps = 1e-8;
    int batch_size = 32;
    int epochs = 100;
    int early_stop_patience = 10;  // epochs tolerated without val improvement
    double val_fraction = 0.1;
    std::optional<double> ema_decay;  // unset = no EMA
    unsigned long long seed = 0;
    bool log_elbo = false;  // estimate variational terms on validation data per epoch

    void validate() const;
};

struct AdamState {
    std::vector<double> m, v;
    long step = 0;
};

struct Checkpoint {
    UNetConfig config;
    ScheduleKind schedule_kind = ScheduleKind::cosine;
    int timesteps = 0;
    TrainRegime regime = TrainRegime::unconditional;
    std::vector<double> weights;      // flattened in UNet::params() order
    std::vector<double> ema_weights;  // empty when EMA was off
    AdamState opt;
    long epochs_completed = 0;
    double best_val_loss = 0.0;
    unsigned long long seed = 0;
    std::string provenance;  // human-readable history, one line per stage
};

struct GuidanceConfig {
    double weight = 0.0;  // w >= 0; 0 = pure conditional prediction
};

struct EpochStats {
    int epoch = 0;  // 0-based
    double train_loss = 0.0;
    double val_loss = 0.0;
    double val_elbo = 0.0;  // filled only when TrainConfig::log_elbo
};

using EpochCallback = std::function<void(const EpochStats&)>;

// ---- checkpoint file I/O ------------------------------------------------------

// Binary container: magic "BDIF", u32 format version, then named typed entries.
// Fixed little-endian byte order.
void save_checkpoint(const std::string& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::string& path);

// Instantiate the network a checkpoint describes.  prefer_ema picks the EMA
// weights when the checkpoint has them (sampling); raw weights train on.
UNet model_from_checkpoint(const Checkpoint& ckpt, bool prefer_ema = true);

std::vector<double> flatten_params(UNet& model);
void load_params(UNet& model, const std::vector<double>& flat);

// ---- training -----------------------------------------------------------------

// Optimizes the model in place; returns the best-validation-loss snapshot.
// regime=label requires every sample labelled; regime=signal requires a
// corruptor and synthesizes (clean, degraded) pairs freshly each epoch.
Checkpoint train(UNet* model, const Dataset& data, TrainRegime regime,
                 const std::optional<CorruptionSpec>& corruptor, const TrainConfig& tcfg,
                 const NoiseSchedule& sched, const EpochCallback& on_epoch = nullptr);

// Fine-tuning defaults: identical to TrainConfig but with lr reduced to 1e-4.
TrainConfig fine_tune_defaults();

// Continues training from ckpt on subject data only; the input checkpoint is
// left untouched.  tcfg.epochs == 0 returns a weight-identical copy.
Checkpoint fine_tune(const Checkpoint& ckpt, const Dataset& subject_signals,
                     const TrainConfig& tcfg = fine_tune_defaults(),
                     const std::optional<CorruptionSpec>& corruptor = std::nullopt,
                     const EpochCallback& on_epoch = nullptr);

// ---- sampling -----------------------------------------------------------------

struct SampleOptions {
    double var_interp = 0.0;  // v in the posterior/beta variance interpolation
};

// One full reverse chain on an instantiated model: x_T ~ N(0,I), T steps of
// p_sample_step driven by the (guided) eps prediction, output clipped to
// [-1,1].  Exactly T predict_eps calls when w == 0, 2T when w > 0.
Tensor sample_chain(UNet* model, const NoiseSchedule& sched, const Condition& cond, double w,
                    Rng* rng, const SampleOptions& opt = {});

Dataset sample_unconditional(const Checkpoint& ckpt, int n, unsigned long long seed,
                             const SampleOptions& opt = {});

Dataset sample_label_conditional(const Checkpoint& ckpt, int label, int n,
                                 const GuidanceConfig& g, unsigned long long seed,
                                 const SampleOptions& opt = {});

Signal sample_signal_conditional(const Checkpoint& ckpt, const Signal& cond_signal,
                                 unsigned long long seed, const SampleOptions& opt = {});

enum class RestoreTask { denoise, impute, upsample };

RestoreTask restore_task_from_string(const std::string& name);
std::string to_string(RestoreTask task);

// Thin wrapper over sample_signal_conditional; the task is recorded in the
// output provenance.  For upsample, `degraded` is the naive-upsampled
// full-length series, not the short one.
Signal restore(const Checkpoint& ckpt, const Signal& degraded, RestoreTask task,
               unsigned long long seed, const SampleOptions& opt = {});

}  // namespace biodiff
