#include "biodiff/engine.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

#include "biodiff/diffusion.hpp"
#include "biodiff/errors.hpp"
#include "biodiff/rng.hpp"

namespace biodiff {

TrainRegime regime_from_string(const std::string& name) {
    if (name == "unconditional" || name == "uncond") return TrainRegime::unconditional;
    if (name == "label") return TrainRegime::label;
    if (name == "signal") return TrainRegime::signal;
    throw std::invalid_argument("unknown training regime '" + name + "'");
}

std::string to_string(TrainRegime regime) {
    switch (regime) {
        case TrainRegime::unconditional: return "unconditional";
        case TrainRegime::label: return "label";
        case TrainRegime::signal: return "signal";
    }
    throw std::invalid_argument("unknown training regime");
}

NoiseSchedule default_schedule(TrainRegime regime) {
    if (regime == TrainRegime::signal) return build_schedule(ScheduleKind::linear, 2000);
    return build_schedule(ScheduleKind::cosine, 1000);
}

void TrainConfig::validate() const {
    if (!(lr > 0.0) || !std::isfinite(lr)) throw std::invalid_argument("train config: lr must be > 0");
    if (batch_size < 1) throw std::invalid_argument("train config: batch_size must be >= 1");
    if (epochs < 1) throw std::invalid_argument("train config: epochs must be >= 1");
    if (early_stop_patience < 0)
        throw std::invalid_argument("train config: early_stop_patience must be >= 0");
    if (!(val_fraction > 0.0 && val_fraction < 1.0))
        throw std::invalid_argument("train config: val_fraction must lie in (0,1)");
    if (adam_beta1 < 0.0 || adam_beta1 >= 1.0 || adam_beta2 < 0.0 || adam_beta2 >= 1.0)
        throw std::invalid_argument("train config: adam betas must lie in [0,1)");
    if (!(adam_eps > 0.0)) throw std::invalid_argument("train config: adam_eps must be > 0");
    if (ema_decay && !(*ema_decay > 0.0 && *ema_decay < 1.0))
        throw std::invalid_argument("train config: ema_decay must lie in (0,1)");
}

// ---- parameter plumbing -------------------------------------------------------

std::vector<double> flatten_params(UNet& model) {
    std::vector<double> flat;
    flat.reserve(static_cast<size_t>(model.param_count()));
    for (const ParamRef& p : model.params()) flat.insert(flat.end(), p.w->begin(), p.w->end());
    return flat;
}

void load_params(UNet& model, const std::vector<double>& flat) {
    if (static_cast<long>(flat.size()) != model.param_count())
        throw std::invalid_argument("load_params: got " + std::to_string(flat.size()) +
                                    " weights, model has " + std::to_string(model.param_count()));
    size_t off = 0;
    for (const ParamRef& p : model.params()) {
        std::copy(flat.begin() + off, flat.begin() + off + p.w->size(), p.w->begin());
        off += p.w->size();
    }
}

UNet model_from_checkpoint(const Checkpoint& ckpt, bool prefer_ema) {
    UNet model(ckpt.config, /*seed=*/0);
    const std::vector<double>& w =
        (prefer_ema && !ckpt.ema_weights.empty()) ? ckpt.ema_weights : ckpt.weights;
    if (static_cast<long>(w.size()) != model.param_count())
        throw CorruptCheckpoint("checkpoint carries " + std::to_string(w.size()) +
                                " weights but the config builds " +
                                std::to_string(model.param_count()));
    load_params(model, w);
    return model;
}

// ---- training -----------------------------------------------------------------

namespace {

Tensor gaussian_tensor(int ch, int len, Rng* rng) {
    Tensor t(ch, len);
    for (double& v : t.v) v = rng->gaussian();
    return t;
}

struct ValDraw {
    int t = 1;
    Tensor eps;
    Condition cond;
};

Condition train_condition(const Signal& s, TrainRegime regime,
                          const std::optional<CorruptionSpec>& corruptor, uint64_t corrupt_seed) {
    switch (regime) {
        case TrainRegime::unconditional: return Condition::none();
        case TrainRegime::label: return Condition::of_label(*s.label);
        case TrainRegime::signal: {
            CorruptionSpec cs = *corruptor;
            cs.seed = corrupt_seed;
            return Condition::of_signal(corrupt(s, cs).values);
        }
    }
    return Condition::none();
}

}  // namespace

Checkpoint train(UNet* model, const Dataset& data, TrainRegime regime,
                 const std::optional<CorruptionSpec>& corruptor, const TrainConfig& tcfg,
                 const NoiseSchedule& sched, const EpochCallback& on_epoch) {
    if (!model) throw std::invalid_argument("train: model is null");
    tcfg.validate();
    if (data.empty()) throw std::invalid_argument("train: dataset is empty");

    const UNetConfig& cfg = model->config();
    for (size_t i = 0; i < data.signals.size(); ++i) {
        const Tensor& v = data.signals[i].values;
        if (v.ch != cfg.in_channels || v.len != cfg.signal_length)
            throw std::invalid_argument("train: signal " + std::to_string(i) + " has shape (" +
                                        std::to_string(v.ch) + ", " + std::to_string(v.len) +
                                        "), model expects (" + std::to_string(cfg.in_channels) +
                                        ", " + std::to_string(cfg.signal_length) + ")");
    }
    if (regime == TrainRegime::label) {
        if (!cfg.num_classes)
            throw std::invalid_argument("train: label regime needs a model with num_classes");
        for (size_t i = 0; i < data.signals.size(); ++i) {
            const auto& lab = data.signals[i].label;
            if (!lab)
                throw std::invalid_argument("train: signal " + std::to_string(i) +
                                            " has no label in label regime");
            if (*lab < 0 || *lab >= *cfg.num_classes)
                throw std::invalid_argument("train: signal " + std::to_string(i) + " label " +
                                            std::to_string(*lab) + " outside [0, " +
                                            std::to_string(*cfg.num_classes) + ")");
        }
    }
    if (regime == TrainRegime::signal) {
        if (!corruptor) throw std::invalid_argument("train: signal regime needs a corruptor");
        if (!cfg.signal_cond)
            throw std::invalid_argument("train: signal regime needs a condition-fusing model");
    } else if (cfg.signal_cond) {
        throw std::invalid_argument("train: condition-fusing model requires the signal regime");
    }

    const int T = sched.T;
    const int n = static_cast<int>(data.size());

    // validation split
    std::vector<int> idx(n);
    std::iota(idx.begin(), idx.end(), 0);
    Rng split_rng = stream_rng(tcfg.seed, "split");
    for (int i = n - 1; i > 0; --i)
        std::swap(idx[i], idx[split_rng.uniform_int(static_cast<uint64_t>(i) + 1)]);
    int val_count = static_cast<int>(std::lround(n * tcfg.val_fraction));
    val_count = std::clamp(val_count, n >= 2 ? 1 : 0, n - 1);
    std::vector<int> val_idx(idx.begin(), idx.begin() + val_count);
    std::vector<int> train_idx(idx.begin() + val_count, idx.end());
    if (val_idx.empty()) val_idx = train_idx;  // single-sample data validates on itself

    // frozen validation draws so epoch-to-epoch losses are comparable
    std::vector<ValDraw> val_draws(val_idx.size());
    for (size_t k = 0; k < val_idx.size(); ++k) {
        Rng r = stream_rng(tcfg.seed, "valdraw", k);
        const Signal& s = data.signals[val_idx[k]];
        val_draws[k].t = 1 + static_cast<int>(r.uniform_int(static_cast<uint64_t>(T)));
        val_draws[k].eps = gaussian_tensor(s.channels(), s.length(), &r);
        val_draws[k].cond =
            train_condition(s, regime, corruptor, derive_seed(tcfg.seed, "valcorrupt", k));
    }

    std::vector<ParamRef> params = model->params();
    const long P = model->param_count();
    AdamState opt;
    opt.m.assign(P, 0.0);
    opt.v.assign(P, 0.0);

    std::vector<double> ema;
    if (tcfg.ema_decay) ema = flatten_params(*model);

    double best_val = std::numeric_limits<double>::infinity();
    std::vector<double> best_weights, best_ema;
    AdamState best_opt;
    long best_epoch = 0;
    int bad_epochs = 0;
    long global_step = 0;

    for (int epoch = 0; epoch < tcfg.epochs; ++epoch) {
        Rng erng = stream_rng(tcfg.seed, "epoch", epoch);
        std::vector<int> order = train_idx;
        for (int i = static_cast<int>(order.size()) - 1; i > 0; --i)
            std::swap(order[i], order[erng.uniform_int(static_cast<uint64_t>(i) + 1)]);

        double loss_sum = 0.0;
        int batches = 0;
        for (size_t off = 0; off < order.size(); off += tcfg.batch_size) {
            const size_t bn = std::min<size_t>(tcfg.batch_size, order.size() - off);
            model->zero_grad();
            double batch_loss = 0.0;
            for (size_t b = 0; b < bn; ++b) {
                const Signal& s = data.signals[order[off + b]];
                const int t = 1 + static_cast<int>(erng.uniform_int(static_cast<uint64_t>(T)));
                Tensor eps = gaussian_tensor(s.channels(), s.length(), &erng);
                Condition cond = train_condition(
                    s, regime, corruptor,
                    derive_seed(tcfg.seed, "corrupt",
                                static_cast<uint64_t>(epoch) * 1000003ull + order[off + b]));
                Tensor xt = q_sample(s.values, t, eps, sched);
                Tensor pred = model->predict_eps(xt, t, cond, &erng, /*train_mode=*/true);
                batch_loss += simple_loss(pred, eps);

                Tensor g(pred.ch, pred.len);
                const double scale = 1.0 / (static_cast<double>(pred.v.size()) * bn);
                for (size_t i = 0; i < g.v.size(); ++i) {
                    double d = pred.v[i] - eps.v[i];
                    g.v[i] = d > 0.0 ? scale : (d < 0.0 ? -scale : 0.0);
                }
                model->backward(g);
            }
            batch_loss /= static_cast<double>(bn);
            ++global_step;
            if (!std::isfinite(batch_loss))
                throw TrainingDiverged(global_step, "batch loss is not finite");

            // adam update over the batch-mean gradients
            opt.step += 1;
            const double c1 = 1.0 - std::pow(tcfg.adam_beta1, static_cast<double>(opt.step));
            const double c2 = 1.0 - std::pow(tcfg.adam_beta2, static_cast<double>(opt.step));
            size_t j = 0;
            for (const ParamRef& p : params) {
                for (size_t i = 0; i < p.w->size(); ++i, ++j) {
                    const double g = (*p.g)[i];
                    opt.m[j] = tcfg.adam_beta1 * opt.m[j] + (1.0 - tcfg.adam_beta1) * g;
                    opt.v[j] = tcfg.adam_beta2 * opt.v[j] + (1.0 - tcfg.adam_beta2) * g * g;
                    (*p.w)[i] -= tcfg.lr * (opt.m[j] / c1) / (std::sqrt(opt.v[j] / c2) + tcfg.adam_eps);
                }
            }
            if (tcfg.ema_decay) {
                const double d = *tcfg.ema_decay;
                j = 0;
                for (const ParamRef& p : params)
                    for (size_t i = 0; i < p.w->size(); ++i, ++j)
                        ema[j] = d * ema[j] + (1.0 - d) * (*p.w)[i];
            }
            loss_sum += batch_loss;
            ++batches;
        }

        // validation on the frozen draws (eval mode: no label dropout)
        double val_sum = 0.0;
        for (size_t k = 0; k < val_idx.size(); ++k) {
            const Signal& s = data.signals[val_idx[k]];
            Tensor xt = q_sample(s.values, val_draws[k].t, val_draws[k].eps, sched);
            Tensor pred = model->predict_eps(xt, val_draws[k].t, val_draws[k].cond);
            val_sum += simple_loss(pred, val_draws[k].eps);
        }
        const double val_loss = val_sum / static_cast<double>(val_idx.size());
        if (!std::isfinite(val_loss))
            throw TrainingDiverged(global_step, "validation loss is not finite");

        EpochStats st;
        st.epoch = epoch;
        st.train_loss = batches ? loss_sum / batches : 0.0;
        st.val_loss = val_loss;
        if (tcfg.log_elbo) {
            Rng elbo_rng = stream_rng(tcfg.seed, "elbo", epoch);
            const size_t take = std::min<size_t>(2, val_idx.size());
            double total = 0.0;
            for (size_t k = 0; k < take; ++k) {
                const Signal& s = data.signals[val_idx[k]];
                const Condition& cond = val_draws[k].cond;
                EpsPredictor pred = [&](const Tensor& x_t, int t) {
                    return model->predict_eps(x_t, t, cond);
                };
                total += elbo_terms(s.values, pred, sched, 1, elbo_rng).total();
            }
            st.val_elbo = total / static_cast<double>(take);
        }
        if (on_epoch) on_epoch(st);

        if (val_loss < best_val) {
            best_val = val_loss;
            best_weights = flatten_params(*model);
            best_ema = ema;
            best_opt = opt;
            best_epoch = epoch;
            bad_epochs = 0;
        } else {
            ++bad_epochs;
        }
        if (bad_epochs >= tcfg.early_stop_patience) break;
    }

    Checkpoint out;
    out.config = cfg;
    out.schedule_kind = sched.kind;
    out.timesteps = T;
    out.regime = regime;
    out.weights = std::move(best_weights);
    out.ema_weights = tcfg.ema_decay ? best_ema : std::vector<double>{};
    out.opt = std::move(best_opt);
    out.epochs_completed = best_epoch + 1;
    out.best_val_loss = best_val;
    out.seed = tcfg.seed;
    out.provenance = "train regime=" + to_string(regime) +
                     " best_epoch=" + std::to_string(best_epoch) +
                     " best_val=" + std::to_string(best_val) + "\n";
    return out;
}

TrainConfig fine_tune_defaults() {
    TrainConfig c;
    c.lr = 1e-4;
    return c;
}

Checkpoint fine_tune(const Checkpoint& ckpt, const Dataset& subject_signals,
                     const TrainConfig& tcfg, const std::optional<CorruptionSpec>& corruptor,
                     const EpochCallback& on_epoch) {
    if (subject_signals.empty()) throw std::invalid_argument("fine_tune: dataset is empty");
    if (tcfg.epochs == 0) {
        Checkpoint copy = ckpt;
        copy.provenance += "fine_tune epochs=0\n";
        return copy;
    }
    UNet model = model_from_checkpoint(ckpt, /*prefer_ema=*/false);
    NoiseSchedule sched = build_schedule(ckpt.schedule_kind, ckpt.timesteps);
    Checkpoint out = train(&model, subject_signals, ckpt.regime, corruptor, tcfg, sched, on_epoch);
    out.provenance = ckpt.provenance + "fine_tune epochs=" + std::to_string(tcfg.epochs) +
                     " lr=" + std::to_string(tcfg.lr) + "\n";
    return out;
}

// ---- sampling -----------------------------------------------------------------

Tensor sample_chain(UNet* model, const NoiseSchedule& sched, const Condition& cond, double w,
                    Rng* rng, const SampleOptions& opt) {
    if (!model) throw std::invalid_argument("sample_chain: model is null");
    if (!(w >= 0.0) || !std::isfinite(w))
        throw std::invalid_argument("sample_chain: guidance weight must be finite and >= 0");
    const UNetConfig& cfg = model->config();
    Tensor x = gaussian_tensor(cfg.in_channels, cfg.signal_length, rng);
    const Condition null_cond = Condition::none();
    for (int t = sched.T; t >= 1; --t) {
        Tensor eps = model->predict_eps(x, t, cond);
        if (w > 0.0) {
            Tensor eps_null = model->predict_eps(x, t, null_cond);
            for (size_t i = 0; i < eps.v.size(); ++i)
                eps.v[i] = (1.0 + w) * eps.v[i] - w * eps_null.v[i];
        }
        Tensor z(cfg.in_channels, cfg.signal_length);
        if (t > 1) z = gaussian_tensor(cfg.in_channels, cfg.signal_length, rng);
        x = p_sample_step(x, t, eps, z, sched, opt.var_interp);
    }
    for (double& v : x.v) v = std::clamp(v, -1.0, 1.0);
    return x;
}

Dataset sample_unconditional(const Checkpoint& ckpt, int n, unsigned long long seed,
                             const SampleOptions& opt) {
    if (n < 0) throw std::invalid_argument("sample_unconditional: n must be >= 0");
    if (ckpt.regime != TrainRegime::unconditional)
        throw std::invalid_argument("sample_unconditional: checkpoint was trained in regime '" +
                                    to_string(ckpt.regime) + "'");
    UNet model = model_from_checkpoint(ckpt);
    NoiseSchedule sched = build_schedule(ckpt.schedule_kind, ckpt.timesteps);

    Dataset out;
    out.channels = ckpt.config.in_channels;
    out.length = ckpt.config.signal_length;
    for (int i = 0; i < n; ++i) {
        Rng rng = stream_rng(seed, "sample", static_cast<uint64_t>(i));
        Signal s(sample_chain(&model, sched, Condition::none(), 0.0, &rng, opt));
        s.synthetic = true;
        s.provenance = "sampled:unconditional";
        out.signals.push_back(std::move(s));
    }
    return out;
}

Dataset sample_label_conditional(const Checkpoint& ckpt, int label, int n,
                                 const GuidanceConfig& g, unsigned long long seed,
                                 const SampleOptions& opt) {
    if (n < 0) throw std::invalid_argument("sample_label_conditional: n must be >= 0");
    if (ckpt.regime != TrainRegime::label)
        throw std::invalid_argument("sample_label_conditional: checkpoint was trained in regime '" +
                                    to_string(ckpt.regime) + "'");
    if (!ckpt.config.num_classes || label < 0 || label >= *ckpt.config.num_classes)
        throw std::invalid_argument("sample_label_conditional: label " + std::to_string(label) +
                                    " out of range");
    UNet model = model_from_checkpoint(ckpt);
    NoiseSchedule sched = build_schedule(ckpt.schedule_kind, ckpt.timesteps);

    Dataset out;
    out.channels = ckpt.config.in_channels;
    out.length = ckpt.config.signal_length;
    for (int i = 0; i < n; ++i) {
        Rng rng = stream_rng(seed, "sample", static_cast<uint64_t>(i));
        Signal s(sample_chain(&model, sched, Condition::of_label(label), g.weight, &rng, opt));
        s.label = label;
        s.synthetic = true;
        s.provenance = "sampled:label";
        out.signals.push_back(std::move(s));
    }
    return out;
}

Signal sample_signal_conditional(const Checkpoint& ckpt, const Signal& cond_signal,
                                 unsigned long long seed, const SampleOptions& opt) {
    if (ckpt.regime != TrainRegime::signal)
        throw std::invalid_argument("sample_signal_conditional: checkpoint was trained in regime '" +
                                    to_string(ckpt.regime) + "'");
    if (cond_signal.channels() != ckpt.config.in_channels ||
        cond_signal.length() != ckpt.config.signal_length)
        throw std::invalid_argument("sample_signal_conditional: condition shape (" +
                                    std::to_string(cond_signal.channels()) + ", " +
                                    std::to_string(cond_signal.length()) +
                                    ") does not match the model");
    UNet model = model_from_checkpoint(ckpt);
    NoiseSchedule sched = build_schedule(ckpt.schedule_kind, ckpt.timesteps);
    Rng rng = stream_rng(seed, "sample", 0);
    Signal s(sample_chain(&model, sched, Condition::of_signal(cond_signal.values), 0.0, &rng, opt));
    s.label = cond_signal.label;
    s.subject_id = cond_signal.subject_id;
    s.synthetic = true;
    s.provenance = "sampled:signal";
    return s;
}

RestoreTask restore_task_from_string(const std::string& name) {
    if (name == "denoise") return RestoreTask::denoise;
    if (name == "impute") return RestoreTask::impute;
    if (name == "upsample") return RestoreTask::upsample;
    throw std::invalid_argument("unknown restoration task '" + name + "'");
}

std::string to_string(RestoreTask task) {
    switch (task) {
        case RestoreTask::denoise: return "denoise";
        case RestoreTask::impute: return "impute";
        case RestoreTask::upsample: return "upsample";
    }
    throw std::invalid_argument("unknown restoration task");
}

Signal restore(const Checkpoint& ckpt, const Signal& degraded, RestoreTask task,
               unsigned long long seed, const SampleOptions& opt) {
    Signal out = sample_signal_conditional(ckpt, degraded, seed, opt);
    out.provenance = "restore:" + to_string(task);
    out.norm_range = degraded.norm_range;  // restored values stay in the degraded signal's units
    return out;
}

}  // namespace biodiff
