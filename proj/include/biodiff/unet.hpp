#pragma once

#include <optional>
#include <string>
#include <vector>

#include "biodiff/layers.hpp"
#include "biodiff/rng.hpp"
#include "biodiff/tensor.hpp"

namespace biodiff {

struct UNetConfig {
    int in_channels = 1;
    int signal_length = 0;
    int base_channels = 64;
    std::vector<int> channel_mults = {1, 2, 4, 8};
    int res_groups = 8;
    int attn_heads = 4;
    std::optional<int> num_classes;  // enables the label path (+ null token)
    bool signal_cond = false;        // enables the condition-fusion input layer
    double cond_drop_prob = 0.5;
    int time_embed_dim = 0;  // 0 -> 4 * base_channels

    void validate() const;  // throws invalid_argument naming the constraint
    int embed_dim() const { return time_embed_dim > 0 ? time_embed_dim : 4 * base_channels; }
    int depth() const { return (int)channel_mults.size(); }
};

struct Condition {
    std::optional<int> label;
    std::optional<Tensor> cond_signal;
    static Condition none() { return {}; }
    static Condition of_label(int l) {
        Condition c;
        c.label = l;
        return c;
    }
    static Condition of_signal(Tensor s) {
        Condition c;
        c.cond_signal = std::move(s);
        return c;
    }
};

class UNet {
   public:
    UNet() = default;
    UNet(const UNetConfig& cfg, unsigned long long seed);

    // eps prediction; in train mode the label is dropped to the null token
    // with probability cond_drop_prob using drop_rng (required then)
    Tensor predict_eps(const Tensor& x_t, int t, const Condition& cond, Rng* drop_rng = nullptr,
                       bool train_mode = false);
    // backward for the most recent predict_eps (train-mode usage)
    void backward(const Tensor& geps);

    // standalone view of the condition-fusion first layer
    Tensor fuse_signal_condition(const Tensor& x_t, const Tensor& cond_signal);

    std::vector<ParamRef> params();
    void zero_grad();
    long param_count() const;
    const UNetConfig& config() const { return cfg_; }
    long forward_count() const { return forward_count_; }

   private:
    Tensor run_forward(const Tensor& x_in, int t, int token, const Tensor* cond_signal);

    UNetConfig cfg_;
    std::vector<int> chs_;
    int null_token_ = -1;

    Conv1d fuse_;
    Conv1d stem_;
    std::vector<ResBlock> enc_;
    std::vector<AttentionBlock> enc_attn_;
    std::vector<char> has_attn_;
    std::vector<Downsample> down_;
    ResBlock mid1_, mid2_;
    AttentionBlock mid_attn_;
    std::vector<ResBlock> dec_;
    std::vector<AttentionBlock> dec_attn_;
    std::vector<Upsample> up_;
    GroupNorm out_gn_;
    SiLU out_act_;
    Conv1d out_conv_;

    Linear time_lin1_, time_lin2_;
    SiLU time_act_;
    std::vector<double> label_emb_, glabel_emb_;  // (num_classes+1) x embed_dim

    // saved for backward
    std::vector<Tensor> skips_;
    int used_token_ = -1;
    bool fused_ = false;
    long forward_count_ = 0;
};

}  // namespace biodiff
