#include "biodiff/unet.hpp"

#include <cmath>
#include <stdexcept>

namespace biodiff {

void UNetConfig::validate() const {
    auto fail = [](const std::string& msg) { throw std::invalid_argument("unet config: " + msg); };
    if (in_channels < 1) fail("in_channels " + std::to_string(in_channels) + " must be >= 1");
    if (signal_length < 8) fail("signal_length " + std::to_string(signal_length) + " must be >= 8");
    if (base_channels < 1) fail("base_channels must be >= 1");
    if (channel_mults.empty()) fail("channel_mults must be non-empty");
    for (int m : channel_mults)
        if (m < 1) fail("channel_mults entries must be positive");
    if (res_groups < 1) fail("res_groups must be >= 1");
    if (attn_heads < 1) fail("attn_heads must be >= 1");
    const int halvings = depth() - 1;
    const int div = 1 << halvings;
    if (signal_length % div != 0)
        fail("signal_length " + std::to_string(signal_length) + " not divisible by " +
             std::to_string(div) + " (one halving per resolution descent)");
    if (base_channels % res_groups != 0)
        fail("base_channels " + std::to_string(base_channels) + " not divisible by res_groups " +
             std::to_string(res_groups));
    for (int i = 0; i < depth(); ++i) {
        const int c = base_channels * channel_mults[i];
        if (c % attn_heads != 0)
            fail("channels " + std::to_string(c) + " at depth " + std::to_string(i) +
                 " not divisible by attn_heads " + std::to_string(attn_heads));
        if (c % res_groups != 0)
            fail("channels " + std::to_string(c) + " at depth " + std::to_string(i) +
                 " not divisible by res_groups " + std::to_string(res_groups));
    }
    if (num_classes && *num_classes < 1) fail("num_classes must be >= 1 when present");
    if (cond_drop_prob < 0.0 || cond_drop_prob > 1.0) fail("cond_drop_prob outside [0,1]");
    if (embed_dim() % 2 != 0) fail("time_embed_dim must be even");
}

UNet::UNet(const UNetConfig& cfg, unsigned long long seed) : cfg_(cfg) {
    cfg_.validate();
    const int n = cfg_.depth();
    const int ted = cfg_.embed_dim();
    for (int i = 0; i < n; ++i) chs_.push_back(cfg_.base_channels * cfg_.channel_mults[i]);

    if (cfg_.signal_cond) fuse_ = Conv1d(2 * cfg_.in_channels, cfg_.in_channels, 1);
    stem_ = Conv1d(cfg_.in_channels, chs_[0], 3, 1, 1);
    has_attn_.assign(n, 0);
    for (int i = 0; i < n; ++i) has_attn_[i] = (i >= n - 2) ? 1 : 0;

    for (int i = 0; i < n; ++i) {
        const int cin = i == 0 ? chs_[0] : chs_[i - 1];
        enc_.emplace_back(cin, chs_[i], cfg_.res_groups, ted);
        enc_attn_.emplace_back(chs_[i], cfg_.attn_heads, cfg_.res_groups);
        if (i + 1 < n) down_.emplace_back(chs_[i], chs_[i]);
    }
    mid1_ = ResBlock(chs_[n - 1], chs_[n - 1], cfg_.res_groups, ted);
    mid_attn_ = AttentionBlock(chs_[n - 1], cfg_.attn_heads, cfg_.res_groups);
    mid2_ = ResBlock(chs_[n - 1], chs_[n - 1], cfg_.res_groups, ted);
    for (int i = 0; i < n; ++i) {
        dec_.emplace_back(2 * chs_[i], chs_[i], cfg_.res_groups, ted);
        dec_attn_.emplace_back(chs_[i], cfg_.attn_heads, cfg_.res_groups);
        if (i > 0) up_.emplace_back(chs_[i], chs_[i - 1]);
    }
    out_gn_ = GroupNorm(chs_[0], cfg_.res_groups);
    out_conv_ = Conv1d(chs_[0], cfg_.in_channels, 3, 1, 1);

    time_lin1_ = Linear(ted, ted);
    time_lin2_ = Linear(ted, ted);
    if (cfg_.num_classes) {
        null_token_ = *cfg_.num_classes;
        label_emb_.assign((size_t)(*cfg_.num_classes + 1) * ted, 0.0);
        glabel_emb_.assign(label_emb_.size(), 0.0);
    }

    Rng rng = stream_rng(seed, "unet_init");
    if (cfg_.signal_cond) fuse_.init(rng);
    stem_.init(rng);
    for (int i = 0; i < n; ++i) {
        enc_[i].init(rng);
        enc_attn_[i].init(rng);
    }
    for (auto& d : down_) d.init(rng);
    mid1_.init(rng);
    mid_attn_.init(rng);
    mid2_.init(rng);
    for (int i = 0; i < n; ++i) {
        dec_[i].init(rng);
        dec_attn_[i].init(rng);
    }
    for (auto& u : up_) u.init(rng);
    out_gn_.init(rng);
    out_conv_.init(rng);
    time_lin1_.init(rng);
    time_lin2_.init(rng);
    for (auto& e : label_emb_) e = rng.gaussian() * 0.02;
}

Tensor UNet::fuse_signal_condition(const Tensor& x_t, const Tensor& cond_signal) {
    if (!cfg_.signal_cond)
        throw std::invalid_argument("fuse_signal_condition: model built without signal_cond");
    require_same_shape(x_t, cond_signal, "fuse_signal_condition");
    Tensor cat(2 * x_t.ch, x_t.len);
    std::copy(x_t.v.begin(), x_t.v.end(), cat.v.begin());
    std::copy(cond_signal.v.begin(), cond_signal.v.end(), cat.v.begin() + x_t.v.size());
    return fuse_.forward(cat);
}

Tensor UNet::predict_eps(const Tensor& x_t, int t, const Condition& cond, Rng* drop_rng,
                         bool train_mode) {
    if (x_t.ch != cfg_.in_channels || x_t.len != cfg_.signal_length)
        throw std::invalid_argument(
            "predict_eps: input shape (" + std::to_string(x_t.ch) + ", " +
            std::to_string(x_t.len) + ") does not match config (" +
            std::to_string(cfg_.in_channels) + ", " + std::to_string(cfg_.signal_length) + ")");
    if (t < 1) throw std::invalid_argument("predict_eps: timestep must be >= 1");

    int token = null_token_;
    if (cond.label) {
        if (!cfg_.num_classes)
            throw std::invalid_argument("predict_eps: label given to an unconditional model");
        if (*cond.label < 0 || *cond.label >= *cfg_.num_classes)
            throw std::invalid_argument("predict_eps: label " + std::to_string(*cond.label) +
                                        " outside [0, " + std::to_string(*cfg_.num_classes) + ")");
        token = *cond.label;
        if (train_mode && cfg_.cond_drop_prob > 0.0) {
            if (!drop_rng)
                throw std::invalid_argument("predict_eps: train mode needs a dropout rng");
            if (drop_rng->uniform() < cfg_.cond_drop_prob) token = null_token_;
        }
    }

    const Tensor* cs = nullptr;
    if (cfg_.signal_cond) {
        if (!cond.cond_signal)
            throw std::invalid_argument("predict_eps: model expects a condition signal");
        require_same_shape(x_t, *cond.cond_signal, "predict_eps condition");
        cs = &*cond.cond_signal;
    } else if (cond.cond_signal) {
        throw std::invalid_argument("predict_eps: condition signal given to an unfused model");
    }

    ++forward_count_;
    return run_forward(x_t, t, token, cs);
}

Tensor UNet::run_forward(const Tensor& x_in, int t, int token, const Tensor* cond_signal) {
    const int n = cfg_.depth();
    const int ted = cfg_.embed_dim();
    used_token_ = token;
    fused_ = cond_signal != nullptr;

    std::vector<double> emb = time_lin2_.forward(time_act_.forward(
        time_lin1_.forward(time_embedding(t, ted))));
    if (null_token_ >= 0)
        for (int i = 0; i < ted; ++i) emb[i] += label_emb_[(size_t)token * ted + i];

    Tensor h = fused_ ? fuse_signal_condition(x_in, *cond_signal) : x_in;
    h = stem_.forward(h);
    skips_.assign(n, Tensor());
    for (int i = 0; i < n; ++i) {
        if (i > 0) h = down_[i - 1].forward(h);
        h = enc_[i].forward(h, emb);
        if (has_attn_[i]) h = enc_attn_[i].forward(h);
        skips_[i] = h;
    }
    h = mid1_.forward(h, emb);
    h = mid_attn_.forward(h);
    h = mid2_.forward(h, emb);
    for (int i = n - 1; i >= 0; --i) {
        Tensor cat(2 * chs_[i], h.len);
        std::copy(h.v.begin(), h.v.end(), cat.v.begin());
        std::copy(skips_[i].v.begin(), skips_[i].v.end(), cat.v.begin() + h.v.size());
        h = dec_[i].forward(cat, emb);
        if (has_attn_[i]) h = dec_attn_[i].forward(h);
        if (i > 0) h = up_[i - 1].forward(h);
    }
    return out_conv_.forward(out_act_.forward(out_gn_.forward(h)));
}

void UNet::backward(const Tensor& geps) {
    const int n = cfg_.depth();
    const int ted = cfg_.embed_dim();
    std::vector<double> gemb(ted, 0.0);

    Tensor gh = out_gn_.backward(out_act_.backward(out_conv_.backward(geps)));
    std::vector<Tensor> gskip(n);
    for (int i = 0; i <= n - 1; ++i) {
        if (i > 0) gh = up_[i - 1].backward(gh);
        if (has_attn_[i]) gh = dec_attn_[i].backward(gh);
        Tensor gcat = dec_[i].backward(gh, gemb);
        Tensor glow(chs_[i], gcat.len);
        gskip[i] = Tensor(chs_[i], gcat.len);
        std::copy(gcat.v.begin(), gcat.v.begin() + glow.v.size(), glow.v.begin());
        std::copy(gcat.v.begin() + glow.v.size(), gcat.v.end(), gskip[i].v.begin());
        gh = glow;
    }
    gh = mid2_.backward(gh, gemb);
    gh = mid_attn_.backward(gh);
    gh = mid1_.backward(gh, gemb);
    for (int i = n - 1; i >= 0; --i) {
        for (size_t j = 0; j < gh.v.size(); ++j) gh.v[j] += gskip[i].v[j];
        if (has_attn_[i]) gh = enc_attn_[i].backward(gh);
        gh = enc_[i].backward(gh, gemb);
        if (i > 0) gh = down_[i - 1].backward(gh);
    }
    gh = stem_.backward(gh);
    if (fused_) fuse_.backward(gh);

    if (null_token_ >= 0)
        for (int i = 0; i < ted; ++i) glabel_emb_[(size_t)used_token_ * ted + i] += gemb[i];
    time_lin1_.backward(time_act_.backward(time_lin2_.backward(gemb)));
}

std::vector<ParamRef> UNet::params() {
    std::vector<ParamRef> out;
    if (cfg_.signal_cond) fuse_.collect("fuse", out);
    stem_.collect("stem", out);
    for (size_t i = 0; i < enc_.size(); ++i) {
        enc_[i].collect("enc" + std::to_string(i), out);
        if (has_attn_[i]) enc_attn_[i].collect("enc" + std::to_string(i) + ".attn", out);
    }
    for (size_t i = 0; i < down_.size(); ++i) down_[i].collect("down" + std::to_string(i), out);
    mid1_.collect("mid1", out);
    mid_attn_.collect("mid.attn", out);
    mid2_.collect("mid2", out);
    for (size_t i = 0; i < dec_.size(); ++i) {
        dec_[i].collect("dec" + std::to_string(i), out);
        if (has_attn_[i]) dec_attn_[i].collect("dec" + std::to_string(i) + ".attn", out);
    }
    for (size_t i = 0; i < up_.size(); ++i) up_[i].collect("up" + std::to_string(i), out);
    out_gn_.collect("out.gn", out);
    out_conv_.collect("out.conv", out);
    time_lin1_.collect("time.lin1", out);
    time_lin2_.collect("time.lin2", out);
    if (null_token_ >= 0) out.push_back({"label_emb", &label_emb_, &glabel_emb_});
    return out;
}

void UNet::zero_grad() {
    for (auto& p : params())
        for (auto& g : *p.g) g = 0.0;
}

long UNet::param_count() const {
    long n = 0;
    for (auto& p : const_cast<UNet*>(this)->params()) n += (long)p.w->size();
    return n;
}

}  // namespace biodiff
