#include "biodiff/layers.hpp"

#include <cmath>
#include <stdexcept>

namespace biodiff {

using namespace kernels;

// ---- Conv1d ----

Conv1d::Conv1d(int cin, int cout, int k, int stride, int pad) {
    d_ = Conv1dDims{cin, 0, cout, k, stride, pad};
    w_.assign((size_t)cout * cin * k, 0.0);
    gw_.assign(w_.size(), 0.0);
    b_.assign(cout, 0.0);
    gb_.assign(cout, 0.0);
}

void Conv1d::init(Rng& rng) {
    const double s = 1.0 / std::sqrt((double)d_.cin * d_.k);
    for (auto& e : w_) e = rng.gaussian() * s;
    for (auto& e : b_) e = 0.0;
}

Tensor Conv1d::forward(const Tensor& x) {
    if (x.ch != d_.cin) throw std::invalid_argument("conv1d: channel mismatch");
    x_ = x;
    d_.lin = x.len;
    Tensor y(d_.cout, d_.lout());
    conv1d_forward(x.v.data(), w_.data(), b_.data(), y.v.data(), d_);
    return y;
}

Tensor Conv1d::backward(const Tensor& gy) {
    Tensor gx(d_.cin, d_.lin);
    conv1d_backward_data(gy.v.data(), w_.data(), gx.v.data(), d_);
    conv1d_backward_weights(gy.v.data(), x_.v.data(), gw_.data(), gb_.data(), d_);
    return gx;
}

void Conv1d::collect(const std::string& prefix, std::vector<ParamRef>& out) {
    out.push_back({prefix + ".w", &w_, &gw_});
    out.push_back({prefix + ".b", &b_, &gb_});
}

// ---- GroupNorm ----

GroupNorm::GroupNorm(int channels, int groups, double eps) : c_(channels), g_(groups), eps_(eps) {
    if (channels % groups != 0)
        throw std::invalid_argument("groupnorm: channels " + std::to_string(channels) +
                                    " not divisible by groups " + std::to_string(groups));
    gamma_.assign(c_, 1.0);
    ggamma_.assign(c_, 0.0);
    beta_.assign(c_, 0.0);
    gbeta_.assign(c_, 0.0);
}

void GroupNorm::init(Rng&) {
    for (auto& e : gamma_) e = 1.0;
    for (auto& e : beta_) e = 0.0;
}

Tensor GroupNorm::forward(const Tensor& x) {
    if (x.ch != c_) throw std::invalid_argument("groupnorm: channel mismatch");
    x_ = x;
    mean_.assign(g_, 0.0);
    rstd_.assign(g_, 0.0);
    Tensor y(x.ch, x.len);
    groupnorm_forward(x.v.data(), gamma_.data(), beta_.data(), y.v.data(), mean_.data(),
                      rstd_.data(), c_, x.len, g_, eps_);
    return y;
}

Tensor GroupNorm::backward(const Tensor& gy) {
    Tensor gx(x_.ch, x_.len);
    groupnorm_backward(gy.v.data(), x_.v.data(), gamma_.data(), mean_.data(), rstd_.data(),
                       gx.v.data(), ggamma_.data(), gbeta_.data(), c_, x_.len, g_);
    return gx;
}

void GroupNorm::collect(const std::string& prefix, std::vector<ParamRef>& out) {
    out.push_back({prefix + ".gamma", &gamma_, &ggamma_});
    out.push_back({prefix + ".beta", &beta_, &gbeta_});
}

// ---- SiLU ----

Tensor SiLU::forward(const Tensor& x) {
    x_ = x.v;
    ch_ = x.ch;
    len_ = x.len;
    Tensor y(x.ch, x.len);
    silu_forward(x.v.data(), y.v.data(), (int)x.v.size());
    return y;
}

Tensor SiLU::backward(const Tensor& gy) {
    Tensor gx(ch_, len_);
    silu_backward(gy.v.data(), x_.data(), gx.v.data(), (int)x_.size());
    return gx;
}

std::vector<double> SiLU::forward(const std::vector<double>& x) {
    x_ = x;
    std::vector<double> y(x.size());
    silu_forward(x.data(), y.data(), (int)x.size());
    return y;
}

std::vector<double> SiLU::backward(const std::vector<double>& gy) {
    std::vector<double> gx(x_.size());
    silu_backward(gy.data(), x_.data(), gx.data(), (int)x_.size());
    return gx;
}

// ---- Linear ----

Linear::Linear(int nin, int nout) : nin_(nin), nout_(nout) {
    w_.assign((size_t)nin * nout, 0.0);
    gw_.assign(w_.size(), 0.0);
    b_.assign(nout, 0.0);
    gb_.assign(nout, 0.0);
}

void Linear::init(Rng& rng) {
    const double s = 1.0 / std::sqrt((double)nin_);
    for (auto& e : w_) e = rng.gaussian() * s;
    for (auto& e : b_) e = 0.0;
}

std::vector<double> Linear::forward(const std::vector<double>& x) {
    if ((int)x.size() != nin_) throw std::invalid_argument("linear: input size mismatch");
    x_ = x;
    std::vector<double> y(nout_);
    linear_forward(x.data(), w_.data(), b_.data(), y.data(), nin_, nout_);
    return y;
}

std::vector<double> Linear::backward(const std::vector<double>& gy) {
    std::vector<double> gx(nin_);
    linear_backward(gy.data(), x_.data(), w_.data(), gx.data(), gw_.data(), gb_.data(), nin_,
                    nout_);
    return gx;
}

void Linear::collect(const std::string& prefix, std::vector<ParamRef>& out) {
    out.push_back({prefix + ".w", &w_, &gw_});
    out.push_back({prefix + ".b", &b_, &gb_});
}

// ---- ResBlock ----

ResBlock::ResBlock(int cin, int cout, int groups, int emb_dim)
    : cin_(cin),
      cout_(cout),
      gn1_(cin, groups),
      gn2_(cout, groups),
      conv1_(cin, cout, 3, 1, 1),
      conv2_(cout, cout, 3, 1, 1),
      emb_lin_(emb_dim, cout),
      has_skip_(cin != cout) {
    if (has_skip_) skip_ = Conv1d(cin, cout, 1);
}

void ResBlock::init(Rng& rng) {
    gn1_.init(rng);
    gn2_.init(rng);
    conv1_.init(rng);
    conv2_.init(rng);
    emb_lin_.init(rng);
    if (has_skip_) skip_.init(rng);
}

Tensor ResBlock::forward(const Tensor& x, const std::vector<double>& emb) {
    x_ = x;
    Tensor h = conv1_.forward(act1_.forward(gn1_.forward(x)));
    std::vector<double> bias = emb_lin_.forward(emb_act_.forward(emb));
    for (int c = 0; c < cout_; ++c)
        for (int i = 0; i < h.len; ++i) h(c, i) += bias[c];
    Tensor h2 = conv2_.forward(act2_.forward(gn2_.forward(h)));
    Tensor s = has_skip_ ? skip_.forward(x) : x;
    for (size_t i = 0; i < h2.v.size(); ++i) h2.v[i] += s.v[i];
    return h2;
}

Tensor ResBlock::backward(const Tensor& gy, std::vector<double>& gemb) {
    Tensor gh = gn2_.backward(act2_.backward(conv2_.backward(gy)));
    // bias was broadcast over length: its grad is the per-channel sum
    std::vector<double> gbias(cout_, 0.0);
    for (int c = 0; c < cout_; ++c)
        for (int i = 0; i < gh.len; ++i) gbias[c] += gh(c, i);
    std::vector<double> ge = emb_act_.backward(emb_lin_.backward(gbias));
    for (size_t i = 0; i < ge.size(); ++i) gemb[i] += ge[i];
    Tensor gx = gn1_.backward(act1_.backward(conv1_.backward(gh)));
    Tensor gs = has_skip_ ? skip_.backward(gy) : gy;
    for (size_t i = 0; i < gx.v.size(); ++i) gx.v[i] += gs.v[i];
    return gx;
}

void ResBlock::collect(const std::string& prefix, std::vector<ParamRef>& out) {
    gn1_.collect(prefix + ".gn1", out);
    conv1_.collect(prefix + ".conv1", out);
    emb_lin_.collect(prefix + ".emb", out);
    gn2_.collect(prefix + ".gn2", out);
    conv2_.collect(prefix + ".conv2", out);
    if (has_skip_) skip_.collect(prefix + ".skip", out);
}

// ---- AttentionBlock ----

AttentionBlock::AttentionBlock(int channels, int heads, int groups)
    : c_(channels),
      h_(heads),
      gn_(channels, groups),
      qkv_(channels, 3 * channels, 1),
      proj_(channels, channels, 1) {
    if (channels % heads != 0)
        throw std::invalid_argument("attention: channels " + std::to_string(channels) +
                                    " not divisible by heads " + std::to_string(heads));
}

void AttentionBlock::init(Rng& rng) {
    gn_.init(rng);
    qkv_.init(rng);
    proj_.init(rng);
}

Tensor AttentionBlock::forward(const Tensor& x) {
    const int L = x.len, dh = c_ / h_;
    Tensor qkv = qkv_.forward(gn_.forward(x));
    q_ = Tensor(c_, L);
    k_ = Tensor(c_, L);
    v_ = Tensor(c_, L);
    std::copy(qkv.v.begin(), qkv.v.begin() + (size_t)c_ * L, q_.v.begin());
    std::copy(qkv.v.begin() + (size_t)c_ * L, qkv.v.begin() + (size_t)2 * c_ * L, k_.v.begin());
    std::copy(qkv.v.begin() + (size_t)2 * c_ * L, qkv.v.end(), v_.v.begin());
    attn_.assign((size_t)h_ * L * L, 0.0);
    Tensor att(c_, L);
    attention_forward(q_.v.data(), k_.v.data(), v_.v.data(), att.v.data(), attn_.data(), h_, dh,
                      L);
    Tensor y = proj_.forward(att);
    for (size_t i = 0; i < y.v.size(); ++i) y.v[i] += x.v[i];
    return y;
}

Tensor AttentionBlock::backward(const Tensor& gy) {
    const int L = q_.len, dh = c_ / h_;
    Tensor gatt = proj_.backward(gy);
    Tensor gq(c_, L), gk(c_, L), gv(c_, L);
    attention_backward(gatt.v.data(), q_.v.data(), k_.v.data(), v_.v.data(), attn_.data(),
                       gq.v.data(), gk.v.data(), gv.v.data(), h_, dh, L);
    Tensor gqkv(3 * c_, L);
    std::copy(gq.v.begin(), gq.v.end(), gqkv.v.begin());
    std::copy(gk.v.begin(), gk.v.end(), gqkv.v.begin() + (size_t)c_ * L);
    std::copy(gv.v.begin(), gv.v.end(), gqkv.v.begin() + (size_t)2 * c_ * L);
    Tensor gx = gn_.backward(qkv_.backward(gqkv));
    for (size_t i = 0; i < gx.v.size(); ++i) gx.v[i] += gy.v[i];
    return gx;
}

void AttentionBlock::collect(const std::string& prefix, std::vector<ParamRef>& out) {
    gn_.collect(prefix + ".gn", out);
    qkv_.collect(prefix + ".qkv", out);
    proj_.collect(prefix + ".proj", out);
}

// ---- Downsample / Upsample ----

Downsample::Downsample(int cin, int cout) : conv_(cin, cout, 3, 2, 1) {}
void Downsample::init(Rng& rng) { conv_.init(rng); }
Tensor Downsample::forward(const Tensor& x) { return conv_.forward(x); }
Tensor Downsample::backward(const Tensor& gy) { return conv_.backward(gy); }
void Downsample::collect(const std::string& prefix, std::vector<ParamRef>& out) {
    conv_.collect(prefix + ".conv", out);
}

Upsample::Upsample(int cin, int cout) : conv_(cin, cout, 3, 1, 1) {}
void Upsample::init(Rng& rng) { conv_.init(rng); }

Tensor Upsample::forward(const Tensor& x) {
    lin_ = x.len;
    Tensor up(x.ch, 2 * x.len);
    upsample2_forward(x.v.data(), up.v.data(), x.ch, x.len);
    return conv_.forward(up);
}

Tensor Upsample::backward(const Tensor& gy) {
    Tensor gup = conv_.backward(gy);
    Tensor gx(gup.ch, lin_);
    upsample2_backward(gup.v.data(), gx.v.data(), gup.ch, lin_);
    return gx;
}

void Upsample::collect(const std::string& prefix, std::vector<ParamRef>& out) {
    conv_.collect(prefix + ".conv", out);
}

// ---- time embedding ----

std::vector<double> time_embedding(int t, int dim) {
    if (dim % 2 != 0) throw std::invalid_argument("time_embedding: dim must be even");
    if (t < 0) throw std::invalid_argument("time_embedding: t must be >= 0");
    const int half = dim / 2;
    std::vector<double> e(dim);
    for (int i = 0; i < half; ++i) {
        const double freq = std::exp(-std::log(10000.0) * i / std::max(1, half - 1));
        e[i] = std::sin(t * freq);
        e[half + i] = std::cos(t * freq);
    }
    return e;
}

}  // namespace biodiff
