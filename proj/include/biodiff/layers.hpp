#pragma once

// Trainable layers with cached activations and hand-written backward passes.
// Convention: forward() caches whatever backward() needs; backward() returns
// the input gradient and *accumulates* parameter gradients, so a batch is a
// plain loop of forward/backward pairs between zero_grad() calls.

#include <string>
#include <vector>

#include "biodiff/kernels.hpp"
#include "biodiff/rng.hpp"
#include "biodiff/tensor.hpp"

namespace biodiff {

struct ParamRef {
    std::string name;
    std::vector<double>* w;
    std::vector<double>* g;
};

class Conv1d {
   public:
    Conv1d() = default;
    Conv1d(int cin, int cout, int k, int stride = 1, int pad = 0);
    void init(Rng& rng);
    Tensor forward(const Tensor& x);
    Tensor backward(const Tensor& gy);
    void collect(const std::string& prefix, std::vector<ParamRef>& out);
    int cin() const { return d_.cin; }
    int cout() const { return d_.cout; }

   private:
    kernels::Conv1dDims d_;
    std::vector<double> w_, gw_, b_, gb_;
    Tensor x_;
};

class GroupNorm {
   public:
    GroupNorm() = default;
    GroupNorm(int channels, int groups, double eps = 1e-5);
    void init(Rng& rng);
    Tensor forward(const Tensor& x);
    Tensor backward(const Tensor& gy);
    void collect(const std::string& prefix, std::vector<ParamRef>& out);

   private:
    int c_ = 0, g_ = 0;
    double eps_ = 1e-5;
    std::vector<double> gamma_, ggamma_, beta_, gbeta_;
    Tensor x_;
    std::vector<double> mean_, rstd_;
};

class SiLU {
   public:
    Tensor forward(const Tensor& x);
    Tensor backward(const Tensor& gy);
    std::vector<double> forward(const std::vector<double>& x);
    std::vector<double> backward(const std::vector<double>& gy);

   private:
    std::vector<double> x_;
    int ch_ = 0, len_ = 0;
};

class Linear {
   public:
    Linear() = default;
    Linear(int nin, int nout);
    void init(Rng& rng);
    std::vector<double> forward(const std::vector<double>& x);
    std::vector<double> backward(const std::vector<double>& gy);
    void collect(const std::string& prefix, std::vector<ParamRef>& out);
    int nin() const { return nin_; }
    int nout() const { return nout_; }

   private:
    int nin_ = 0, nout_ = 0;
    std::vector<double> w_, gw_, b_, gb_;
    std::vector<double> x_;
};

// GN -> SiLU -> conv3, + per-channel bias from Linear(silu(emb)),
// GN -> SiLU -> conv3, plus a 1x1 skip when channel counts differ.
class ResBlock {
   public:
    ResBlock() = default;
    ResBlock(int cin, int cout, int groups, int emb_dim);
    void init(Rng& rng);
    Tensor forward(const Tensor& x, const std::vector<double>& emb);
    // gemb accumulates the gradient w.r.t. the shared embedding vector
    Tensor backward(const Tensor& gy, std::vector<double>& gemb);
    void collect(const std::string& prefix, std::vector<ParamRef>& out);

   private:
    int cin_ = 0, cout_ = 0;
    GroupNorm gn1_, gn2_;
    SiLU act1_, act2_, emb_act_;
    Conv1d conv1_, conv2_, skip_;
    Linear emb_lin_;
    bool has_skip_ = false;
    Tensor x_;
};

// Pre-norm multi-head self-attention over the length axis with a residual add.
class AttentionBlock {
   public:
    AttentionBlock() = default;
    AttentionBlock(int channels, int heads, int groups);
    void init(Rng& rng);
    Tensor forward(const Tensor& x);
    Tensor backward(const Tensor& gy);
    void collect(const std::string& prefix, std::vector<ParamRef>& out);

   private:
    int c_ = 0, h_ = 0;
    GroupNorm gn_;
    Conv1d qkv_, proj_;
    Tensor q_, k_, v_;
    std::vector<double> attn_;
};

class Downsample {  // stride-2 conv, halves length
   public:
    Downsample() = default;
    Downsample(int cin, int cout);
    void init(Rng& rng);
    Tensor forward(const Tensor& x);
    Tensor backward(const Tensor& gy);
    void collect(const std::string& prefix, std::vector<ParamRef>& out);

   private:
    Conv1d conv_;
};

class Upsample {  // nearest x2 then conv3
   public:
    Upsample() = default;
    Upsample(int cin, int cout);
    void init(Rng& rng);
    Tensor forward(const Tensor& x);
    Tensor backward(const Tensor& gy);
    void collect(const std::string& prefix, std::vector<ParamRef>& out);

   private:
    Conv1d conv_;
    int lin_ = 0;
};

// sinusoidal features, half sine / half cosine, base period 10000
std::vector<double> time_embedding(int t, int dim);

}  // namespace biodiff
