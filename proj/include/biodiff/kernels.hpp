#pragma once

// Compute kernels for the denoiser and metric networks. Every kernel exists
// twice: kernels::serial is the reference, kernels::omp parallelizes over
// independent output elements only, so both produce bit-identical results at
// any thread count. The free functions at namespace scope dispatch on the
// process-wide backend flag.

namespace biodiff::kernels {

struct Conv1dDims {
    int cin = 0, lin = 0, cout = 0, k = 1, stride = 1, pad = 0;
    int lout() const { return (lin + 2 * pad - k) / stride + 1; }
};

enum class Backend { serial, omp };
Backend get_backend();
void set_backend(Backend b);

#define BIODIFF_KERNEL_DECLS                                                                     \
    /* x[cin][lin] w[cout][cin][k] b[cout] y[cout][lout]; y overwritten */                       \
    void conv1d_forward(const double* x, const double* w, const double* b, double* y,            \
                        Conv1dDims d);                                                           \
    /* gx overwritten */                                                                         \
    void conv1d_backward_data(const double* gy, const double* w, double* gx, Conv1dDims d);      \
    /* gw, gb accumulated */                                                                     \
    void conv1d_backward_weights(const double* gy, const double* x, double* gw, double* gb,      \
                                 Conv1dDims d);                                                  \
    /* mean/rstd per group saved for backward; y overwritten */                                  \
    void groupnorm_forward(const double* x, const double* gamma, const double* beta, double* y,  \
                           double* mean, double* rstd, int C, int L, int G, double eps);         \
    /* gx overwritten, ggamma/gbeta accumulated */                                               \
    void groupnorm_backward(const double* gy, const double* x, const double* gamma,              \
                            const double* mean, const double* rstd, double* gx, double* ggamma,  \
                            double* gbeta, int C, int L, int G);                                 \
    void silu_forward(const double* x, double* y, int n);                                        \
    void silu_backward(const double* gy, const double* x, double* gx, int n);                    \
    /* w[nout][nin]; y overwritten */                                                            \
    void linear_forward(const double* x, const double* w, const double* b, double* y, int nin,   \
                        int nout);                                                               \
    /* gx overwritten, gw/gb accumulated */                                                      \
    void linear_backward(const double* gy, const double* x, const double* w, double* gx,         \
                         double* gw, double* gb, int nin, int nout);                             \
    /* q,k,v,y: [H][dh][L]; attn: [H][L][L] saved for backward; y overwritten */                 \
    void attention_forward(const double* q, const double* k, const double* v, double* y,         \
                           double* attn, int H, int dh, int L);                                  \
    /* gq,gk,gv overwritten */                                                                   \
    void attention_backward(const double* gy, const double* q, const double* k, const double* v, \
                            const double* attn, double* gq, double* gk, double* gv, int H,       \
                            int dh, int L);                                                      \
    /* k=2 s=2; y[C][L/2], argmax records winning input index; y overwritten */                  \
    void maxpool2_forward(const double* x, double* y, int* argmax, int C, int L);                \
    /* gx overwritten */                                                                         \
    void maxpool2_backward(const double* gy, const int* argmax, double* gx, int C, int L);       \
    /* nearest-neighbor x2; y[C][2L]; y overwritten */                                           \
    void upsample2_forward(const double* x, double* y, int C, int L);                            \
    /* gx overwritten */                                                                         \
    void upsample2_backward(const double* gy, double* gx, int C, int L);

namespace serial {
BIODIFF_KERNEL_DECLS
}
namespace omp {
BIODIFF_KERNEL_DECLS
}
// dispatch on get_backend()
BIODIFF_KERNEL_DECLS

#undef BIODIFF_KERNEL_DECLS

}  // namespace biodiff::kernels
