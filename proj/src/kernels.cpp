#include "biodiff/kernels.hpp"

namespace biodiff::kernels {

namespace {
Backend g_backend = Backend::omp;
}

Backend get_backend() { return g_backend; }
void set_backend(Backend b) { g_backend = b; }

#define DISPATCH(fn, ...)                       \
    if (g_backend == Backend::serial)           \
        serial::fn(__VA_ARGS__);                \
    else                                        \
        omp::fn(__VA_ARGS__)

void conv1d_forward(const double* x, const double* w, const double* b, double* y, Conv1dDims d) {
    DISPATCH(conv1d_forward, x, w, b, y, d);
}
void conv1d_backward_data(const double* gy, const double* w, double* gx, Conv1dDims d) {
    DISPATCH(conv1d_backward_data, gy, w, gx, d);
}
void conv1d_backward_weights(const double* gy, const double* x, double* gw, double* gb,
                             Conv1dDims d) {
    DISPATCH(conv1d_backward_weights, gy, x, gw, gb, d);
}
void groupnorm_forward(const double* x, const double* gamma, const double* beta, double* y,
                       double* mean, double* rstd, int C, int L, int G, double eps) {
    DISPATCH(groupnorm_forward, x, gamma, beta, y, mean, rstd, C, L, G, eps);
}
void groupnorm_backward(const double* gy, const double* x, const double* gamma, const double* mean,
                        const double* rstd, double* gx, double* ggamma, double* gbeta, int C,
                        int L, int G) {
    DISPATCH(groupnorm_backward, gy, x, gamma, mean, rstd, gx, ggamma, gbeta, C, L, G);
}
void silu_forward(const double* x, double* y, int n) { DISPATCH(silu_forward, x, y, n); }
void silu_backward(const double* gy, const double* x, double* gx, int n) {
    DISPATCH(silu_backward, gy, x, gx, n);
}
void linear_forward(const double* x, const double* w, const double* b, double* y, int nin,
                    int nout) {
    DISPATCH(linear_forward, x, w, b, y, nin, nout);
}
void linear_backward(const double* gy, const double* x, const double* w, double* gx, double* gw,
                     double* gb, int nin, int nout) {
    DISPATCH(linear_backward, gy, x, w, gx, gw, gb, nin, nout);
}
void attention_forward(const double* q, const double* k, const double* v, double* y, double* attn,
                       int H, int dh, int L) {
    DISPATCH(attention_forward, q, k, v, y, attn, H, dh, L);
}
void attention_backward(const double* gy, const double* q, const double* k, const double* v,
                        const double* attn, double* gq, double* gk, double* gv, int H, int dh,
                        int L) {
    DISPATCH(attention_backward, gy, q, k, v, attn, gq, gk, gv, H, dh, L);
}
void maxpool2_forward(const double* x, double* y, int* argmax, int C, int L) {
    DISPATCH(maxpool2_forward, x, y, argmax, C, L);
}
void maxpool2_backward(const double* gy, const int* argmax, double* gx, int C, int L) {
    DISPATCH(maxpool2_backward, gy, argmax, gx, C, L);
}
void upsample2_forward(const double* x, double* y, int C, int L) {
    DISPATCH(upsample2_forward, x, y, C, L);
}
void upsample2_backward(const double* gy, double* gx, int C, int L) {
    DISPATCH(upsample2_backward, gy, gx, C, L);
}

#undef DISPATCH

}  // namespace biodiff::kernels
