// OpenMP twins of kernels_serial.cpp. Each pragma sits on a loop over outputs
// no other iteration writes, so results are bit-identical to the reference at
// any thread count. Reductions stay inside a single iteration on purpose --
// do not replace them with omp reductions, which reorder sums.

#include <cmath>
#include <vector>

#include "biodiff/kernels.hpp"

namespace biodiff::kernels::omp {

void conv1d_forward(const double* x, const double* w, const double* b, double* y, Conv1dDims d) {
    const int lout = d.lout();
#pragma omp parallel for collapse(2) schedule(static)
    for (int co = 0; co < d.cout; ++co) {
        for (int o = 0; o < lout; ++o) {
            double acc = b ? b[co] : 0.0;
            const int start = o * d.stride - d.pad;
            for (int ci = 0; ci < d.cin; ++ci) {
                const double* xr = x + ci * d.lin;
                const double* wr = w + (co * d.cin + ci) * d.k;
                for (int t = 0; t < d.k; ++t) {
                    const int p = start + t;
                    if (p >= 0 && p < d.lin) acc += wr[t] * xr[p];
                }
            }
            y[co * lout + o] = acc;
        }
    }
}

void conv1d_backward_data(const double* gy, const double* w, double* gx, Conv1dDims d) {
    const int lout = d.lout();
#pragma omp parallel for collapse(2) schedule(static)
    for (int ci = 0; ci < d.cin; ++ci) {
        for (int p = 0; p < d.lin; ++p) {
            double acc = 0.0;
            for (int co = 0; co < d.cout; ++co) {
                const double* gr = gy + co * lout;
                const double* wr = w + (co * d.cin + ci) * d.k;
                for (int t = 0; t < d.k; ++t) {
                    const int num = p + d.pad - t;
                    if (num < 0 || num % d.stride != 0) continue;
                    const int o = num / d.stride;
                    if (o >= 0 && o < lout) acc += wr[t] * gr[o];
                }
            }
            gx[ci * d.lin + p] = acc;
        }
    }
}

void conv1d_backward_weights(const double* gy, const double* x, double* gw, double* gb,
                             Conv1dDims d) {
    const int lout = d.lout();
#pragma omp parallel for collapse(3) schedule(static)
    for (int co = 0; co < d.cout; ++co) {
        for (int ci = 0; ci < d.cin; ++ci) {
            for (int t = 0; t < d.k; ++t) {
                double acc = 0.0;
                const double* gr = gy + co * lout;
                const double* xr = x + ci * d.lin;
                for (int o = 0; o < lout; ++o) {
                    const int p = o * d.stride - d.pad + t;
                    if (p >= 0 && p < d.lin) acc += gr[o] * xr[p];
                }
                gw[(co * d.cin + ci) * d.k + t] += acc;
            }
        }
    }
    if (gb) {
#pragma omp parallel for schedule(static)
        for (int co = 0; co < d.cout; ++co) {
            double acc = 0.0;
            for (int o = 0; o < lout; ++o) acc += gy[co * lout + o];
            gb[co] += acc;
        }
    }
}

void groupnorm_forward(const double* x, const double* gamma, const double* beta, double* y,
                       double* mean, double* rstd, int C, int L, int G, double eps) {
    const int cpg = C / G;
    const int m = cpg * L;
#pragma omp parallel for schedule(static)
    for (int g = 0; g < G; ++g) {
        const double* xg = x + g * cpg * L;
        double mu = 0.0;
        for (int i = 0; i < m; ++i) mu += xg[i];
        mu /= m;
        double var = 0.0;
        for (int i = 0; i < m; ++i) {
            const double dlt = xg[i] - mu;
            var += dlt * dlt;
        }
        var /= m;
        const double rs = 1.0 / std::sqrt(var + eps);
        mean[g] = mu;
        rstd[g] = rs;
        for (int c = g * cpg; c < (g + 1) * cpg; ++c) {
            for (int i = 0; i < L; ++i) {
                const double xhat = (x[c * L + i] - mu) * rs;
                y[c * L + i] = gamma[c] * xhat + beta[c];
            }
        }
    }
}

void groupnorm_backward(const double* gy, const double* x, const double* gamma,
                        const double* mean, const double* rstd, double* gx, double* ggamma,
                        double* gbeta, int C, int L, int G) {
    const int cpg = C / G;
    const int m = cpg * L;
#pragma omp parallel for schedule(static)
    for (int g = 0; g < G; ++g) {
        const double mu = mean[g], rs = rstd[g];
        double sum1 = 0.0, sum2 = 0.0;
        for (int c = g * cpg; c < (g + 1) * cpg; ++c) {
            for (int i = 0; i < L; ++i) {
                const double xhat = (x[c * L + i] - mu) * rs;
                const double gxh = gy[c * L + i] * gamma[c];
                sum1 += gxh;
                sum2 += gxh * xhat;
            }
        }
        for (int c = g * cpg; c < (g + 1) * cpg; ++c) {
            for (int i = 0; i < L; ++i) {
                const double xhat = (x[c * L + i] - mu) * rs;
                const double gxh = gy[c * L + i] * gamma[c];
                gx[c * L + i] = rs * (gxh - (sum1 + xhat * sum2) / m);
            }
        }
    }
#pragma omp parallel for schedule(static)
    for (int c = 0; c < C; ++c) {
        const int g = c / cpg;
        double sg = 0.0, sb = 0.0;
        for (int i = 0; i < L; ++i) {
            const double xhat = (x[c * L + i] - mean[g]) * rstd[g];
            sg += gy[c * L + i] * xhat;
            sb += gy[c * L + i];
        }
        ggamma[c] += sg;
        gbeta[c] += sb;
    }
}

void silu_forward(const double* x, double* y, int n) {
#pragma omp parallel for schedule(static)
    for (int i = 0; i < n; ++i) {
        const double s = 1.0 / (1.0 + std::exp(-x[i]));
        y[i] = x[i] * s;
    }
}

void silu_backward(const double* gy, const double* x, double* gx, int n) {
#pragma omp parallel for schedule(static)
    for (int i = 0; i < n; ++i) {
        const double s = 1.0 / (1.0 + std::exp(-x[i]));
        gx[i] = gy[i] * (s + x[i] * s * (1.0 - s));
    }
}

void linear_forward(const double* x, const double* w, const double* b, double* y, int nin,
                    int nout) {
#pragma omp parallel for schedule(static)
    for (int o = 0; o < nout; ++o) {
        double acc = b ? b[o] : 0.0;
        const double* wr = w + o * nin;
        for (int i = 0; i < nin; ++i) acc += wr[i] * x[i];
        y[o] = acc;
    }
}

void linear_backward(const double* gy, const double* x, const double* w, double* gx, double* gw,
                     double* gb, int nin, int nout) {
    if (gx) {
#pragma omp parallel for schedule(static)
        for (int i = 0; i < nin; ++i) {
            double acc = 0.0;
            for (int o = 0; o < nout; ++o) acc += gy[o] * w[o * nin + i];
            gx[i] = acc;
        }
    }
#pragma omp parallel for schedule(static)
    for (int o = 0; o < nout; ++o) {
        const double g = gy[o];
        double* gwr = gw + o * nin;
        for (int i = 0; i < nin; ++i) gwr[i] += g * x[i];
        if (gb) gb[o] += g;
    }
}

void attention_forward(const double* q, const double* k, const double* v, double* y, double* attn,
                       int H, int dh, int L) {
    const double scale = 1.0 / std::sqrt((double)dh);
#pragma omp parallel for collapse(2) schedule(static)
    for (int h = 0; h < H; ++h) {
        for (int i = 0; i < L; ++i) {
            const double* qh = q + h * dh * L;
            const double* kh = k + h * dh * L;
            double* row = attn + (size_t)h * L * L + (size_t)i * L;
            double mx = -1e300;
            for (int j = 0; j < L; ++j) {
                double s = 0.0;
                for (int dd = 0; dd < dh; ++dd) s += qh[dd * L + i] * kh[dd * L + j];
                s *= scale;
                row[j] = s;
                if (s > mx) mx = s;
            }
            double z = 0.0;
            for (int j = 0; j < L; ++j) {
                row[j] = std::exp(row[j] - mx);
                z += row[j];
            }
            for (int j = 0; j < L; ++j) row[j] /= z;
        }
    }
#pragma omp parallel for collapse(2) schedule(static)
    for (int h = 0; h < H; ++h) {
        for (int dd = 0; dd < dh; ++dd) {
            const double* vh = v + h * dh * L;
            const double* ah = attn + (size_t)h * L * L;
            for (int i = 0; i < L; ++i) {
                double acc = 0.0;
                for (int j = 0; j < L; ++j) acc += ah[i * L + j] * vh[dd * L + j];
                y[(h * dh + dd) * L + i] = acc;
            }
        }
    }
}

void attention_backward(const double* gy, const double* q, const double* k, const double* v,
                        const double* attn, double* gq, double* gk, double* gv, int H, int dh,
                        int L) {
    const double scale = 1.0 / std::sqrt((double)dh);
    std::vector<double> gs((size_t)H * L * L);
#pragma omp parallel for collapse(2) schedule(static)
    for (int h = 0; h < H; ++h) {
        for (int i = 0; i < L; ++i) {
            const double* ah = attn + (size_t)h * L * L;
            const double* gyh = gy + h * dh * L;
            const double* vh = v + h * dh * L;
            double* gsh = gs.data() + (size_t)h * L * L;
            double dot = 0.0;
            for (int j = 0; j < L; ++j) {
                double ga = 0.0;
                for (int dd = 0; dd < dh; ++dd) ga += gyh[dd * L + i] * vh[dd * L + j];
                gsh[i * L + j] = ga;
                dot += ah[i * L + j] * ga;
            }
            for (int j = 0; j < L; ++j) gsh[i * L + j] = ah[i * L + j] * (gsh[i * L + j] - dot);
        }
    }
#pragma omp parallel for collapse(2) schedule(static)
    for (int h = 0; h < H; ++h) {
        for (int dd = 0; dd < dh; ++dd) {
            const double* ah = attn + (size_t)h * L * L;
            const double* gyh = gy + h * dh * L;
            const double* gsh = gs.data() + (size_t)h * L * L;
            const double* qh = q + h * dh * L;
            const double* kh = k + h * dh * L;
            for (int j = 0; j < L; ++j) {
                double acc = 0.0;
                for (int i = 0; i < L; ++i) acc += ah[i * L + j] * gyh[dd * L + i];
                gv[(h * dh + dd) * L + j] = acc;
            }
            for (int i = 0; i < L; ++i) {
                double acc = 0.0;
                for (int j = 0; j < L; ++j) acc += gsh[i * L + j] * kh[dd * L + j];
                gq[(h * dh + dd) * L + i] = acc * scale;
            }
            for (int j = 0; j < L; ++j) {
                double acc = 0.0;
                for (int i = 0; i < L; ++i) acc += gsh[i * L + j] * qh[dd * L + i];
                gk[(h * dh + dd) * L + j] = acc * scale;
            }
        }
    }
}

void maxpool2_forward(const double* x, double* y, int* argmax, int C, int L) {
    const int lo = L / 2;
#pragma omp parallel for collapse(2) schedule(static)
    for (int c = 0; c < C; ++c) {
        for (int o = 0; o < lo; ++o) {
            const int p = 2 * o;
            const int best = (p + 1 < L && x[c * L + p + 1] > x[c * L + p]) ? p + 1 : p;
            y[c * lo + o] = x[c * L + best];
            argmax[c * lo + o] = best;
        }
    }
}

void maxpool2_backward(const double* gy, const int* argmax, double* gx, int C, int L) {
    const int lo = L / 2;
#pragma omp parallel for schedule(static)
    for (int c = 0; c < C; ++c) {
        for (int i = 0; i < L; ++i) gx[c * L + i] = 0.0;
        for (int o = 0; o < lo; ++o) gx[c * L + argmax[c * lo + o]] += gy[c * lo + o];
    }
}

void upsample2_forward(const double* x, double* y, int C, int L) {
#pragma omp parallel for collapse(2) schedule(static)
    for (int c = 0; c < C; ++c)
        for (int i = 0; i < L; ++i) {
            y[c * 2 * L + 2 * i] = x[c * L + i];
            y[c * 2 * L + 2 * i + 1] = x[c * L + i];
        }
}

void upsample2_backward(const double* gy, double* gx, int C, int L) {
#pragma omp parallel for collapse(2) schedule(static)
    for (int c = 0; c < C; ++c)
        for (int i = 0; i < L; ++i)
            gx[c * L + i] = gy[c * 2 * L + 2 * i] + gy[c * 2 * L + 2 * i + 1];
}

}  // namespace biodiff::kernels::omp
