#pragma once

// Flat Adam over a list of attached parameter/gradient arrays, used by the
// metric networks (the diffusion trainer keeps its own state in checkpoints).

#include <cmath>
#include <cstddef>
#include <vector>

namespace biodiff {

struct FlatAdam {
    std::vector<double*> w;
    std::vector<double*> g;
    std::vector<size_t> n;
    std::vector<double> m, v;
    long long step = 0;

    void attach(std::vector<double>* wv, std::vector<double>* gv) {
        w.push_back(wv->data());
        g.push_back(gv->data());
        n.push_back(wv->size());
    }
    void attach(double* ws, double* gs, size_t count = 1) {
        w.push_back(ws);
        g.push_back(gs);
        n.push_back(count);
    }
    void finalize() {
        size_t total = 0;
        for (size_t k : n) total += k;
        m.assign(total, 0.0);
        v.assign(total, 0.0);
    }
    void update(double lr) {
        ++step;
        const double b1 = 0.9, b2 = 0.999, eps = 1e-8;
        const double c1 = 1.0 - std::pow(b1, (double)step);
        const double c2 = 1.0 - std::pow(b2, (double)step);
        size_t off = 0;
        for (size_t p = 0; p < w.size(); ++p) {
            for (size_t k = 0; k < n[p]; ++k) {
                const double gr = g[p][k];
                m[off] = b1 * m[off] + (1.0 - b1) * gr;
                v[off] = b2 * v[off] + (1.0 - b2) * gr * gr;
                w[p][k] -= lr * (m[off] / c1) / (std::sqrt(v[off] / c2) + eps);
                ++off;
            }
        }
    }
};

}  // namespace biodiff
