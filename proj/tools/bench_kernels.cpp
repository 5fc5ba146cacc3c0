// Times every kernel in both backends and checks the results stay
// bit-identical. Run with OMP_NUM_THREADS=N to pick the thread count.
#include <omp.h>

#include <chrono>
#include <cstdio>
#include <cstring>
#include <functional>
#include <vector>

#include "biodiff/kernels.hpp"
#include "biodiff/rng.hpp"

namespace K = biodiff::kernels;

namespace {

std::vector<double> randn(size_t n, biodiff::Rng& rng) {
    std::vector<double> v(n);
    for (double& x : v) x = rng.gaussian();
    return v;
}

double best_ms(const std::function<void()>& fn, int reps = 5) {
    fn();  // warm-up
    double best = 1e300;
    for (int r = 0; r < reps; ++r) {
        auto t0 = std::chrono::steady_clock::now();
        fn();
        auto t1 = std::chrono::steady_clock::now();
        double ms = std::chrono::duration<double, std::milli>(t1 - t0).count();
        if (ms < best) best = ms;
    }
    return best;
}

// run both backends on identical inputs; outs must end up byte-equal
void row(const char* name, const std::function<void()>& fserial, const std::function<void()>& fomp,
         const std::vector<std::vector<double>*>& outs) {
    std::vector<std::vector<double>> kept;
    for (auto* o : outs) std::fill(o->begin(), o->end(), 0.0);
    fserial();
    for (auto* o : outs) kept.push_back(*o);
    for (auto* o : outs) std::fill(o->begin(), o->end(), 0.0);
    fomp();
    bool exact = true;
    for (size_t i = 0; i < outs.size(); ++i)
        if (std::memcmp(outs[i]->data(), kept[i].data(), kept[i].size() * sizeof(double)) != 0)
            exact = false;

    double ts = best_ms(fserial);
    double to = best_ms(fomp);
    std::printf("%-26s %10.3f %10.3f %7.2fx  %s\n", name, ts, to, ts / to,
                exact ? "exact" : "MISMATCH");
}

}  // namespace

int main() {
    biodiff::Rng rng(42);
    std::printf("kernel benchmark, %d thread(s)\n", omp_get_max_threads());
    std::printf("%-26s %10s %10s %8s\n", "kernel", "serial ms", "omp ms", "speedup");

    {
        K::Conv1dDims d{64, 512, 64, 3, 1, 1};
        auto x = randn((size_t)d.cin * d.lin, rng);
        auto w = randn((size_t)d.cout * d.cin * d.k, rng);
        auto b = randn(d.cout, rng);
        auto gy = randn((size_t)d.cout * d.lout(), rng);
        std::vector<double> y(gy.size()), gx(x.size()), gw(w.size()), gb(b.size());
        row("conv1d_forward",
            [&] { K::serial::conv1d_forward(x.data(), w.data(), b.data(), y.data(), d); },
            [&] { K::omp::conv1d_forward(x.data(), w.data(), b.data(), y.data(), d); }, {&y});
        row("conv1d_backward_data",
            [&] { K::serial::conv1d_backward_data(gy.data(), w.data(), gx.data(), d); },
            [&] { K::omp::conv1d_backward_data(gy.data(), w.data(), gx.data(), d); }, {&gx});
        row("conv1d_backward_weights",
            [&] { K::serial::conv1d_backward_weights(gy.data(), x.data(), gw.data(), gb.data(), d); },
            [&] { K::omp::conv1d_backward_weights(gy.data(), x.data(), gw.data(), gb.data(), d); },
            {&gw, &gb});
    }
    {
        const int C = 64, L = 512, G = 8;
        auto x = randn((size_t)C * L, rng);
        auto gamma = randn(C, rng);
        auto beta = randn(C, rng);
        auto gy = randn((size_t)C * L, rng);
        std::vector<double> y(x.size()), mean(G), rstd(G), gx(x.size()), gg(C), gb(C);
        row("groupnorm_forward",
            [&] {
                K::serial::groupnorm_forward(x.data(), gamma.data(), beta.data(), y.data(),
                                             mean.data(), rstd.data(), C, L, G, 1e-5);
            },
            [&] {
                K::omp::groupnorm_forward(x.data(), gamma.data(), beta.data(), y.data(),
                                          mean.data(), rstd.data(), C, L, G, 1e-5);
            },
            {&y, &mean, &rstd});
        K::serial::groupnorm_forward(x.data(), gamma.data(), beta.data(), y.data(), mean.data(),
                                     rstd.data(), C, L, G, 1e-5);
        row("groupnorm_backward",
            [&] {
                K::serial::groupnorm_backward(gy.data(), x.data(), gamma.data(), mean.data(),
                                              rstd.data(), gx.data(), gg.data(), gb.data(), C, L, G);
            },
            [&] {
                K::omp::groupnorm_backward(gy.data(), x.data(), gamma.data(), mean.data(),
                                           rstd.data(), gx.data(), gg.data(), gb.data(), C, L, G);
            },
            {&gx, &gg, &gb});
    }
    {
        const int n = 1 << 20;
        auto x = randn(n, rng);
        auto gy = randn(n, rng);
        std::vector<double> y(n), gx(n);
        row("silu_forward", [&] { K::serial::silu_forward(x.data(), y.data(), n); },
            [&] { K::omp::silu_forward(x.data(), y.data(), n); }, {&y});
        row("silu_backward", [&] { K::serial::silu_backward(gy.data(), x.data(), gx.data(), n); },
            [&] { K::omp::silu_backward(gy.data(), x.data(), gx.data(), n); }, {&gx});
    }
    {
        const int nin = 2048, nout = 2048;
        auto x = randn(nin, rng);
        auto w = randn((size_t)nout * nin, rng);
        auto b = randn(nout, rng);
        auto gy = randn(nout, rng);
        std::vector<double> y(nout), gx(nin), gw(w.size()), gb(nout);
        row("linear_forward",
            [&] { K::serial::linear_forward(x.data(), w.data(), b.data(), y.data(), nin, nout); },
            [&] { K::omp::linear_forward(x.data(), w.data(), b.data(), y.data(), nin, nout); },
            {&y});
        row("linear_backward",
            [&] {
                K::serial::linear_backward(gy.data(), x.data(), w.data(), gx.data(), gw.data(),
                                           gb.data(), nin, nout);
            },
            [&] {
                K::omp::linear_backward(gy.data(), x.data(), w.data(), gx.data(), gw.data(),
                                        gb.data(), nin, nout);
            },
            {&gx, &gw, &gb});
    }
    {
        const int H = 4, dh = 16, L = 256;
        const size_t qn = (size_t)H * dh * L;
        auto q = randn(qn, rng), k = randn(qn, rng), v = randn(qn, rng), gy = randn(qn, rng);
        std::vector<double> y(qn), attn((size_t)H * L * L), gq(qn), gk(qn), gv(qn);
        row("attention_forward",
            [&] {
                K::serial::attention_forward(q.data(), k.data(), v.data(), y.data(), attn.data(),
                                             H, dh, L);
            },
            [&] {
                K::omp::attention_forward(q.data(), k.data(), v.data(), y.data(), attn.data(), H,
                                          dh, L);
            },
            {&y, &attn});
        K::serial::attention_forward(q.data(), k.data(), v.data(), y.data(), attn.data(), H, dh, L);
        row("attention_backward",
            [&] {
                K::serial::attention_backward(gy.data(), q.data(), k.data(), v.data(), attn.data(),
                                              gq.data(), gk.data(), gv.data(), H, dh, L);
            },
            [&] {
                K::omp::attention_backward(gy.data(), q.data(), k.data(), v.data(), attn.data(),
                                           gq.data(), gk.data(), gv.data(), H, dh, L);
            },
            {&gq, &gk, &gv});
    }
    {
        const int C = 64, L = 1 << 16;
        auto x = randn((size_t)C * L, rng);
        auto gyp = randn((size_t)C * (L / 2), rng);
        auto gyu = randn((size_t)C * 2 * L, rng);
        std::vector<double> yp((size_t)C * (L / 2)), gxp((size_t)C * L);
        std::vector<double> yu((size_t)C * 2 * L), gxu((size_t)C * L);
        std::vector<int> argmax((size_t)C * (L / 2));
        row("maxpool2_forward",
            [&] { K::serial::maxpool2_forward(x.data(), yp.data(), argmax.data(), C, L); },
            [&] { K::omp::maxpool2_forward(x.data(), yp.data(), argmax.data(), C, L); }, {&yp});
        row("maxpool2_backward",
            [&] { K::serial::maxpool2_backward(gyp.data(), argmax.data(), gxp.data(), C, L); },
            [&] { K::omp::maxpool2_backward(gyp.data(), argmax.data(), gxp.data(), C, L); },
            {&gxp});
        row("upsample2_forward", [&] { K::serial::upsample2_forward(x.data(), yu.data(), C, L); },
            [&] { K::omp::upsample2_forward(x.data(), yu.data(), C, L); }, {&yu});
        row("upsample2_backward",
            [&] { K::serial::upsample2_backward(gyu.data(), gxu.data(), C, L); },
            [&] { K::omp::upsample2_backward(gyu.data(), gxu.data(), C, L); }, {&gxu});
    }
    return 0;
}
