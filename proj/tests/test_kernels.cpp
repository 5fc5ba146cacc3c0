#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <omp.h>

#include <cmath>
#include <functional>
#include <vector>

#include "biodiff/kernels.hpp"
#include "biodiff/rng.hpp"
#include "doctest.h"

using namespace biodiff;
using namespace biodiff::kernels;

static std::vector<double> randn(Rng& rng, size_t n) {
    std::vector<double> v(n);
    for (auto& e : v) e = rng.gaussian();
    return v;
}

TEST_CASE("conv1d hand example") {
    std::vector<double> x = {1, 2, 3, 4};
    std::vector<double> w = {1, 0, -1};
    std::vector<double> b = {0.5};
    Conv1dDims d{1, 4, 1, 3, 1, 1};
    REQUIRE(d.lout() == 4);
    std::vector<double> y(4);
    serial::conv1d_forward(x.data(), w.data(), b.data(), y.data(), d);
    CHECK(y[0] == -1.5);
    CHECK(y[1] == -1.5);
    CHECK(y[2] == -1.5);
    CHECK(y[3] == 3.5);

    Conv1dDims ds{1, 4, 1, 3, 2, 1};
    REQUIRE(ds.lout() == 2);
    std::vector<double> ys(2);
    serial::conv1d_forward(x.data(), w.data(), nullptr, ys.data(), ds);
    CHECK(ys[0] == -2.0);
    CHECK(ys[1] == -2.0);
}

TEST_CASE("maxpool and upsample behavior") {
    std::vector<double> x = {3, 1, 4, 1, 5, 9, 2, 6};
    std::vector<double> y(4);
    std::vector<int> am(4);
    serial::maxpool2_forward(x.data(), y.data(), am.data(), 1, 8);
    CHECK(y == std::vector<double>{3, 4, 9, 6});
    CHECK(am == std::vector<int>{0, 2, 5, 7});
    std::vector<double> gy = {1, 10, 100, 1000};
    std::vector<double> gx(8);
    serial::maxpool2_backward(gy.data(), am.data(), gx.data(), 1, 8);
    CHECK(gx == std::vector<double>{1, 0, 10, 0, 0, 100, 0, 1000});

    std::vector<double> up(16);
    serial::upsample2_forward(x.data(), up.data(), 2, 4);  // treat as 2ch x 4
    CHECK(up[0] == 3);
    CHECK(up[1] == 3);
    CHECK(up[6] == 1);
    CHECK(up[7] == 1);
    CHECK(up[8] == 5);
    CHECK(up[9] == 5);
    std::vector<double> gup(16, 1.0);
    std::vector<double> gdown(8);
    serial::upsample2_backward(gup.data(), gdown.data(), 2, 4);
    for (double g : gdown) CHECK(g == 2.0);
}

TEST_CASE("attention hand example") {
    // H=1 dh=1 L=2: scores q_i*k_j, softmax rows, y = attn @ v
    std::vector<double> q = {1.0, 0.0}, k = {2.0, -1.0}, v = {0.5, -0.5};
    std::vector<double> y(2), attn(4);
    serial::attention_forward(q.data(), k.data(), v.data(), y.data(), attn.data(), 1, 1, 2);
    const double e2 = std::exp(2.0), em1 = std::exp(-1.0);
    const double a00 = e2 / (e2 + em1), a01 = em1 / (e2 + em1);
    CHECK(attn[0] == doctest::Approx(a00).epsilon(1e-14));
    CHECK(attn[1] == doctest::Approx(a01).epsilon(1e-14));
    CHECK(attn[2] == doctest::Approx(0.5).epsilon(1e-14));  // q2 = 0: uniform
    CHECK(attn[3] == doctest::Approx(0.5).epsilon(1e-14));
    CHECK(y[0] == doctest::Approx(a00 * 0.5 - a01 * 0.5).epsilon(1e-14));
    CHECK(y[1] == doctest::Approx(0.0).epsilon(1e-14));
    // rows sum to 1
    CHECK(attn[0] + attn[1] == doctest::Approx(1.0).epsilon(1e-14));
}

TEST_CASE("groupnorm normalizes per group") {
    Rng rng(42);
    const int C = 8, L = 16, G = 4;
    auto x = randn(rng, C * L);
    std::vector<double> gamma(C, 1.0), beta(C, 0.0), y(C * L), mean(G), rstd(G);
    serial::groupnorm_forward(x.data(), gamma.data(), beta.data(), y.data(), mean.data(),
                              rstd.data(), C, L, G, 1e-5);
    const int cpg = C / G;
    for (int g = 0; g < G; ++g) {
        double mu = 0, var = 0;
        for (int i = 0; i < cpg * L; ++i) mu += y[g * cpg * L + i];
        mu /= cpg * L;
        for (int i = 0; i < cpg * L; ++i) {
            double dlt = y[g * cpg * L + i] - mu;
            var += dlt * dlt;
        }
        var /= cpg * L;
        CHECK(std::abs(mu) < 1e-12);
        CHECK(var == doctest::Approx(1.0).epsilon(1e-4));  // eps shrinks it slightly
    }
}

TEST_CASE("conv1d gradients vs finite differences") {
    Rng rng(7);
    Conv1dDims d{3, 10, 4, 3, 2, 1};
    const int lout = d.lout();
    auto x = randn(rng, d.cin * d.lin);
    auto w = randn(rng, (size_t)d.cout * d.cin * d.k);
    auto b = randn(rng, d.cout);
    auto r = randn(rng, (size_t)d.cout * lout);

    auto loss = [&](const std::vector<double>& xx, const std::vector<double>& ww,
                    const std::vector<double>& bb) {
        std::vector<double> y((size_t)d.cout * lout);
        serial::conv1d_forward(xx.data(), ww.data(), bb.data(), y.data(), d);
        double s = 0;
        for (size_t i = 0; i < y.size(); ++i) s += y[i] * r[i];
        return s;
    };

    std::vector<double> gx(x.size()), gw(w.size(), 0.0), gb(b.size(), 0.0);
    serial::conv1d_backward_data(r.data(), w.data(), gx.data(), d);
    serial::conv1d_backward_weights(r.data(), x.data(), gw.data(), gb.data(), d);

    const double h = 1e-6;
    for (int p = 0; p < 20; ++p) {
        size_t i = rng.uniform_int((int)x.size());
        auto xp = x, xm = x;
        xp[i] += h;
        xm[i] -= h;
        double num = (loss(xp, w, b) - loss(xm, w, b)) / (2 * h);
        CHECK(std::abs(num - gx[i]) < 1e-6 * std::max(1.0, std::abs(num)));
    }
    for (int p = 0; p < 20; ++p) {
        size_t i = rng.uniform_int((int)w.size());
        auto wp = w, wm = w;
        wp[i] += h;
        wm[i] -= h;
        double num = (loss(x, wp, b) - loss(x, wm, b)) / (2 * h);
        CHECK(std::abs(num - gw[i]) < 1e-6 * std::max(1.0, std::abs(num)));
    }
    for (size_t i = 0; i < b.size(); ++i) {
        auto bp = b, bm = b;
        bp[i] += h;
        bm[i] -= h;
        double num = (loss(x, w, bp) - loss(x, w, bm)) / (2 * h);
        CHECK(std::abs(num - gb[i]) < 1e-6 * std::max(1.0, std::abs(num)));
    }
}

TEST_CASE("groupnorm gradients vs finite differences") {
    Rng rng(8);
    const int C = 6, L = 7, G = 3;
    auto x = randn(rng, C * L);
    std::vector<double> gamma = randn(rng, C), beta = randn(rng, C);
    auto r = randn(rng, C * L);

    auto loss = [&](const std::vector<double>& xx, const std::vector<double>& gg,
                    const std::vector<double>& bb) {
        std::vector<double> y(C * L), mean(G), rstd(G);
        serial::groupnorm_forward(xx.data(), gg.data(), bb.data(), y.data(), mean.data(),
                                  rstd.data(), C, L, G, 1e-5);
        double s = 0;
        for (int i = 0; i < C * L; ++i) s += y[i] * r[i];
        return s;
    };

    std::vector<double> y(C * L), mean(G), rstd(G);
    serial::groupnorm_forward(x.data(), gamma.data(), beta.data(), y.data(), mean.data(),
                              rstd.data(), C, L, G, 1e-5);
    std::vector<double> gx(C * L), ggam(C, 0.0), gbet(C, 0.0);
    serial::groupnorm_backward(r.data(), x.data(), gamma.data(), mean.data(), rstd.data(),
                               gx.data(), ggam.data(), gbet.data(), C, L, G);

    const double h = 1e-6;
    for (int p = 0; p < 30; ++p) {
        size_t i = rng.uniform_int(C * L);
        auto xp = x, xm = x;
        xp[i] += h;
        xm[i] -= h;
        double num = (loss(xp, gamma, beta) - loss(xm, gamma, beta)) / (2 * h);
        CHECK(std::abs(num - gx[i]) < 2e-5 * std::max(1.0, std::abs(num)));
    }
    for (int c = 0; c < C; ++c) {
        auto gp = gamma, gm = gamma;
        gp[c] += h;
        gm[c] -= h;
        double num = (loss(x, gp, beta) - loss(x, gm, beta)) / (2 * h);
        CHECK(std::abs(num - ggam[c]) < 1e-5 * std::max(1.0, std::abs(num)));
        auto bp = beta, bm = beta;
        bp[c] += h;
        bm[c] -= h;
        num = (loss(x, gamma, bp) - loss(x, gamma, bm)) / (2 * h);
        CHECK(std::abs(num - gbet[c]) < 1e-5 * std::max(1.0, std::abs(num)));
    }
}

TEST_CASE("silu linear attention gradients vs finite differences") {
    Rng rng(9);
    // silu
    {
        auto x = randn(rng, 32);
        auto r = randn(rng, 32);
        std::vector<double> gx(32);
        serial::silu_backward(r.data(), x.data(), gx.data(), 32);
        const double h = 1e-6;
        for (int i = 0; i < 32; ++i) {
            auto f = [&](double xv) {
                double y;
                serial::silu_forward(&xv, &y, 1);
                return y * r[i];
            };
            double num = (f(x[i] + h) - f(x[i] - h)) / (2 * h);
            CHECK(std::abs(num - gx[i]) < 1e-7 * std::max(1.0, std::abs(num)));
        }
    }
    // linear
    {
        const int nin = 11, nout = 5;
        auto x = randn(rng, nin);
        auto w = randn(rng, (size_t)nin * nout);
        auto b = randn(rng, nout);
        auto r = randn(rng, nout);
        auto loss = [&](const std::vector<double>& xx, const std::vector<double>& ww,
                        const std::vector<double>& bb) {
            std::vector<double> y(nout);
            serial::linear_forward(xx.data(), ww.data(), bb.data(), y.data(), nin, nout);
            double s = 0;
            for (int i = 0; i < nout; ++i) s += y[i] * r[i];
            return s;
        };
        std::vector<double> gx(nin), gw(w.size(), 0.0), gb(nout, 0.0);
        serial::linear_backward(r.data(), x.data(), w.data(), gx.data(), gw.data(), gb.data(),
                                nin, nout);
        const double h = 1e-6;
        for (int i = 0; i < nin; ++i) {
            auto xp = x, xm = x;
            xp[i] += h;
            xm[i] -= h;
            double num = (loss(xp, w, b) - loss(xm, w, b)) / (2 * h);
            CHECK(std::abs(num - gx[i]) < 1e-6 * std::max(1.0, std::abs(num)));
        }
        for (int p = 0; p < 20; ++p) {
            size_t i = rng.uniform_int((int)w.size());
            auto wp = w, wm = w;
            wp[i] += h;
            wm[i] -= h;
            double num = (loss(x, wp, b) - loss(x, wm, b)) / (2 * h);
            CHECK(std::abs(num - gw[i]) < 1e-6 * std::max(1.0, std::abs(num)));
        }
    }
    // attention
    {
        const int H = 2, dh = 3, L = 5;
        const size_t n = (size_t)H * dh * L;
        auto q = randn(rng, n), k = randn(rng, n), v = randn(rng, n);
        auto r = randn(rng, n);
        auto loss = [&](const std::vector<double>& qq, const std::vector<double>& kk,
                        const std::vector<double>& vv) {
            std::vector<double> y(n), attn((size_t)H * L * L);
            serial::attention_forward(qq.data(), kk.data(), vv.data(), y.data(), attn.data(), H,
                                      dh, L);
            double s = 0;
            for (size_t i = 0; i < n; ++i) s += y[i] * r[i];
            return s;
        };
        std::vector<double> y(n), attn((size_t)H * L * L), gq(n), gk(n), gv(n);
        serial::attention_forward(q.data(), k.data(), v.data(), y.data(), attn.data(), H, dh, L);
        serial::attention_backward(r.data(), q.data(), k.data(), v.data(), attn.data(), gq.data(),
                                   gk.data(), gv.data(), H, dh, L);
        const double h = 1e-6;
        for (int p = 0; p < 15; ++p) {
            size_t i = rng.uniform_int((int)n);
            auto qp = q, qm = q;
            qp[i] += h;
            qm[i] -= h;
            double num = (loss(qp, k, v) - loss(qm, k, v)) / (2 * h);
            CHECK(std::abs(num - gq[i]) < 1e-5 * std::max(1.0, std::abs(num)));
            auto kp = k, km = k;
            kp[i] += h;
            km[i] -= h;
            num = (loss(q, kp, v) - loss(q, km, v)) / (2 * h);
            CHECK(std::abs(num - gk[i]) < 1e-5 * std::max(1.0, std::abs(num)));
            auto vp = v, vm = v;
            vp[i] += h;
            vm[i] -= h;
            num = (loss(q, k, vp) - loss(q, k, vm)) / (2 * h);
            CHECK(std::abs(num - gv[i]) < 1e-5 * std::max(1.0, std::abs(num)));
        }
    }
}

TEST_CASE("omp backend is bit-identical to serial at any thread count") {
    Rng rng(1234);
    Conv1dDims d{4, 33, 6, 5, 2, 2};
    const int lout = d.lout();
    auto x = randn(rng, (size_t)d.cin * d.lin);
    auto w = randn(rng, (size_t)d.cout * d.cin * d.k);
    auto b = randn(rng, d.cout);
    auto gy = randn(rng, (size_t)d.cout * lout);

    const int C = 8, L = 32, G = 4;
    auto gx_in = randn(rng, C * L);
    std::vector<double> gamma = randn(rng, C), beta = randn(rng, C);

    const int H = 4, dh = 8, AL = 16;
    const size_t an = (size_t)H * dh * AL;
    auto q = randn(rng, an), kk = randn(rng, an), vv = randn(rng, an), ar = randn(rng, an);

    const int lin_in = 8, lin_out = 16;
    auto wl = randn(rng, (size_t)lin_in * lin_out);
    auto bl = randn(rng, lin_out);

    struct Out {
        std::vector<double> conv_y, conv_gx, conv_gw, conv_gb;
        std::vector<double> gn_y, gn_gx, gn_gg, gn_gb;
        std::vector<double> at_y, at_attn, at_gq, at_gk, at_gv;
        std::vector<double> lin_y;
        bool operator==(const Out&) const = default;
    };

    auto run = [&]() {
        Out o;
        o.conv_y.resize((size_t)d.cout * lout);
        conv1d_forward(x.data(), w.data(), b.data(), o.conv_y.data(), d);
        o.conv_gx.resize(x.size());
        conv1d_backward_data(gy.data(), w.data(), o.conv_gx.data(), d);
        o.conv_gw.assign(w.size(), 0.0);
        o.conv_gb.assign(b.size(), 0.0);
        conv1d_backward_weights(gy.data(), x.data(), o.conv_gw.data(), o.conv_gb.data(), d);

        o.gn_y.resize(C * L);
        std::vector<double> mean(G), rstd(G);
        groupnorm_forward(gx_in.data(), gamma.data(), beta.data(), o.gn_y.data(), mean.data(),
                          rstd.data(), C, L, G, 1e-5);
        o.gn_gx.resize(C * L);
        o.gn_gg.assign(C, 0.0);
        o.gn_gb.assign(C, 0.0);
        groupnorm_backward(o.gn_y.data(), gx_in.data(), gamma.data(), mean.data(), rstd.data(),
                           o.gn_gx.data(), o.gn_gg.data(), o.gn_gb.data(), C, L, G);

        o.at_y.resize(an);
        o.at_attn.resize((size_t)H * AL * AL);
        attention_forward(q.data(), kk.data(), vv.data(), o.at_y.data(), o.at_attn.data(), H, dh,
                          AL);
        o.at_gq.resize(an);
        o.at_gk.resize(an);
        o.at_gv.resize(an);
        attention_backward(ar.data(), q.data(), kk.data(), vv.data(), o.at_attn.data(),
                           o.at_gq.data(), o.at_gk.data(), o.at_gv.data(), H, dh, AL);

        o.lin_y.resize(lin_out);
        linear_forward(x.data(), wl.data(), bl.data(), o.lin_y.data(), lin_in, lin_out);
        return o;
    };

    set_backend(Backend::serial);
    Out ref = run();
    for (int threads : {1, 2, 4}) {
        omp_set_num_threads(threads);
        set_backend(Backend::omp);
        Out got = run();
        CAPTURE(threads);
        CHECK(got == ref);
    }
    set_backend(Backend::omp);
}
