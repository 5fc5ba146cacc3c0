#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "biodiff/data.hpp"
#include "biodiff/errors.hpp"
#include "biodiff/eval.hpp"
#include "biodiff/rng.hpp"
#include "doctest.h"

using namespace biodiff;

namespace {

Dataset make_set(std::vector<Signal> sigs) {
    Dataset d;
    d.channels = sigs.front().channels();
    d.length = sigs.front().length();
    d.signals = std::move(sigs);
    return d;
}

Signal const_signal(int len, double value, int label = -1) {
    Signal s(1, len);
    s.values.fill(value);
    if (label >= 0) s.label = label;
    return s;
}

Signal sine_signal(int len, double period, double phase, double noise, Rng* rng, int label = -1) {
    Signal s(1, len);
    for (int i = 0; i < len; ++i)
        s.values(0, i) =
            std::sin(2.0 * M_PI * i / period + phase) + (noise > 0 ? noise * rng->gaussian() : 0.0);
    if (label >= 0) s.label = label;
    return s;
}

Signal noise_signal(int len, Rng* rng, int label = -1) {
    Signal s(1, len);
    for (int i = 0; i < len; ++i) s.values(0, i) = rng->gaussian();
    if (label >= 0) s.label = label;
    return s;
}

}  // namespace

TEST_CASE("default scales span periods 2 to L/2, log spaced") {
    const auto scales = default_scales(256);
    REQUIRE(scales.size() == 32);
    CHECK(scale_to_period(scales.front()) == doctest::Approx(2.0).epsilon(1e-12));
    CHECK(scale_to_period(scales.back()) == doctest::Approx(128.0).epsilon(1e-12));
    for (size_t i = 1; i < scales.size(); ++i) {
        CHECK(scales[i] > scales[i - 1]);
        if (i >= 2)  // constant ratio
            CHECK(scales[i] / scales[i - 1] ==
                  doctest::Approx(scales[1] / scales[0]).epsilon(1e-9));
    }
    CHECK(period_to_scale(scale_to_period(scales[7])) == doctest::Approx(scales[7]).epsilon(1e-12));
    CHECK_THROWS_AS(default_scales(7), std::invalid_argument);
    CHECK(default_scales(64, 5).size() == 5);
}

TEST_CASE("cwt of zeros is zero") {
    std::vector<double> x(64, 0.0);
    const auto scales = default_scales(64);
    const auto W = cwt(x.data(), 64, scales);
    REQUIRE(W.size() == scales.size() * 64);
    for (const auto& c : W) {
        CHECK(c.real() == 0.0);
        CHECK(c.imag() == 0.0);
    }
}

TEST_CASE("cwt peaks at the scale nearest the driving period") {
    const int L = 256;
    const auto scales = default_scales(L);
    for (double period : {8.0, 11.0, 16.0, 23.0, 32.0, 45.0, 64.0}) {  // three octaves
        std::vector<double> x(L);
        for (int i = 0; i < L; ++i) x[i] = std::sin(2.0 * M_PI * i / period);
        const auto W = cwt(x.data(), L, scales);
        // energy per scale over the central half (skip edge effects)
        int best = -1;
        double best_e = -1.0;
        for (size_t s = 0; s < scales.size(); ++s) {
            double e = 0.0;
            for (int t = L / 4; t < 3 * L / 4; ++t) e += std::norm(W[s * L + t]);
            if (e > best_e) {
                best_e = e;
                best = (int)s;
            }
        }
        int expect = 0;
        for (size_t s = 1; s < scales.size(); ++s)
            if (std::fabs(scale_to_period(scales[s]) - period) <
                std::fabs(scale_to_period(scales[expect]) - period))
                expect = (int)s;
        CHECK_MESSAGE(best == expect, "period ", period, ": peak row ", best, " expected ", expect);
    }
}

TEST_CASE("cwt is homogeneous in its input") {
    const int L = 128;
    Rng rng(404);
    std::vector<double> x(L), ax(L);
    const double a = 3.25;
    for (int i = 0; i < L; ++i) {
        x[i] = rng.gaussian();
        ax[i] = a * x[i];
    }
    const auto scales = default_scales(L);
    const auto W = cwt(x.data(), L, scales);
    const auto Wa = cwt(ax.data(), L, scales);
    for (size_t i = 0; i < W.size(); ++i) {
        CHECK(std::abs(Wa[i] - a * W[i]) <= 1e-9);
    }
}

TEST_CASE("cwt input validation") {
    std::vector<double> x(64, 0.0);
    CHECK_THROWS_AS(cwt(x.data(), 64, {}), std::invalid_argument);
    CHECK_THROWS_AS(cwt(x.data(), 4, default_scales(64)), std::invalid_argument);
    CHECK_THROWS_AS(cwt(x.data(), 64, {1.0, -2.0}), std::invalid_argument);
}

TEST_CASE("coherence of a set with itself is exactly 100") {
    SimOptions opt;
    opt.length = 128;
    const Dataset set = gen_simulated(2, 71, opt);
    const double score = wavelet_coherence_score(set, set, 20, 5);
    CHECK(std::fabs(score - 100.0) <= 1e-6);
}

TEST_CASE("coherence separates structure from noise by a wide margin") {
    const int L = 128, n = 10;
    Rng rng(99);
    // common broadband template so every scale row carries shared energy
    std::vector<double> base(L, 0.0);
    for (double period : {4.0, 8.0, 16.0, 32.0, 64.0})
        for (int i = 0; i < L; ++i) base[i] += std::sin(2.0 * M_PI * i / period + period);
    std::vector<Signal> a, b, nz;
    for (int i = 0; i < n; ++i) {
        Signal sa(1, L), sb(1, L);
        for (int k = 0; k < L; ++k) {
            sa.values(0, k) = base[k] + 0.05 * rng.gaussian();
            sb.values(0, k) = base[k] + 0.05 * rng.gaussian();
        }
        a.push_back(std::move(sa));
        b.push_back(std::move(sb));
        nz.push_back(noise_signal(L, &rng));
    }
    const Dataset A = make_set(std::move(a)), B = make_set(std::move(b)),
                  N = make_set(std::move(nz));
    const double split = wavelet_coherence_score(A, B, 30, 11);
    const double vs_noise = wavelet_coherence_score(A, N, 30, 11);
    CHECK(split <= 100.0);
    CHECK_MESSAGE(vs_noise <= split - 20.0, "split ", split, " vs noise ", vs_noise);
}

TEST_CASE("coherence determinism and validation") {
    SimOptions opt;
    opt.length = 64;
    const Dataset set = gen_simulated(1, 3, opt);
    const Dataset other = gen_simulated(1, 4, opt);
    CHECK(wavelet_coherence_score(set, other, 10, 9) ==
          wavelet_coherence_score(set, other, 10, 9));
    CHECK(wavelet_coherence_score(set, other, 10, 9) !=
          wavelet_coherence_score(set, other, 10, 10));

    SimOptions opt2;
    opt2.length = 32;
    const Dataset small = gen_simulated(1, 3, opt2);
    CHECK_THROWS_AS(wavelet_coherence_score(set, small), std::invalid_argument);
    CHECK_THROWS_AS(wavelet_coherence_score(set, other, 0), std::invalid_argument);
    CHECK_THROWS_AS(wavelet_coherence_score(Dataset{}, other), std::invalid_argument);
}

TEST_CASE("discriminative score of trivially separable sets is 0.5") {
    std::vector<Signal> zeros, ones;
    for (int i = 0; i < 24; ++i) {
        zeros.push_back(const_signal(16, 0.0));
        ones.push_back(const_signal(16, 1.0));
    }
    const double s = discriminative_score(make_set(std::move(zeros)), make_set(std::move(ones)), 1);
    CHECK(s == doctest::Approx(0.5).epsilon(1e-12));
}

TEST_CASE("discriminative score needs 20 per set and is deterministic") {
    Rng rng(5);
    std::vector<Signal> a, b;
    for (int i = 0; i < 20; ++i) {
        a.push_back(noise_signal(16, &rng));
        b.push_back(noise_signal(16, &rng));
    }
    const Dataset A = make_set(std::move(a)), B = make_set(std::move(b));

    Dataset small = A;
    small.signals.resize(19);
    CHECK_THROWS_WITH_AS(discriminative_score(small, B), doctest::Contains("20"),
                         std::invalid_argument);
    CHECK_THROWS_AS(discriminative_score(A, small), std::invalid_argument);

    const double s1 = discriminative_score(A, B, 42);
    const double s2 = discriminative_score(A, B, 42);
    CHECK(s1 == s2);
    CHECK(s1 >= 0.0);
    CHECK(s1 <= 0.5);
}

TEST_CASE("cnn classifier memorizes a small distinct set") {
    Rng rng(17);
    std::vector<Signal> train;
    for (int c = 0; c < 3; ++c)
        for (int i = 0; i < 6; ++i) {
            Signal s = sine_signal(16, 4.0 * (c + 1), 0.3 * i, 0.0, &rng, c);
            s.values(0, 0) += 0.01 * i;
            train.push_back(std::move(s));
        }
    const Dataset set = make_set(std::move(train));
    const F1Report rep = train_cnn_classifier(set, set, 2);
    REQUIRE(rep.per_class_f1.size() == 3);
    for (const auto& [cls, f1] : rep.per_class_f1) CHECK(f1 == doctest::Approx(1.0));
    CHECK(rep.average == doctest::Approx(1.0));
}

TEST_CASE("cnn classifier reports zero F1 for an unlearnable minority") {
    // identical inputs with conflicting labels: the majority label wins every
    // argmax, so the minority class is never predicted
    std::vector<Signal> train;
    for (int i = 0; i < 30; ++i) train.push_back(const_signal(16, 0.5, 0));
    for (int i = 0; i < 3; ++i) train.push_back(const_signal(16, 0.5, 1));
    const Dataset set = make_set(std::move(train));
    const F1Report rep = train_cnn_classifier(set, set, 3);
    REQUIRE(rep.per_class_f1.count(1) == 1);
    CHECK(rep.per_class_f1.at(1) == 0.0);
    CHECK(rep.per_class_f1.at(0) > 0.9);
    const double mean = (rep.per_class_f1.at(0) + rep.per_class_f1.at(1)) / 2.0;
    CHECK(std::fabs(rep.average - mean) <= 1e-12);
}

TEST_CASE("cnn classifier validation") {
    Rng rng(8);
    std::vector<Signal> tr, ev;
    for (int i = 0; i < 4; ++i) tr.push_back(noise_signal(16, &rng, i % 2));
    ev.push_back(noise_signal(16, &rng, 2));  // class unseen in training
    const Dataset train = make_set(std::move(tr));
    CHECK_THROWS_WITH_AS(train_cnn_classifier(train, make_set(std::move(ev))),
                         doctest::Contains("unseen"), std::invalid_argument);

    std::vector<Signal> unl;
    unl.push_back(noise_signal(16, &rng));
    CHECK_THROWS_AS(train_cnn_classifier(make_set(std::move(unl)), train), std::invalid_argument);
    CHECK_THROWS_AS(train_cnn_classifier(Dataset{}, train), std::invalid_argument);
}

TEST_CASE("augment_balance tops up minority classes with flagged samples") {
    // quick label-conditional checkpoint on tiny data
    UNetConfig cfg;
    cfg.in_channels = 1;
    cfg.signal_length = 16;
    cfg.base_channels = 8;
    cfg.channel_mults = {1, 2};
    cfg.res_groups = 4;
    cfg.attn_heads = 2;
    cfg.num_classes = 2;
    UNet model(cfg, 21);
    Rng rng(33);
    std::vector<Signal> tr;
    for (int i = 0; i < 8; ++i) tr.push_back(sine_signal(16, 8.0, 0.1 * i, 0.0, &rng, 0));
    for (int i = 0; i < 8; ++i) tr.push_back(sine_signal(16, 4.0, 0.1 * i, 0.0, &rng, 1));
    const Dataset data = make_set(std::move(tr));
    TrainConfig tc;
    tc.epochs = 2;
    tc.batch_size = 8;
    tc.early_stop_patience = 100;
    tc.seed = 13;
    const NoiseSchedule sched = build_schedule(ScheduleKind::cosine, 8);
    const Checkpoint ckpt = train(&model, data, TrainRegime::label, std::nullopt, tc, sched);

    std::vector<Signal> imb;
    for (int i = 0; i < 10; ++i) imb.push_back(sine_signal(16, 8.0, 0.2 * i, 0.0, &rng, 0));
    imb.push_back(sine_signal(16, 4.0, 0.0, 0.0, &rng, 1));
    const Dataset imbalanced = make_set(std::move(imb));

    const Dataset out = augment_balance(imbalanced, ckpt, 10, 55);
    REQUIRE(out.size() == 20);
    for (size_t i = 0; i < imbalanced.size(); ++i) {
        CHECK(out.signals[i].values.v == imbalanced.signals[i].values.v);
        CHECK(out.signals[i].synthetic == false);
    }
    int synth_minority = 0;
    for (size_t i = imbalanced.size(); i < out.size(); ++i) {
        CHECK(out.signals[i].synthetic);
        REQUIRE(out.signals[i].label.has_value());
        CHECK(*out.signals[i].label == 1);
        ++synth_minority;
    }
    CHECK(synth_minority == 9);

    // already balanced: nothing to add
    const Dataset same = augment_balance(data, ckpt, 8, 55);
    CHECK(same.size() == data.size());

    CHECK_THROWS_WITH_AS(augment_balance(imbalanced, ckpt, 9, 55), doctest::Contains("largest"),
                         std::invalid_argument);

    Checkpoint uncond = ckpt;
    uncond.regime = TrainRegime::unconditional;
    CHECK_THROWS_AS(augment_balance(imbalanced, uncond, 10, 55), std::invalid_argument);
}

TEST_CASE("pca projection identity and separation oracles") {
    Rng rng(23);
    std::vector<Signal> a;
    for (int i = 0; i < 12; ++i) a.push_back(noise_signal(16, &rng, i % 2));
    const Dataset A = make_set(std::move(a));

    // identical sets project to identical clouds
    const auto pts = pca_project(A, A);
    REQUIRE(pts.size() == 24);
    double mx = 0, my = 0;
    for (int i = 0; i < 12; ++i) {
        mx += pts[i][0] - pts[12 + i][0];
        my += pts[i][1] - pts[12 + i][1];
    }
    CHECK(std::fabs(mx / 12) <= 1e-9);
    CHECK(std::fabs(my / 12) <= 1e-9);

    // well separated clouds stay separated in the plane
    std::vector<Signal> lo, hi;
    for (int i = 0; i < 10; ++i) {
        Signal s = const_signal(16, 0.0);
        Signal t = const_signal(16, 10.0);
        for (int k = 0; k < 16; ++k) {
            s.values(0, k) += 0.1 * rng.gaussian();
            t.values(0, k) += 0.1 * rng.gaussian();
        }
        lo.push_back(std::move(s));
        hi.push_back(std::move(t));
    }
    const auto p2 = pca_project(make_set(std::move(lo)), make_set(std::move(hi)));
    double c1x = 0, c1y = 0, c2x = 0, c2y = 0;
    for (int i = 0; i < 10; ++i) {
        c1x += p2[i][0] / 10;
        c1y += p2[i][1] / 10;
        c2x += p2[10 + i][0] / 10;
        c2y += p2[10 + i][1] / 10;
    }
    double var = 0.0;
    for (int i = 0; i < 20; ++i) {
        const double dx = p2[i][0] - (i < 10 ? c1x : c2x);
        const double dy = p2[i][1] - (i < 10 ? c1y : c2y);
        var += (dx * dx + dy * dy) / 20;
    }
    const double dist = std::hypot(c1x - c2x, c1y - c2y);
    CHECK(dist > 5.0 * std::sqrt(var));

    // too few samples
    std::vector<Signal> one;
    one.push_back(const_signal(16, 0.0));
    const Dataset single = make_set(std::move(one));
    CHECK_THROWS_AS(pca_project(single, single), std::invalid_argument);
}

TEST_CASE("export_projection writes the expected csv") {
    Rng rng(31);
    std::vector<Signal> r, s;
    for (int i = 0; i < 4; ++i) {
        r.push_back(noise_signal(16, &rng, 0));
        s.push_back(noise_signal(16, &rng));
        s.back().synthetic = true;
    }
    const Dataset R = make_set(std::move(r)), S = make_set(std::move(s));
    const std::string path = "proj_test.csv";
    export_projection(R, S, ProjectionMethod::pca, path);

    std::ifstream in(path);
    REQUIRE(in.good());
    std::string line;
    std::getline(in, line);
    CHECK(line == "x,y,origin,label");
    const auto pts = pca_project(R, S);
    int rows = 0;
    while (std::getline(in, line)) {
        std::stringstream ss(line);
        std::string x, y, origin, label;
        std::getline(ss, x, ',');
        std::getline(ss, y, ',');
        std::getline(ss, origin, ',');
        std::getline(ss, label, ',');
        CHECK(origin == (rows < 4 ? "real" : "synth"));
        CHECK(label == (rows < 4 ? "0" : "-1"));
        // %.6g quantization round-trips to ~1e-5 relative
        const double xv = std::stod(x), yv = std::stod(y);
        CHECK(std::fabs(xv - pts[rows][0]) <=
              1e-5 * std::max(1.0, std::fabs(pts[rows][0])));
        CHECK(std::fabs(yv - pts[rows][1]) <=
              1e-5 * std::max(1.0, std::fabs(pts[rows][1])));
        ++rows;
    }
    CHECK(rows == 8);  // header + 8 data rows = n_real + n_synth + 1 lines
    std::remove(path.c_str());

    CHECK(projection_method_from_string("pca") == ProjectionMethod::pca);
    CHECK_THROWS_AS(projection_method_from_string("tsne"), std::invalid_argument);
}

TEST_CASE("evaluate_fidelity fills the report") {
    Rng rng(61);
    std::vector<Signal> a, b;
    for (int i = 0; i < 20; ++i) {
        a.push_back(sine_signal(32, 8.0, 0.1 * i, 0.02, &rng));
        b.push_back(sine_signal(32, 8.0, 0.1 * i + 0.05, 0.02, &rng));
    }
    const Dataset A = make_set(std::move(a)), B = make_set(std::move(b));
    const MetricReport rep = evaluate_fidelity(A, B, 10, 3);
    CHECK(rep.n_real == 20);
    CHECK(rep.n_synth == 20);
    CHECK(rep.wavelet_coherence >= 0.0);
    CHECK(rep.wavelet_coherence <= 100.0);
    CHECK(rep.discriminative >= 0.0);
    CHECK(rep.discriminative <= 0.5);
    CHECK(!rep.settings_digest.empty());

    const std::string text = rep.to_text();
    CHECK(text.find("wavelet_coherence=") != std::string::npos);
    CHECK(text.find("discriminative=") != std::string::npos);
    CHECK(text.find("n_real=20") != std::string::npos);
    CHECK(text.find("n_synth=20") != std::string::npos);
    CHECK(text.find("settings=") != std::string::npos);
}
