#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>
#include <stdexcept>
#include <vector>

#include "biodiff/diffusion.hpp"
#include "biodiff/rng.hpp"
#include "biodiff/schedule.hpp"
#include "doctest.h"

using namespace biodiff;

static Tensor make(std::vector<double> vals) {
    Tensor t(1, (int)vals.size());
    t.v = std::move(vals);
    return t;
}

// arbitrary-coefficient schedule for hand arithmetic
static NoiseSchedule hand_schedule(std::vector<double> beta, std::vector<double> abar_tail) {
    NoiseSchedule s;
    s.kind = ScheduleKind::linear;
    s.T = (int)beta.size();
    s.beta = std::move(beta);
    for (double b : s.beta) s.alpha.push_back(1.0 - b);
    s.alpha_bar.push_back(1.0);
    for (double a : abar_tail) s.alpha_bar.push_back(a);
    for (int t = 1; t <= s.T; ++t)
        s.posterior_var.push_back((1.0 - s.alpha_bar_at(t - 1)) / (1.0 - s.alpha_bar_at(t)) *
                                  s.beta_at(t));
    return s;
}

TEST_CASE("q_sample closed form") {
    // abar = 0.64: x_t = 0.8 x0 + 0.6 eps
    Tensor x0 = make({0.5, -1.0, 2.0, 0.25});
    Tensor eps = make({0.3, -0.2, 1.0, -0.5});
    Tensor xt = q_sample_abar(x0, 0.64, eps);
    for (int i = 0; i < 4; ++i)
        CHECK(xt.v[i] == doctest::Approx(0.8 * x0.v[i] + 0.6 * eps.v[i]).epsilon(1e-15));

    // scalar x0 = 1, abar = 0.25, eps = 0.5 -> 0.5 + sqrt(0.75)*0.5
    Tensor one = make({1.0});
    Tensor half = make({0.5});
    CHECK(q_sample_abar(one, 0.25, half).v[0] ==
          doctest::Approx(0.5 + std::sqrt(0.75) * 0.5).epsilon(1e-15));

    // zero noise: exactly sqrt(abar) x0
    Tensor z = make({0.0, 0.0, 0.0, 0.0});
    Tensor xz = q_sample_abar(x0, 0.49, z);
    for (int i = 0; i < 4; ++i) CHECK(xz.v[i] == doctest::Approx(0.7 * x0.v[i]).epsilon(1e-15));

    // abar = 1 endpoint: identity
    Tensor xi = q_sample_abar(x0, 1.0, eps);
    for (int i = 0; i < 4; ++i) CHECK(xi.v[i] == x0.v[i]);

    Tensor wrong(2, 4);
    CHECK_THROWS_AS(q_sample_abar(x0, 0.5, wrong), std::invalid_argument);
    auto s = build_schedule(ScheduleKind::linear, 10);
    CHECK_THROWS_AS(q_sample(x0, 0, eps, s), std::invalid_argument);
    CHECK_THROWS_AS(q_sample(x0, 11, eps, s), std::invalid_argument);
}

TEST_CASE("frozen linear T=10 t=3 walkthrough") {
    auto s = build_schedule(ScheduleKind::linear, 10);
    Tensor x0 = make({0.5, -1.0, 2.0, 0.25});
    Tensor eps = make({0.3, -0.2, 1.0, -0.5});
    CHECK(s.alpha_bar_at(3) == doctest::Approx(0.4169684444444444).epsilon(1e-14));

    Tensor xt = q_sample(x0, 3, eps, s);
    const double xt_ref[4] = {0.55193497816115034, -0.79844394418697362, 2.0550269065769378,
                              -0.22034978063933119};
    for (int i = 0; i < 4; ++i) CHECK(xt.v[i] == doctest::Approx(xt_ref[i]).epsilon(1e-14));

    Tensor mu = posterior_mean_from_eps(xt, 3, eps, s);
    const double mu_ref[4] = {0.50567420832614884, -0.91876131518242554, 1.9764032825696589,
                              0.10238306427453231};
    for (int i = 0; i < 4; ++i) CHECK(mu.v[i] == doctest::Approx(mu_ref[i]).epsilon(1e-13));

    Tensor mu0 = posterior_mean_from_x0(xt, 3, x0, s);
    for (int i = 0; i < 4; ++i) CHECK(mu0.v[i] == doctest::Approx(mu.v[i]).epsilon(1e-12));

    CHECK(posterior_variance(3, s) == doctest::Approx(0.1852226790087976).epsilon(1e-13));
    CHECK(interp_variance(3, 0.3, s) == doctest::Approx(0.2420981567743526).epsilon(1e-13));

    Tensor z = make({1.0, -1.0, 0.5, 2.0});
    Tensor xp = p_sample_step(xt, 3, eps, z, s);
    const double xp_ref[4] = {0.93604925291957963, -1.3491363597758563, 2.1915908048663741,
                              0.96313315346139405};
    for (int i = 0; i < 4; ++i) CHECK(xp.v[i] == doctest::Approx(xp_ref[i]).epsilon(1e-13));
    Tensor xp3 = p_sample_step(xt, 3, eps, z, s, 0.3);
    const double xp3_ref[4] = {0.99770891927076555, -1.4107960261270422, 2.2224206380419673,
                               1.0864524861637659};
    for (int i = 0; i < 4; ++i) CHECK(xp3.v[i] == doctest::Approx(xp3_ref[i]).epsilon(1e-13));
}

TEST_CASE("hand-arithmetic posterior mean and variance") {
    // alpha = 0.99, beta = 0.01, abar = 0.5
    auto s = hand_schedule({0.01}, {0.5});
    Tensor xt = make({1.0});
    Tensor eh = make({0.2});
    CHECK(posterior_mean_from_eps(xt, 1, eh, s).v[0] == doctest::Approx(1.00219).epsilon(1e-5));

    // abar_{t-1} = 0.6, abar_t = 0.5, beta = 0.01 -> btilde = 0.008
    auto s2 = hand_schedule({0.3, 0.01}, {0.6, 0.5});
    CHECK(posterior_variance(2, s2) == doctest::Approx(0.008).epsilon(1e-15));
    CHECK(interp_variance(2, 0.0, s2) == posterior_variance(2, s2));  // exact endpoint
    CHECK(interp_variance(2, 1.0, s2) == s2.beta_at(2));              // exact endpoint
    double mid = interp_variance(2, 0.5, s2);
    CHECK(mid == doctest::Approx(std::sqrt(0.008 * 0.01)).epsilon(1e-14));
    CHECK_THROWS_AS(interp_variance(2, -0.1, s2), std::invalid_argument);
    CHECK_THROWS_AS(interp_variance(2, 1.1, s2), std::invalid_argument);
}

TEST_CASE("posterior identity on random triples") {
    auto s = build_schedule(ScheduleKind::cosine, 100);
    Rng rng(0x51a7eULL);
    for (int k = 0; k < 1000; ++k) {
        int t = 1 + rng.uniform_int(s.T);
        Tensor x0(2, 8), eps(2, 8);
        for (auto& e : x0.v) e = rng.gaussian();
        for (auto& e : eps.v) e = rng.gaussian();
        Tensor xt = q_sample(x0, t, eps, s);
        Tensor a = posterior_mean_from_eps(xt, t, eps, s);
        Tensor b = posterior_mean_from_x0(xt, t, x0, s);
        for (size_t i = 0; i < a.v.size(); ++i) {
            double rel = std::abs(a.v[i] - b.v[i]) / std::max(1.0, std::abs(b.v[i]));
            CHECK(rel < 1e-6);
        }
    }
}

TEST_CASE("p_sample conventions") {
    auto s = build_schedule(ScheduleKind::linear, 50);
    Tensor xt = make({0.7, -0.3});
    Tensor eh = make({0.1, 0.2});
    Tensor z0 = make({0.0, 0.0});
    Tensor z = make({3.0, -4.0});
    // z = 0 -> mean exactly
    Tensor mu = posterior_mean_from_eps(xt, 7, eh, s);
    Tensor step = p_sample_step(xt, 7, eh, z0, s);
    for (int i = 0; i < 2; ++i) CHECK(step.v[i] == mu.v[i]);
    // t = 1 suppresses noise entirely
    Tensor mu1 = posterior_mean_from_eps(xt, 1, eh, s);
    Tensor s1 = p_sample_step(xt, 1, eh, z, s);
    for (int i = 0; i < 2; ++i) CHECK(s1.v[i] == mu1.v[i]);
}

TEST_CASE("perfect-eps chain recovers x0") {
    auto s = build_schedule(ScheduleKind::linear, 50);
    Tensor x0 = make({1.25, -0.75, 0.4, 2.0});
    Rng rng(7);
    Tensor eps(1, 4);
    for (auto& e : eps.v) e = rng.gaussian();
    Tensor x = q_sample(x0, s.T, eps, s);
    Tensor zero = make({0.0, 0.0, 0.0, 0.0});
    for (int t = s.T; t >= 1; --t) {
        // what a perfect predictor would say given x_t and known x0
        const double abar = s.alpha_bar_at(t);
        Tensor implied(1, 4);
        for (int i = 0; i < 4; ++i)
            implied.v[i] = (x.v[i] - std::sqrt(abar) * x0.v[i]) / std::sqrt(1.0 - abar);
        x = p_sample_step(x, t, implied, zero, s);
    }
    for (int i = 0; i < 4; ++i) {
        CHECK(std::abs(x.v[i] - x0.v[i]) < 0.05 * std::abs(x0.v[i]));
        CHECK(x.v[i] == doctest::Approx(x0.v[i]).epsilon(1e-10));
    }
}

TEST_CASE("losses") {
    Tensor a = make({0.5, -0.25, 1.0, 0.0});
    Tensor b = make({0.25, 0.25, -1.0, 2.0});
    CHECK(simple_loss(a, b) == doctest::Approx(1.1875).epsilon(1e-15));
    CHECK(simple_loss(b, a) == simple_loss(a, b));
    CHECK(simple_loss(a, a) == 0.0);
    CHECK(mse(a, b) == doctest::Approx(2.078125).epsilon(1e-15));
    Tensor zero2 = make({0.0, 0.0});
    Tensor pm = make({1.0, -1.0});
    CHECK(simple_loss(zero2, pm) == 1.0);
    Tensor wrong(2, 4);
    CHECK_THROWS_AS(simple_loss(a, wrong), std::invalid_argument);

    // brute-force accumulation oracle on a random pair
    Rng rng(99);
    Tensor u(3, 17), w(3, 17);
    for (auto& e : u.v) e = rng.gaussian();
    for (auto& e : w.v) e = rng.gaussian();
    double ref = 0.0;
    for (size_t i = 0; i < u.v.size(); ++i) ref += std::abs(u.v[i] - w.v[i]);
    ref /= (double)u.v.size();
    CHECK(simple_loss(u, w) == doctest::Approx(ref).epsilon(1e-12));
}

TEST_CASE("sequential forward process matches closed form in distribution") {
    auto s = build_schedule(ScheduleKind::cosine, 100);
    const int t = 50;
    const double x0 = 1.0;
    const double abar = s.alpha_bar_at(t);
    Rng rng(0xc0ffee);
    const int n = 100000;
    double sum_seq = 0, sq_seq = 0, sum_cf = 0, sq_cf = 0;
    for (int k = 0; k < n; ++k) {
        double x = x0;
        for (int step = 1; step <= t; ++step)
            x = std::sqrt(1.0 - s.beta_at(step)) * x + std::sqrt(s.beta_at(step)) * rng.gaussian();
        sum_seq += x;
        sq_seq += x * x;
        double y = std::sqrt(abar) * x0 + std::sqrt(1.0 - abar) * rng.gaussian();
        sum_cf += y;
        sq_cf += y * y;
    }
    const double mean_seq = sum_seq / n, mean_cf = sum_cf / n;
    const double var_seq = sq_seq / n - mean_seq * mean_seq;
    const double var_cf = sq_cf / n - mean_cf * mean_cf;
    const double mean_th = std::sqrt(abar) * x0, var_th = 1.0 - abar;
    CHECK(std::abs(mean_seq - mean_th) < 0.02 * std::abs(mean_th));
    CHECK(std::abs(mean_cf - mean_th) < 0.02 * std::abs(mean_th));
    CHECK(std::abs(var_seq - var_th) < 0.02 * var_th);
    CHECK(std::abs(var_cf - var_th) < 0.02 * var_th);
}

TEST_CASE("elbo terms") {
    auto s = build_schedule(ScheduleKind::linear, 10);
    Tensor x0 = make({0.5, -1.0, 2.0, 0.25});

    // perfect predictor: every KL vanishes, recon is the entropy floor
    EpsPredictor perfect = [&](const Tensor& xt, int t) {
        const double abar = s.alpha_bar_at(t);
        Tensor e(xt.ch, xt.len);
        for (size_t i = 0; i < e.v.size(); ++i)
            e.v[i] = (xt.v[i] - std::sqrt(abar) * x0.v[i]) / std::sqrt(1.0 - abar);
        return e;
    };
    Rng rng(11);
    ElboTerms et = elbo_terms(x0, perfect, s, 4, rng);
    REQUIRE(et.kl.size() == 9);
    for (double k : et.kl) CHECK(std::abs(k) < 1e-12);
    CHECK(et.recon_nll == doctest::Approx(-1.383646559789373).epsilon(1e-9));
    CHECK(et.prior_term < 1e-12);  // abar_T ~ 1e-17, unit-ish signal
    CHECK(et.total() == doctest::Approx(et.prior_term + et.recon_nll).epsilon(1e-9));

    // zero predictor is strictly worse everywhere
    EpsPredictor zero = [](const Tensor& xt, int) { return Tensor(xt.ch, xt.len); };
    Rng rng2(11);
    ElboTerms ez = elbo_terms(x0, zero, s, 4, rng2);
    for (size_t i = 0; i < ez.kl.size(); ++i) CHECK(ez.kl[i] > et.kl[i]);
    CHECK(ez.recon_nll > et.recon_nll);

    // prior term stays under 1e-2 nats for a long chain and unit-variance x0
    auto s1000 = build_schedule(ScheduleKind::cosine, 1000);
    Rng rng3(5);
    Tensor big(1, 64);
    for (auto& e : big.v) e = rng3.gaussian();
    CHECK(prior_kl_term(big, s1000) < 0.01);

    CHECK_THROWS_AS(elbo_terms(x0, perfect, s, 0, rng), std::invalid_argument);
}
