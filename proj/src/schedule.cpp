#include "biodiff/schedule.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace biodiff {

ScheduleKind schedule_kind_from_string(const std::string& s) {
    if (s == "linear") return ScheduleKind::linear;
    if (s == "cosine") return ScheduleKind::cosine;
    throw std::invalid_argument("unknown schedule kind: " + s);
}

std::string to_string(ScheduleKind k) {
    return k == ScheduleKind::linear ? "linear" : "cosine";
}

namespace {

constexpr double kPi = 3.14159265358979323846;

double cosine_f(double t, double T, double s) {
    double a = ((t / T + s) / (1.0 + s)) * (kPi / 2.0);
    double c = std::cos(a);
    return c * c;
}

}  // namespace

NoiseSchedule build_schedule(ScheduleKind kind, int T, const ScheduleOptions& opt) {
    if (T < 1) throw std::invalid_argument("build_schedule: T must be >= 1");

    NoiseSchedule sc;
    sc.kind = kind;
    sc.T = T;
    sc.beta.resize(T);

    if (kind == ScheduleKind::linear) {
        // reference endpoints are for T = 1000; scale keeps total corruption
        // comparable for shorter chains
        double scale = 1000.0 / static_cast<double>(T);
        double b0 = scale * opt.linear_beta_start;
        double b1 = scale * opt.linear_beta_end;
        for (int t = 0; t < T; ++t) {
            double frac = (T == 1) ? 0.0 : static_cast<double>(t) / (T - 1);
            sc.beta[t] = std::min(b0 + frac * (b1 - b0), opt.beta_clip);
        }
    } else {
        double s = opt.cosine_offset;
        double f0 = cosine_f(0, T, s);
        double prev = f0;
        for (int t = 1; t <= T; ++t) {
            double ft = cosine_f(t, T, s);
            sc.beta[t - 1] = std::min(1.0 - ft / prev, opt.beta_clip);
            prev = ft;
        }
    }

    sc.alpha.resize(T);
    sc.alpha_bar.resize(T + 1);
    sc.posterior_var.resize(T);
    sc.alpha_bar[0] = 1.0;
    for (int t = 1; t <= T; ++t) {
        sc.alpha[t - 1] = 1.0 - sc.beta[t - 1];
        sc.alpha_bar[t] = sc.alpha_bar[t - 1] * sc.alpha[t - 1];
        sc.posterior_var[t - 1] =
            (1.0 - sc.alpha_bar[t - 1]) / (1.0 - sc.alpha_bar[t]) * sc.beta[t - 1];
    }
    return sc;
}

}  // namespace biodiff
