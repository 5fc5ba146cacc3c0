#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace biodiff {

enum class ScheduleKind { linear, cosine };

ScheduleKind schedule_kind_from_string(const std::string& s);
std::string to_string(ScheduleKind k);

// Precomputed diffusion tables. Timesteps are 1-indexed: beta[t-1] is the
// step-t noise rate, alpha_bar[t] the retained signal fraction after t steps
// (alpha_bar[0] == 1 means clean data).
struct NoiseSchedule {
    ScheduleKind kind = ScheduleKind::linear;
    int T = 0;
    std::vector<double> beta;           // size T, beta[t-1] = beta_t
    std::vector<double> alpha;          // size T, alpha_t = 1 - beta_t
    std::vector<double> alpha_bar;      // size T+1, alpha_bar[0] = 1
    std::vector<double> posterior_var;  // size T, beta_tilde_t

    double beta_at(int t) const { return beta[check(t, 1) - 1]; }
    double alpha_at(int t) const { return alpha[check(t, 1) - 1]; }
    double alpha_bar_at(int t) const { return alpha_bar[check(t, 0)]; }
    double posterior_var_at(int t) const { return posterior_var[check(t, 1) - 1]; }

   private:
    int check(int t, int lo) const {
        if (t < lo || t > T)
            throw std::invalid_argument("timestep " + std::to_string(t) + " outside [" +
                                        std::to_string(lo) + ", " + std::to_string(T) + "]");
        return t;
    }
};

// Linear endpoints are the step-1000 reference values; for other T the betas
// are scaled by 1000/T so the chain still ends near a standard normal.
struct ScheduleOptions {
    double linear_beta_start = 1e-4;
    double linear_beta_end = 0.02;
    double cosine_offset = 0.008;
    double beta_clip = 0.999;
};

NoiseSchedule build_schedule(ScheduleKind kind, int T, const ScheduleOptions& opt = {});

}  // namespace biodiff
