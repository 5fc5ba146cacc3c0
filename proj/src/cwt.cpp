#include <fftw3.h>

#include <cmath>
#include <cstring>
#include <map>
#include <mutex>
#include <stdexcept>

#include "biodiff/eval.hpp"

namespace biodiff {

namespace {

constexpr double kOmega0 = 6.0;      // Morlet center frequency, rad/sample
constexpr double kPi = 3.14159265358979323846;

// Fourier period factor: lambda = s * 4*pi / (w0 + sqrt(2 + w0^2))
double period_factor() { return 4.0 * kPi / (kOmega0 + std::sqrt(2.0 + kOmega0 * kOmega0)); }

// FFTW plans are cached per length; planning is serialized, execution on
// caller-owned buffers is re-entrant.
struct Plans {
    fftw_plan fwd = nullptr;
    fftw_plan inv = nullptr;
};

std::mutex g_plan_mu;
std::map<int, Plans>& plan_cache() {
    static std::map<int, Plans> cache;
    return cache;
}

Plans plans_for(int L) {
    std::lock_guard<std::mutex> lock(g_plan_mu);
    auto& cache = plan_cache();
    auto it = cache.find(L);
    if (it != cache.end()) return it->second;
    fftw_complex* a = fftw_alloc_complex(static_cast<size_t>(L));
    fftw_complex* b = fftw_alloc_complex(static_cast<size_t>(L));
    Plans p;
    p.fwd = fftw_plan_dft_1d(L, a, b, FFTW_FORWARD, FFTW_ESTIMATE);
    p.inv = fftw_plan_dft_1d(L, a, b, FFTW_BACKWARD, FFTW_ESTIMATE);
    fftw_free(a);
    fftw_free(b);
    cache[L] = p;
    return p;
}

struct FftwBuf {
    explicit FftwBuf(int n) : p(fftw_alloc_complex(static_cast<size_t>(n))) {}
    ~FftwBuf() { fftw_free(p); }
    FftwBuf(const FftwBuf&) = delete;
    FftwBuf& operator=(const FftwBuf&) = delete;
    fftw_complex* p;
};

}  // namespace

double scale_to_period(double scale) { return scale * period_factor(); }
double period_to_scale(double period) { return period / period_factor(); }

std::vector<double> default_scales(int length, int count) {
    if (length < 8) throw std::invalid_argument("default_scales: length must be >= 8");
    if (count < 2) throw std::invalid_argument("default_scales: need at least 2 scales");
    const double p0 = 2.0;
    const double p1 = length / 2.0;
    std::vector<double> scales(count);
    for (int i = 0; i < count; ++i) {
        double period = p0 * std::pow(p1 / p0, static_cast<double>(i) / (count - 1));
        scales[i] = period_to_scale(period);
    }
    return scales;
}

std::vector<std::complex<double>> cwt(const double* x, int length,
                                      const std::vector<double>& scales) {
    if (length < 8) throw std::invalid_argument("cwt: length must be >= 8");
    if (scales.empty()) throw std::invalid_argument("cwt: scales must be non-empty");
    for (double s : scales)
        if (!(s > 0.0)) throw std::invalid_argument("cwt: scales must be positive");

    const int L = length;
    Plans plans = plans_for(L);

    FftwBuf in(L), spec(L), prod(L), out(L);
    for (int i = 0; i < L; ++i) {
        in.p[i][0] = x[i];
        in.p[i][1] = 0.0;
    }
    fftw_execute_dft(plans.fwd, in.p, spec.p);

    // angular frequencies of FFT bins; only w > 0 carries the analytic wavelet
    std::vector<double> w(L);
    for (int k = 0; k < L; ++k) {
        double f = (k <= L / 2) ? static_cast<double>(k) : static_cast<double>(k - L);
        w[k] = 2.0 * kPi * f / L;
    }

    std::vector<std::complex<double>> coeffs(scales.size() * static_cast<size_t>(L));
    const double norm = std::pow(kPi, -0.25);
    for (size_t si = 0; si < scales.size(); ++si) {
        const double s = scales[si];
        // Torrence-Compo normalization keeps unit energy per scale
        const double amp = norm * std::sqrt(2.0 * kPi * s) / L;  // 1/L folds in FFTW's unscaled inverse
        for (int k = 0; k < L; ++k) {
            double psi = 0.0;
            if (w[k] > 0.0) {
                double d = s * w[k] - kOmega0;
                psi = amp * std::exp(-0.5 * d * d);
            }
            prod.p[k][0] = spec.p[k][0] * psi;
            prod.p[k][1] = spec.p[k][1] * psi;
        }
        fftw_execute_dft(plans.inv, prod.p, out.p);
        for (int i = 0; i < L; ++i)
            coeffs[si * L + i] = {out.p[i][0], out.p[i][1]};
    }
    return coeffs;
}

}  // namespace biodiff
