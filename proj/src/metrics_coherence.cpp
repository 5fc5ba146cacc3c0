#include <algorithm>
#include <charconv>
#include <cmath>
#include <stdexcept>

#include "biodiff/eval.hpp"
#include "biodiff/rng.hpp"

namespace biodiff {

namespace {

std::string fmt(double v) {
    char buf[40];
    auto r = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, r.ptr);
}

// Gaussian time kernels (std = scale/2, cut at 3 std) built once per geometry.
struct Smoother {
    std::vector<std::vector<double>> kern;
    std::vector<int> half;
    int S, L;

    Smoother(const std::vector<double>& scales, int length) : S((int)scales.size()), L(length) {
        for (double s : scales) {
            const double sigma = s / 2.0;
            const int h = std::min(L - 1, (int)std::ceil(3.0 * sigma));
            std::vector<double> k(2 * h + 1);
            for (int i = -h; i <= h; ++i) k[i + h] = std::exp(-0.5 * (i / sigma) * (i / sigma));
            kern.push_back(std::move(k));
            half.push_back(h);
        }
    }

    // time gaussian (edge-renormalized), then a 3-scale boxcar
    void apply(std::vector<double>* a) const {
        std::vector<double>& x = *a;
        std::vector<double> tmp(x.size());
        for (int r = 0; r < S; ++r) {
            const double* row = &x[(size_t)r * L];
            double* orow = &tmp[(size_t)r * L];
            const std::vector<double>& k = kern[r];
            const int h = half[r];
            for (int t = 0; t < L; ++t) {
                const int lo = std::max(-h, -t), hi = std::min(h, L - 1 - t);
                double acc = 0.0, wsum = 0.0;
                for (int d = lo; d <= hi; ++d) {
                    acc += k[d + h] * row[t + d];
                    wsum += k[d + h];
                }
                orow[t] = acc / wsum;
            }
        }
        for (int r = 0; r < S; ++r) {
            const int lo = std::max(0, r - 1), hi = std::min(S - 1, r + 1);
            double* orow = &x[(size_t)r * L];
            for (int t = 0; t < L; ++t) {
                double acc = 0.0;
                for (int q = lo; q <= hi; ++q) acc += tmp[(size_t)q * L + t];
                orow[t] = acc / (hi - lo + 1);
            }
        }
    }
};

double pair_coherence(const double* x, const double* y, int L, const std::vector<double>& scales,
                      const Smoother& sm) {
    const auto Wx = cwt(x, L, scales);
    const auto Wy = cwt(y, L, scales);
    const size_t n = Wx.size();
    std::vector<double> cre(n), cim(n), px(n), py(n);
    for (size_t i = 0; i < n; ++i) {
        const std::complex<double> c = Wx[i] * std::conj(Wy[i]);
        cre[i] = c.real();
        cim[i] = c.imag();
        px[i] = std::norm(Wx[i]);
        py[i] = std::norm(Wy[i]);
    }
    sm.apply(&cre);
    sm.apply(&cim);
    sm.apply(&px);
    sm.apply(&py);

    double total = 0.0;
    for (size_t i = 0; i < n; ++i) {
        const double num = cre[i] * cre[i] + cim[i] * cim[i];
        const double den = px[i] * py[i];
        double coh;
        if (den > 0.0) {
            coh = std::min(num / den, 1.0);
        } else {
            // a cell where both spectra vanish is vacuously coherent,
            // one-sided silence is not
            coh = (px[i] == 0.0 && py[i] == 0.0) ? 1.0 : 0.0;
        }
        total += coh;
    }
    return total / (double)n;
}

void check_sets(const Dataset& real_set, const Dataset& synth_set, const char* who) {
    if (real_set.empty() || synth_set.empty())
        throw std::invalid_argument(std::string(who) + ": both sets must be non-empty");
    const Signal& a = real_set.signals.front();
    const Signal& b = synth_set.signals.front();
    if (a.channels() != b.channels() || a.length() != b.length())
        throw std::invalid_argument(std::string(who) + ": shape mismatch, real (" +
                                    std::to_string(a.channels()) + ", " + std::to_string(a.length()) +
                                    ") vs synth (" + std::to_string(b.channels()) + ", " +
                                    std::to_string(b.length()) + ")");
}

}  // namespace

double wavelet_coherence_score(const Dataset& real_set, const Dataset& synth_set, int pairs,
                               unsigned long long seed) {
    check_sets(real_set, synth_set, "wavelet_coherence_score");
    if (pairs < 1) throw std::invalid_argument("wavelet_coherence_score: pairs must be >= 1");

    const int C = real_set.signals.front().channels();
    const int L = real_set.signals.front().length();
    const std::vector<double> scales = default_scales(L);
    const Smoother sm(scales, L);

    const size_t nr = real_set.size(), ns = synth_set.size();
    Rng rng = stream_rng(seed, "coherence");
    double acc = 0.0;
    for (int p = 0; p < pairs; ++p) {
        const size_t i = rng.uniform_int(nr);
        // equal sizes share the draw so identical sets pair each signal with itself
        const size_t j = (nr == ns) ? i : rng.uniform_int(ns);
        for (int c = 0; c < C; ++c)
            acc += pair_coherence(real_set.signals[i].values.row(c),
                                  synth_set.signals[j].values.row(c), L, scales, sm);
    }
    return 100.0 * acc / ((double)pairs * C);
}

std::string MetricReport::to_text() const {
    std::string s;
    s += "wavelet_coherence=" + fmt(wavelet_coherence) + "\n";
    s += "discriminative=" + fmt(discriminative) + "\n";
    s += "n_real=" + std::to_string(n_real) + "\n";
    s += "n_synth=" + std::to_string(n_synth) + "\n";
    s += "settings=" + settings_digest + "\n";
    return s;
}

MetricReport evaluate_fidelity(const Dataset& real_set, const Dataset& synth_set, int pairs,
                               unsigned long long seed) {
    MetricReport r;
    r.wavelet_coherence = wavelet_coherence_score(real_set, synth_set, pairs, seed);
    r.discriminative = discriminative_score(real_set, synth_set, seed);
    r.n_real = (int)real_set.size();
    r.n_synth = (int)synth_set.size();
    r.settings_digest = "cwt=morlet6,scales=32(p2.." +
                        std::to_string(real_set.signals.front().length() / 2) +
                        "),smooth=gauss(std=s/2)+box3,pairs=" + std::to_string(pairs) +
                        ";disc=lstm2x64,epochs=10,batch=32,lr=0.001,split=75/25;seed=" +
                        std::to_string(seed);
    return r;
}

}  // namespace biodiff
