#include <cmath>
#include <cstdio>
#include <fstream>
#include <stdexcept>
#include <string>

#include "biodiff/errors.hpp"
#include "biodiff/eval.hpp"
#include "biodiff/rng.hpp"

namespace biodiff {

namespace {

// Leading eigenvector of X'X/(n-1) by power iteration with deflation.
// X is kept as rows; the covariance matrix is never materialized.
struct PowerIter {
    const std::vector<double>& X;
    size_t n, D;
    std::vector<double> tmp;

    PowerIter(const std::vector<double>& rows, size_t n_, size_t D_) : X(rows), n(n_), D(D_) {
        tmp.resize(n);
    }

    void matvec(const std::vector<double>& v, std::vector<double>* out) {
        for (size_t i = 0; i < n; ++i) {
            const double* row = &X[i * D];
            double acc = 0.0;
            for (size_t d = 0; d < D; ++d) acc += row[d] * v[d];
            tmp[i] = acc;
        }
        std::fill(out->begin(), out->end(), 0.0);
        for (size_t i = 0; i < n; ++i) {
            const double* row = &X[i * D];
            const double w = tmp[i] / (double)(n - 1);
            for (size_t d = 0; d < D; ++d) (*out)[d] += w * row[d];
        }
    }

    // prev deflates an already-found component
    std::vector<double> leading(const std::vector<double>* prev) {
        Rng rng = stream_rng(0x70ca, "pca_start", prev ? 1 : 0);
        std::vector<double> v(D), next(D);
        double norm = 0.0;
        for (size_t d = 0; d < D; ++d) {
            v[d] = rng.gaussian();
            norm += v[d] * v[d];
        }
        norm = std::sqrt(norm);
        for (double& x : v) x /= norm;

        for (int it = 0; it < 1000; ++it) {
            matvec(v, &next);
            if (prev) {
                double proj = 0.0;
                for (size_t d = 0; d < D; ++d) proj += (*prev)[d] * next[d];
                for (size_t d = 0; d < D; ++d) next[d] -= proj * (*prev)[d];
            }
            norm = 0.0;
            for (double x : next) norm += x * x;
            norm = std::sqrt(norm);
            if (norm < 1e-300) break;  // degenerate direction; keep current v
            double drift = 0.0, dot = 0.0;
            for (size_t d = 0; d < D; ++d) dot += v[d] * next[d];
            const double sgn = dot < 0 ? -1.0 : 1.0;
            for (size_t d = 0; d < D; ++d) {
                const double nv = sgn * next[d] / norm;
                drift = std::max(drift, std::fabs(nv - v[d]));
                v[d] = nv;
            }
            if (drift < 1e-14) break;
        }

        // orient so the largest-magnitude entry is positive
        size_t best = 0;
        for (size_t d = 1; d < D; ++d)
            if (std::fabs(v[d]) > std::fabs(v[best])) best = d;
        if (v[best] < 0)
            for (double& x : v) x = -x;
        return v;
    }
};

}  // namespace

std::vector<std::array<double, 2>> pca_project(const Dataset& real_set, const Dataset& synth_set) {
    const size_t nr = real_set.size(), ns = synth_set.size(), n = nr + ns;
    if (n < 3)
        throw std::invalid_argument("pca projection needs at least 3 samples combined, got " +
                                    std::to_string(n));
    const Signal* first = nr ? &real_set.signals.front() : &synth_set.signals.front();
    const int C = first->channels(), Lh = first->length();
    const size_t D = (size_t)C * Lh;

    std::vector<double> X(n * D);
    size_t r = 0;
    for (const Dataset* set : {&real_set, &synth_set}) {
        for (const Signal& s : set->signals) {
            if (s.channels() != C || s.length() != Lh)
                throw std::invalid_argument("pca projection: inconsistent signal shapes");
            std::copy(s.values.v.begin(), s.values.v.end(), X.begin() + r * D);
            ++r;
        }
    }
    std::vector<double> mean(D, 0.0);
    for (size_t i = 0; i < n; ++i)
        for (size_t d = 0; d < D; ++d) mean[d] += X[i * D + d];
    for (double& m : mean) m /= (double)n;
    for (size_t i = 0; i < n; ++i)
        for (size_t d = 0; d < D; ++d) X[i * D + d] -= mean[d];

    PowerIter pi(X, n, D);
    const std::vector<double> v1 = pi.leading(nullptr);
    const std::vector<double> v2 = pi.leading(&v1);

    std::vector<std::array<double, 2>> pts(n);
    for (size_t i = 0; i < n; ++i) {
        double a = 0.0, b = 0.0;
        const double* row = &X[i * D];
        for (size_t d = 0; d < D; ++d) {
            a += row[d] * v1[d];
            b += row[d] * v2[d];
        }
        pts[i] = {a, b};
    }
    return pts;
}

ProjectionMethod projection_method_from_string(const std::string& s) {
    if (s == "pca") return ProjectionMethod::pca;
    throw std::invalid_argument("unknown projection method '" + s + "'");
}

void export_projection(const Dataset& real_set, const Dataset& synth_set, ProjectionMethod method,
                       const std::string& path) {
    (void)method;  // pca is the only member; the enum leaves room for more
    const std::vector<std::array<double, 2>> pts = pca_project(real_set, synth_set);

    std::ofstream out(path);
    if (!out) throw IoError("cannot open '" + path + "' for writing");
    out << "x,y,origin,label\n";
    char buf[64];
    size_t i = 0;
    for (const Dataset* set : {&real_set, &synth_set}) {
        const char* origin = (set == &real_set) ? "real" : "synth";
        for (const Signal& s : set->signals) {
            std::snprintf(buf, sizeof buf, "%.6g,%.6g", pts[i][0], pts[i][1]);
            out << buf << ',' << origin << ',' << (s.label ? *s.label : -1) << '\n';
            ++i;
        }
    }
    if (!out.good()) throw IoError("failed writing '" + path + "'");
}

}  // namespace biodiff
