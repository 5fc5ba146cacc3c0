#pragma once

#include <array>
#include <complex>
#include <map>
#include <string>
#include <vector>

#include "biodiff/engine.hpp"
#include "biodiff/signal.hpp"

namespace biodiff {

// ---- continuous wavelet transform --------------------------------------------

// 32 logarithmically spaced wavelet scales whose Fourier periods span 2..L/2.
std::vector<double> default_scales(int length, int count = 32);

// Analytic Morlet (center frequency 6 rad/sample) transform of one channel,
// computed in the frequency domain.  Row-major scales x length.
std::vector<std::complex<double>> cwt(const double* x, int length,
                                      const std::vector<double>& scales);

// Fourier period of a Morlet scale (and its inverse), matching default_scales.
double scale_to_period(double scale);
double period_to_scale(double period);

// ---- fidelity metrics ---------------------------------------------------------

// Magnitude-squared wavelet coherence between random real/synth pairings,
// smoothed over time (Gaussian, std = scale/2) and 3 adjacent scales, averaged
// over the time-scale plane, channels and pairs, scaled to [0,100].  Equal-size
// sets are index-paired on a common draw so identical sets score exactly 100.
double wavelet_coherence_score(const Dataset& real_set, const Dataset& synth_set,
                               int pairs = 200, unsigned long long seed = 0);

// |0.5 - test accuracy| of a 2-layer LSTM (hidden 64) told to separate real
// from synthetic on a stratified 75/25 split; 10 epochs, batch 32, lr 1e-3.
double discriminative_score(const Dataset& real_set, const Dataset& synth_set,
                            unsigned long long seed = 0);

struct MetricReport {
    double wavelet_coherence = 0.0;  // [0,100], higher is better
    double discriminative = 0.0;     // [0,0.5], lower is better
    int n_real = 0;
    int n_synth = 0;
    std::string settings_digest;  // pins every metric hyperparameter

    std::string to_text() const;  // flat key=value block
};

MetricReport evaluate_fidelity(const Dataset& real_set, const Dataset& synth_set,
                               int pairs = 200, unsigned long long seed = 0);

// ---- downstream classification --------------------------------------------------

struct F1Report {
    std::map<int, double> per_class_f1;
    double average = 0.0;  // unweighted mean of per-class values
};

// Fixed 1-D CNN: 3 blocks of (conv k5, SiLU, maxpool2) with 32/64/128 filters,
// then a dense softmax head; 20 epochs, batch 32, adam lr 1e-3.  Reports
// per-class F1 on eval_set.
F1Report train_cnn_classifier(const Dataset& train_set, const Dataset& eval_set,
                              unsigned long long seed = 0);

// Appends label-conditional samples until every class present reaches
// target_per_class rows; real rows are never removed, synthetic rows flagged.
Dataset augment_balance(const Dataset& train_set, const Checkpoint& ckpt, int target_per_class,
                        unsigned long long seed = 0, const GuidanceConfig& guidance = {});

// ---- projection export ----------------------------------------------------------

enum class ProjectionMethod { pca };

ProjectionMethod projection_method_from_string(const std::string& name);

// Top-2 principal components of the combined flattened sets; rows ordered
// real-then-synth.
std::vector<std::array<double, 2>> pca_project(const Dataset& real_set, const Dataset& synth_set);

// Writes "x,y,origin,label" CSV rows (6 significant digits) for every signal.
void export_projection(const Dataset& real_set, const Dataset& synth_set,
                       ProjectionMethod method, const std::string& path);

}  // namespace biodiff
