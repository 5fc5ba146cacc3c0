#include <algorithm>
#include <cmath>
#include <set>
#include <stdexcept>
#include <string>

#include "adam_util.hpp"
#include "biodiff/eval.hpp"
#include "biodiff/kernels.hpp"
#include "biodiff/rng.hpp"

namespace biodiff {

namespace {

using kernels::Conv1dDims;

struct ConvBlock {
    Conv1dDims d;
    std::vector<double> w, b, gw, gb;

    void init(int cin, int cout, int lin, Rng* rng) {
        d.cin = cin;
        d.cout = cout;
        d.lin = lin;
        d.k = 5;
        d.pad = 2;
        w.resize((size_t)cout * cin * d.k);
        const double std = std::sqrt(2.0 / (cin * d.k));
        for (double& x : w) x = rng->gaussian() * std;
        b.assign(cout, 0.0);
        gw.assign(w.size(), 0.0);
        gb.assign(b.size(), 0.0);
    }
};

struct Classifier {
    ConvBlock c1, c2, c3;
    std::vector<double> dw, db, gdw, gdb;  // dense head
    int K = 0, flat = 0;
    int L1 = 0, L2 = 0, L3 = 0, P1 = 0, P2 = 0, P3 = 0;

    // per-sample work buffers
    std::vector<double> z1, s1, p1, z2, s2, p2, z3, s3, p3, logits;
    std::vector<int> am1, am2, am3;
    std::vector<double> dz1, ds1, dp1, dz2, ds2, dp2, dz3, ds3, dp3, dlog;

    Classifier(int C, int L, int classes, Rng* rng) : K(classes) {
        c1.init(C, 32, L, rng);
        L1 = c1.d.lout();
        P1 = L1 / 2;
        c2.init(32, 64, P1, rng);
        L2 = c2.d.lout();
        P2 = L2 / 2;
        c3.init(64, 128, P2, rng);
        L3 = c3.d.lout();
        P3 = L3 / 2;
        flat = 128 * P3;
        dw.resize((size_t)K * flat);
        const double std = std::sqrt(1.0 / flat);
        for (double& x : dw) x = rng->gaussian() * std;
        db.assign(K, 0.0);
        gdw.assign(dw.size(), 0.0);
        gdb.assign(db.size(), 0.0);

        z1.resize((size_t)32 * L1);
        s1.resize(z1.size());
        p1.resize((size_t)32 * P1);
        am1.resize(p1.size());
        z2.resize((size_t)64 * L2);
        s2.resize(z2.size());
        p2.resize((size_t)64 * P2);
        am2.resize(p2.size());
        z3.resize((size_t)128 * L3);
        s3.resize(z3.size());
        p3.resize((size_t)128 * P3);
        am3.resize(p3.size());
        logits.resize(K);
        dz1.resize(z1.size());
        ds1.resize(s1.size());
        dp1.resize(p1.size());
        dz2.resize(z2.size());
        ds2.resize(s2.size());
        dp2.resize(p2.size());
        dz3.resize(z3.size());
        ds3.resize(s3.size());
        dp3.resize(p3.size());
        dlog.resize(K);
    }

    void zero_grad() {
        std::fill(c1.gw.begin(), c1.gw.end(), 0.0);
        std::fill(c1.gb.begin(), c1.gb.end(), 0.0);
        std::fill(c2.gw.begin(), c2.gw.end(), 0.0);
        std::fill(c2.gb.begin(), c2.gb.end(), 0.0);
        std::fill(c3.gw.begin(), c3.gw.end(), 0.0);
        std::fill(c3.gb.begin(), c3.gb.end(), 0.0);
        std::fill(gdw.begin(), gdw.end(), 0.0);
        std::fill(gdb.begin(), gdb.end(), 0.0);
    }

    const std::vector<double>& forward(const double* x) {
        namespace kn = kernels;
        kn::conv1d_forward(x, c1.w.data(), c1.b.data(), z1.data(), c1.d);
        kn::silu_forward(z1.data(), s1.data(), (int)z1.size());
        kn::maxpool2_forward(s1.data(), p1.data(), am1.data(), 32, L1);
        kn::conv1d_forward(p1.data(), c2.w.data(), c2.b.data(), z2.data(), c2.d);
        kn::silu_forward(z2.data(), s2.data(), (int)z2.size());
        kn::maxpool2_forward(s2.data(), p2.data(), am2.data(), 64, L2);
        kn::conv1d_forward(p2.data(), c3.w.data(), c3.b.data(), z3.data(), c3.d);
        kn::silu_forward(z3.data(), s3.data(), (int)z3.size());
        kn::maxpool2_forward(s3.data(), p3.data(), am3.data(), 128, L3);
        kn::linear_forward(p3.data(), dw.data(), db.data(), logits.data(), flat, K);
        return logits;
    }

    // softmax cross-entropy; scale folds the batch normalizer into the grads
    void backward(const double* x, int label, double scale) {
        namespace kn = kernels;
        double mx = logits[0];
        for (int k = 1; k < K; ++k) mx = std::max(mx, logits[k]);
        double sum = 0.0;
        for (int k = 0; k < K; ++k) sum += std::exp(logits[k] - mx);
        for (int k = 0; k < K; ++k)
            dlog[k] = (std::exp(logits[k] - mx) / sum - (k == label ? 1.0 : 0.0)) * scale;
        kn::linear_backward(dlog.data(), p3.data(), dw.data(), dp3.data(), gdw.data(), gdb.data(),
                            flat, K);
        kn::maxpool2_backward(dp3.data(), am3.data(), ds3.data(), 128, L3);
        kn::silu_backward(ds3.data(), z3.data(), dz3.data(), (int)z3.size());
        kn::conv1d_backward_weights(dz3.data(), p2.data(), c3.gw.data(), c3.gb.data(), c3.d);
        kn::conv1d_backward_data(dz3.data(), c3.w.data(), dp2.data(), c3.d);
        kn::maxpool2_backward(dp2.data(), am2.data(), ds2.data(), 64, L2);
        kn::silu_backward(ds2.data(), z2.data(), dz2.data(), (int)z2.size());
        kn::conv1d_backward_weights(dz2.data(), p1.data(), c2.gw.data(), c2.gb.data(), c2.d);
        kn::conv1d_backward_data(dz2.data(), c2.w.data(), dp1.data(), c2.d);
        kn::maxpool2_backward(dp1.data(), am1.data(), ds1.data(), 32, L1);
        kn::silu_backward(ds1.data(), z1.data(), dz1.data(), (int)z1.size());
        kn::conv1d_backward_weights(dz1.data(), x, c1.gw.data(), c1.gb.data(), c1.d);
    }

    int predict(const double* x) {
        forward(x);
        int best = 0;
        for (int k = 1; k < K; ++k)
            if (logits[k] > logits[best]) best = k;
        return best;
    }
};

}  // namespace

F1Report train_cnn_classifier(const Dataset& train, const Dataset& eval_set,
                              unsigned long long seed) {
    if (train.empty() || eval_set.empty())
        throw std::invalid_argument("train_cnn_classifier: train and eval sets must be non-empty");
    const Signal& a = train.signals.front();
    const int C = a.channels(), L = a.length();
    if (L < 8) throw std::invalid_argument("train_cnn_classifier: signals shorter than 8 samples");
    std::set<int> train_classes;
    for (const Signal& s : train.signals) {
        if (s.channels() != C || s.length() != L)
            throw std::invalid_argument("train_cnn_classifier: inconsistent signal shapes");
        if (!s.label) throw std::invalid_argument("train_cnn_classifier: unlabeled training signal");
        train_classes.insert(*s.label);
    }
    for (const Signal& s : eval_set.signals) {
        if (s.channels() != C || s.length() != L)
            throw std::invalid_argument("train_cnn_classifier: inconsistent signal shapes");
        if (!s.label) throw std::invalid_argument("train_cnn_classifier: unlabeled eval signal");
        if (!train_classes.count(*s.label))
            throw std::invalid_argument("train_cnn_classifier: eval contains class " +
                                        std::to_string(*s.label) + " unseen in training data");
    }
    const int K = *train_classes.rbegin() + 1;

    Rng init_rng = stream_rng(seed, "cnn_init");
    Classifier net(C, L, K, &init_rng);
    FlatAdam opt;
    opt.attach(&net.c1.w, &net.c1.gw);
    opt.attach(&net.c1.b, &net.c1.gb);
    opt.attach(&net.c2.w, &net.c2.gw);
    opt.attach(&net.c2.b, &net.c2.gb);
    opt.attach(&net.c3.w, &net.c3.gw);
    opt.attach(&net.c3.b, &net.c3.gb);
    opt.attach(&net.dw, &net.gdw);
    opt.attach(&net.db, &net.gdb);
    opt.finalize();

    const int epochs = 20, batch = 32;
    const double lr = 1e-3;
    std::vector<size_t> order(train.size());
    for (size_t i = 0; i < order.size(); ++i) order[i] = i;
    for (int e = 0; e < epochs; ++e) {
        Rng erng = stream_rng(seed, "cnn_epoch", e);
        for (size_t i = order.size() - 1; i > 0; --i)
            std::swap(order[i], order[erng.uniform_int(i + 1)]);
        for (size_t s = 0; s < order.size(); s += batch) {
            const size_t bn = std::min((size_t)batch, order.size() - s);
            net.zero_grad();
            for (size_t k = 0; k < bn; ++k) {
                const Signal& sig = train.signals[order[s + k]];
                net.forward(sig.values.v.data());
                net.backward(sig.values.v.data(), *sig.label, 1.0 / (double)bn);
            }
            opt.update(lr);
        }
    }

    // confusion counts over the eval set
    std::map<int, long> tp, fp, fn;
    for (const Signal& s : eval_set.signals) {
        const int pred = net.predict(s.values.v.data());
        const int truth = *s.label;
        if (pred == truth) {
            ++tp[truth];
        } else {
            ++fn[truth];
            ++fp[pred];
        }
    }
    F1Report rep;
    std::set<int> eval_classes;
    for (const Signal& s : eval_set.signals) eval_classes.insert(*s.label);
    double sum = 0.0;
    for (int k : eval_classes) {
        const double p_den = (double)(tp[k] + fp[k]), r_den = (double)(tp[k] + fn[k]);
        const double prec = p_den > 0 ? tp[k] / p_den : 0.0;
        const double rec = r_den > 0 ? tp[k] / r_den : 0.0;
        const double f1 = (prec + rec) > 0 ? 2.0 * prec * rec / (prec + rec) : 0.0;
        rep.per_class_f1[k] = f1;
        sum += f1;
    }
    rep.average = sum / (double)eval_classes.size();
    return rep;
}

}  // namespace biodiff
