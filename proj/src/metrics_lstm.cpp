#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

#include "adam_util.hpp"
#include "biodiff/eval.hpp"
#include "biodiff/rng.hpp"

namespace biodiff {

namespace {

constexpr int kHidden = 64;
constexpr int kMinPerSet = 20;

double sigmoid(double z) { return 1.0 / (1.0 + std::exp(-z)); }

// One LSTM layer with caches for full backprop through time.
// Gate rows are packed [input; forget; cell; output], H rows each.
struct LstmLayer {
    int in = 0, H = 0;
    std::vector<double> wx, wh, b;
    std::vector<double> gwx, gwh, gb;

    std::vector<double> xs, hs, cs, act, tc, gx;

    void init(int in_, int H_, Rng* rng) {
        in = in_;
        H = H_;
        const double k = 1.0 / std::sqrt((double)H);
        wx.resize((size_t)4 * H * in);
        wh.resize((size_t)4 * H * H);
        b.assign((size_t)4 * H, 0.0);
        for (double& w : wx) w = rng->uniform(-k, k);
        for (double& w : wh) w = rng->uniform(-k, k);
        for (int j = 0; j < H; ++j) b[H + j] = 1.0;  // open forget gates at start
        gwx.assign(wx.size(), 0.0);
        gwh.assign(wh.size(), 0.0);
        gb.assign(b.size(), 0.0);
    }

    // x is L x in time-major; returns h sequence (L x H)
    const double* forward(const double* x, int L) {
        xs.assign(x, x + (size_t)L * in);
        hs.assign((size_t)(L + 1) * H, 0.0);
        cs.assign((size_t)(L + 1) * H, 0.0);
        act.resize((size_t)L * 4 * H);
        tc.resize((size_t)L * H);
        for (int t = 0; t < L; ++t) {
            const double* xt = &xs[(size_t)t * in];
            const double* hp = &hs[(size_t)t * H];
            double* a = &act[(size_t)t * 4 * H];
            for (int r = 0; r < 4 * H; ++r) {
                double z = b[r];
                const double* wxr = &wx[(size_t)r * in];
                for (int k = 0; k < in; ++k) z += wxr[k] * xt[k];
                const double* whr = &wh[(size_t)r * H];
                for (int k = 0; k < H; ++k) z += whr[k] * hp[k];
                a[r] = z;
            }
            for (int j = 0; j < H; ++j) {
                const double gi = sigmoid(a[j]);
                const double gf = sigmoid(a[H + j]);
                const double gg = std::tanh(a[2 * H + j]);
                const double go = sigmoid(a[3 * H + j]);
                a[j] = gi;
                a[H + j] = gf;
                a[2 * H + j] = gg;
                a[3 * H + j] = go;
                const double c = gf * cs[(size_t)t * H + j] + gi * gg;
                cs[(size_t)(t + 1) * H + j] = c;
                const double th = std::tanh(c);
                tc[(size_t)t * H + j] = th;
                hs[(size_t)(t + 1) * H + j] = go * th;
            }
        }
        return &hs[H];
    }

    // gh is L x H (gradient on each step's output); accumulates weight grads, fills gx
    void backward(const double* gh, int L) {
        gx.assign((size_t)L * in, 0.0);
        std::vector<double> dh_next(H, 0.0), dc_next(H, 0.0), gpre((size_t)4 * H);
        for (int t = L - 1; t >= 0; --t) {
            const double* a = &act[(size_t)t * 4 * H];
            for (int j = 0; j < H; ++j) {
                const double dh = gh[(size_t)t * H + j] + dh_next[j];
                const double gi = a[j], gf = a[H + j], gg = a[2 * H + j], go = a[3 * H + j];
                const double th = tc[(size_t)t * H + j];
                const double dc = dc_next[j] + dh * go * (1.0 - th * th);
                dc_next[j] = dc * gf;
                gpre[j] = dc * gg * gi * (1.0 - gi);
                gpre[H + j] = dc * cs[(size_t)t * H + j] * gf * (1.0 - gf);
                gpre[2 * H + j] = dc * gi * (1.0 - gg * gg);
                gpre[3 * H + j] = dh * th * go * (1.0 - go);
            }
            const double* xt = &xs[(size_t)t * in];
            const double* hp = &hs[(size_t)t * H];
            std::fill(dh_next.begin(), dh_next.end(), 0.0);
            for (int r = 0; r < 4 * H; ++r) {
                const double gp = gpre[r];
                gb[r] += gp;
                double* gwxr = &gwx[(size_t)r * in];
                for (int k = 0; k < in; ++k) gwxr[k] += gp * xt[k];
                double* gwhr = &gwh[(size_t)r * H];
                const double* whr = &wh[(size_t)r * H];
                for (int k = 0; k < H; ++k) {
                    gwhr[k] += gp * hp[k];
                    dh_next[k] += gp * whr[k];
                }
                const double* wxr = &wx[(size_t)r * in];
                double* gxt = &gx[(size_t)t * in];
                for (int k = 0; k < in; ++k) gxt[k] += gp * wxr[k];
            }
        }
    }
};

struct Discriminator {
    LstmLayer l1, l2;
    std::vector<double> hw;
    double hb = 0.0;
    std::vector<double> ghw;
    double ghb = 0.0;

    Discriminator(int channels, Rng* rng) {
        l1.init(channels, kHidden, rng);
        l2.init(kHidden, kHidden, rng);
        const double k = 1.0 / std::sqrt((double)kHidden);
        hw.resize(kHidden);
        for (double& w : hw) w = rng->uniform(-k, k);
        ghw.assign(kHidden, 0.0);
    }

    void zero_grad() {
        std::fill(l1.gwx.begin(), l1.gwx.end(), 0.0);
        std::fill(l1.gwh.begin(), l1.gwh.end(), 0.0);
        std::fill(l1.gb.begin(), l1.gb.end(), 0.0);
        std::fill(l2.gwx.begin(), l2.gwx.end(), 0.0);
        std::fill(l2.gwh.begin(), l2.gwh.end(), 0.0);
        std::fill(l2.gb.begin(), l2.gb.end(), 0.0);
        std::fill(ghw.begin(), ghw.end(), 0.0);
        ghb = 0.0;
    }

    double prob(const std::vector<double>& seq, int L) {
        const double* h1 = l1.forward(seq.data(), L);
        const double* h2 = l2.forward(h1, L);
        const double* last = &h2[(size_t)(L - 1) * kHidden];
        double z = hb;
        for (int j = 0; j < kHidden; ++j) z += hw[j] * last[j];
        return sigmoid(z);
    }

    // forward + BCE backward; dz already includes the batch normalizer
    void train_example(const std::vector<double>& seq, int L, double target, double inv_batch) {
        const double p = prob(seq, L);
        const double dz = (p - target) * inv_batch;
        const double* last = &l2.hs[(size_t)L * kHidden];
        std::vector<double> gh2((size_t)L * kHidden, 0.0);
        for (int j = 0; j < kHidden; ++j) {
            ghw[j] += dz * last[j];
            gh2[(size_t)(L - 1) * kHidden + j] = dz * hw[j];
        }
        ghb += dz;
        l2.backward(gh2.data(), L);
        l1.backward(l2.gx.data(), L);
    }
};

// time-major copy of a C x L signal
void to_sequence(const Signal& s, std::vector<double>* seq) {
    const int C = s.channels(), L = s.length();
    seq->resize((size_t)L * C);
    for (int c = 0; c < C; ++c) {
        const double* row = s.values.row(c);
        for (int t = 0; t < L; ++t) (*seq)[(size_t)t * C + c] = row[t];
    }
}

std::vector<size_t> stratified_train(size_t n, Rng* rng, size_t* n_train) {
    std::vector<size_t> idx(n);
    for (size_t i = 0; i < n; ++i) idx[i] = i;
    for (size_t i = n - 1; i > 0; --i) std::swap(idx[i], idx[rng->uniform_int(i + 1)]);
    size_t tr = (size_t)std::llround(0.75 * (double)n);
    if (tr == n) tr = n - 1;
    if (tr == 0) tr = 1;
    *n_train = tr;
    return idx;
}

}  // namespace

double discriminative_score(const Dataset& real_set, const Dataset& synth_set,
                            unsigned long long seed) {
    if ((int)real_set.size() < kMinPerSet || (int)synth_set.size() < kMinPerSet)
        throw std::invalid_argument(
            "discriminative_score: each set needs at least 20 signals (real=" +
            std::to_string(real_set.size()) + ", synth=" + std::to_string(synth_set.size()) + ")");
    const Signal& a = real_set.signals.front();
    const Signal& b = synth_set.signals.front();
    if (a.channels() != b.channels() || a.length() != b.length())
        throw std::invalid_argument("discriminative_score: real and synth signal shapes differ");
    const int C = a.channels(), L = a.length();

    // stratified 75/25: each set split independently, so both classes
    // appear in train and test at the same ratio
    Rng rr = stream_rng(seed, "disc_split", 0);
    Rng rs = stream_rng(seed, "disc_split", 1);
    size_t ntr_r = 0, ntr_s = 0;
    const std::vector<size_t> ir = stratified_train(real_set.size(), &rr, &ntr_r);
    const std::vector<size_t> is = stratified_train(synth_set.size(), &rs, &ntr_s);

    struct Ex {
        const Signal* s;
        double y;
    };
    std::vector<Ex> train, test;
    for (size_t k = 0; k < ir.size(); ++k)
        (k < ntr_r ? train : test).push_back({&real_set.signals[ir[k]], 1.0});
    for (size_t k = 0; k < is.size(); ++k)
        (k < ntr_s ? train : test).push_back({&synth_set.signals[is[k]], 0.0});

    Rng init_rng = stream_rng(seed, "disc_init");
    Discriminator net(C, &init_rng);
    FlatAdam opt;
    opt.attach(&net.l1.wx, &net.l1.gwx);
    opt.attach(&net.l1.wh, &net.l1.gwh);
    opt.attach(&net.l1.b, &net.l1.gb);
    opt.attach(&net.l2.wx, &net.l2.gwx);
    opt.attach(&net.l2.wh, &net.l2.gwh);
    opt.attach(&net.l2.b, &net.l2.gb);
    opt.attach(&net.hw, &net.ghw);
    opt.attach(&net.hb, &net.ghb);
    opt.finalize();

    const int epochs = 10, batch = 32;
    const double lr = 1e-3;
    std::vector<size_t> order(train.size());
    for (size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::vector<double> seq;
    for (int e = 0; e < epochs; ++e) {
        Rng erng = stream_rng(seed, "disc_epoch", e);
        for (size_t i = order.size() - 1; i > 0; --i)
            std::swap(order[i], order[erng.uniform_int(i + 1)]);
        for (size_t s = 0; s < order.size(); s += batch) {
            const size_t bn = std::min((size_t)batch, order.size() - s);
            net.zero_grad();
            for (size_t k = 0; k < bn; ++k) {
                const Ex& ex = train[order[s + k]];
                to_sequence(*ex.s, &seq);
                net.train_example(seq, L, ex.y, 1.0 / (double)bn);
            }
            opt.update(lr);
        }
    }

    size_t correct = 0;
    for (const Ex& ex : test) {
        to_sequence(*ex.s, &seq);
        const double p = net.prob(seq, L);
        if ((p > 0.5) == (ex.y > 0.5)) ++correct;
    }
    const double acc = (double)correct / (double)test.size();
    return std::min(std::fabs(0.5 - acc), 0.5);
}

}  // namespace biodiff
