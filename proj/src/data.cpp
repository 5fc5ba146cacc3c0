#include "biodiff/data.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <set>
#include <sstream>
#include <stdexcept>

#include "biodiff/errors.hpp"
#include "biodiff/rng.hpp"

namespace biodiff {

namespace {

std::string fmt(double v) {
    char buf[40];
    auto r = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, r.ptr);
}

std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '\r')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
    return s;
}

bool parse_double(std::string_view s, double* out) {
    s = trim(s);
    auto r = std::from_chars(s.data(), s.data() + s.size(), *out);
    return r.ec == std::errc() && r.ptr == s.data() + s.size();
}

bool parse_int(std::string_view s, long* out) {
    s = trim(s);
    auto r = std::from_chars(s.data(), s.data() + s.size(), *out);
    return r.ec == std::errc() && r.ptr == s.data() + s.size();
}

void split_fields(const std::string& line, std::vector<std::string_view>* fields) {
    fields->clear();
    const char* base = line.data();
    size_t start = 0;
    for (size_t i = 0; i <= line.size(); ++i) {
        if (i == line.size() || line[i] == ',') {
            fields->emplace_back(base + start, i - start);
            start = i + 1;
        }
    }
}

}  // namespace

// ---- simulated generator ----------------------------------------------------

Dataset gen_simulated(int n_per_class, unsigned long long seed, const SimOptions& opt) {
    if (n_per_class < 1) throw std::invalid_argument("gen_simulated: n_per_class must be >= 1");
    if (opt.length < 16) throw std::invalid_argument("gen_simulated: length must be >= 16");
    if (!(opt.obs_noise >= 0.0) || !std::isfinite(opt.obs_noise))
        throw std::invalid_argument("gen_simulated: obs_noise must be finite and >= 0");

    const int L = opt.length;
    Dataset ds;
    ds.channels = 1;
    ds.length = L;
    ds.signals.reserve(static_cast<size_t>(5 * n_per_class));

    // Observation model: a fixed broadband background rhythm (mains hum,
    // respiration, tremor, ... in a real rig) shared by every draw, plus 2%
    // white noise, normalized to unit total variance and scaled by obs_noise.
    // The rhythm spans the whole scale range so rows from the same cohort stay
    // mutually coherent the way pre-segmented recordings are.
    const double kWhiteFrac = 0.02;
    std::vector<double> rhythm(static_cast<size_t>(L), 0.0);
    {
        Rng phase_rng(0xb10d1ff);
        std::vector<double> periods, phases, amps;
        double var_sum = 0.0;
        for (double p = 2.2; p <= L / 2.0; p *= 1.25) {
            periods.push_back(p);
            phases.push_back(phase_rng.uniform(0.0, 2.0 * 3.14159265358979323846));
            amps.push_back(std::pow(p, -0.25));
            var_sum += amps.back() * amps.back() / 2.0;
        }
        const double norm = std::sqrt((1.0 - kWhiteFrac) / var_sum);
        for (size_t k = 0; k < periods.size(); ++k)
            for (int i = 0; i < L; ++i)
                rhythm[i] += norm * amps[k] *
                             std::sin(2.0 * 3.14159265358979323846 * i / periods[k] + phases[k]);
    }
    const double white_std = std::sqrt(kWhiteFrac);

    for (int c = 0; c < 5; ++c) {
        for (int j = 0; j < n_per_class; ++j) {
            Rng rng = stream_rng(seed, "sim", static_cast<uint64_t>(c) * n_per_class + j);
            const int lo = L / 8;
            const int hi = (c == 4) ? (3 * L) / 4 : L / 2;
            const int slen = lo + static_cast<int>(rng.uniform_int(static_cast<uint64_t>(hi - lo + 1)));
            // centered with a small jitter: rows model pre-segmented beats, so
            // morphology stays roughly aligned across draws
            const int jitter = static_cast<int>(rng.uniform_int(static_cast<uint64_t>(L / 8 + 1))) - L / 16;
            const int start = std::clamp((L - slen) / 2 + jitter, 0, L - slen);
            const double amp = ((c == 3) ? 12.0 : 6.0) + rng.gaussian();

            Signal raw;
            raw.values = Tensor(1, L, 0.0);
            for (int k = 0; k < slen; ++k) {
                double u = (slen > 1) ? static_cast<double>(k) / (slen - 1) : 1.0;
                double v = 0.0;
                switch (c) {
                    case 0: v = amp; break;              // cylinder
                    case 1: case 3: v = amp * u; break;  // bell: gradual rise
                    default: v = amp * (1.0 - u); break; // funnel: gradual decay
                }
                raw.values(0, start + k) = v;
            }
            if (opt.obs_noise != 0.0)
                for (int i = 0; i < L; ++i)
                    raw.values(0, i) += opt.obs_noise * (rhythm[i] + white_std * rng.gaussian());

            Signal s = normalize(raw);
            s.label = c;
            s.provenance = "sim";
            ds.signals.push_back(std::move(s));
        }
    }
    return ds;
}

std::string simulated_manifest(int n_per_class, unsigned long long seed, const SimOptions& opt) {
    const int L = opt.length;
    std::string m;
    m += "generator=cbf5\n";
    m += "seed=" + std::to_string(seed) + "\n";
    m += "n_per_class=" + std::to_string(n_per_class) + "\n";
    m += "channels=1\n";
    m += "length=" + std::to_string(L) + "\n";
    m += "obs_noise=" + fmt(opt.obs_noise) + "\n";
    m += "classes=5\n";
    auto support = [&](int c) {
        int hi = (c == 4) ? (3 * L) / 4 : L / 2;
        return "[" + std::to_string(L / 8) + "," + std::to_string(hi) + "]";
    };
    m += "class0=cylinder amp=6+N(0,1) support=" + support(0) + "\n";
    m += "class1=bell amp=6+N(0,1) support=" + support(1) + "\n";
    m += "class2=funnel amp=6+N(0,1) support=" + support(2) + "\n";
    m += "class3=bell amp=12+N(0,1) support=" + support(3) + "\n";
    m += "class4=funnel amp=6+N(0,1) support=" + support(4) + "\n";
    m += "placement=centered jitter=[-" + std::to_string(L / 16) + "," +
         std::to_string(L / 16) + "]\n";
    m += "background=rhythm(periods 2.2.." + std::to_string(L / 2) +
         " x1.25, amp~p^-0.25) + 2% white, unit variance, scaled by obs_noise\n";
    return m;
}

// ---- CSV ingestion ----------------------------------------------------------

Dataset load_csv(const std::string& path, const CsvLayout& layout) {
    if (layout.channels < 1 || layout.length < 0)
        throw std::invalid_argument(
            "load_csv: layout must declare channels >= 1 and length >= 0 (0 infers it)");
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path);

    const size_t extras = 1 + (layout.has_synth_flag ? 1 : 0);
    size_t nvals = static_cast<size_t>(layout.channels) * layout.length;
    size_t nfields = nvals + extras;

    Dataset ds;
    ds.channels = layout.channels;
    ds.length = layout.length;

    std::string line;
    std::vector<std::string_view> fields;
    long row = 0;
    bool first_content_row = true;
    while (std::getline(in, line)) {
        ++row;
        if (trim(line).empty()) continue;
        split_fields(line, &fields);

        if (first_content_row) {
            first_content_row = false;
            double probe;
            if (!parse_double(fields[0], &probe)) continue;  // header row
        }
        if (ds.length == 0) {  // infer length from the first data row
            if (fields.size() <= extras || (fields.size() - extras) % layout.channels != 0)
                throw ParseError(row, "cannot infer a length from " +
                                          std::to_string(fields.size()) + " fields over " +
                                          std::to_string(layout.channels) + " channels");
            ds.length = static_cast<int>((fields.size() - extras) / layout.channels);
            nvals = fields.size() - extras;
            nfields = fields.size();
        }
        if (fields.size() != nfields)
            throw ParseError(row, "expected " + std::to_string(nfields) + " fields, got " +
                                      std::to_string(fields.size()));

        Signal s;
        s.values = Tensor(layout.channels, ds.length);
        for (size_t f = 0; f < nvals; ++f) {
            double v;
            if (!parse_double(fields[f], &v))
                throw ParseError(row, "bad value '" + std::string(trim(fields[f])) + "' in field " +
                                          std::to_string(f + 1));
            s.values.v[f] = v;
        }
        long label;
        if (!parse_int(fields[nvals], &label))
            throw ParseError(row, "bad label '" + std::string(trim(fields[nvals])) + "'");
        if (label < -1) throw ParseError(row, "label " + std::to_string(label) + " is negative");
        if (label >= 0) {
            if (layout.num_classes && label >= *layout.num_classes)
                throw InvalidLabel(row, static_cast<int>(label), *layout.num_classes);
            s.label = static_cast<int>(label);
        }
        if (layout.has_synth_flag) {
            long flag;
            if (!parse_int(fields[nvals + 1], &flag) || (flag != 0 && flag != 1))
                throw ParseError(row, "bad synthetic flag '" + std::string(trim(fields[nvals + 1])) + "'");
            s.synthetic = flag != 0;
        }
        s.provenance = "csv";
        if (layout.normalize) {
            Signal n = normalize(s);
            ds.signals.push_back(std::move(n));
        } else {
            ds.signals.push_back(std::move(s));
        }
    }
    if (in.bad()) throw IoError("read failure on " + path);
    if (ds.signals.empty()) throw EmptyDataset(path + " has no data rows");
    return ds;
}

void write_csv(const std::string& path, const Dataset& ds, bool synth_flag_column) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot open " + path + " for writing");
    std::string buf;
    for (const Signal& s : ds.signals) {
        const Signal* w = &s;
        Signal denorm;
        if (!s.norm_range.empty()) {
            denorm = denormalize(s);
            w = &denorm;
        }
        buf.clear();
        for (size_t i = 0; i < w->values.v.size(); ++i) {
            if (i) buf += ',';
            buf += fmt(w->values.v[i]);
        }
        buf += ',';
        buf += std::to_string(s.label ? *s.label : -1);
        if (synth_flag_column) {
            buf += ',';
            buf += s.synthetic ? '1' : '0';
        }
        buf += '\n';
        out << buf;
    }
    if (!out) throw IoError("write failure on " + path);
}

std::map<int, int> class_counts(const Dataset& ds) {
    std::map<int, int> counts;
    for (const Signal& s : ds.signals) ++counts[s.label ? *s.label : -1];
    return counts;
}

// ---- shape / range utilities ------------------------------------------------

Signal resample_length(const Signal& x, int target_len) {
    const int C = x.channels();
    const int L = x.length();
    if (target_len < 2) throw std::invalid_argument("resample_length: target length must be >= 2");
    if (L < 2) throw std::invalid_argument("resample_length: source length must be >= 2");

    Signal y = x;
    y.mask_positions.clear();  // positions are no longer meaningful
    if (target_len == L) return y;

    y.values = Tensor(C, target_len);
    const double step = static_cast<double>(L - 1) / (target_len - 1);
    for (int c = 0; c < C; ++c) {
        const double* src = x.values.row(c);
        double* dst = y.values.row(c);
        for (int i = 0; i < target_len; ++i) {
            double pos = i * step;
            int i0 = static_cast<int>(pos);
            if (i0 >= L - 1) {
                dst[i] = src[L - 1];
            } else {
                double frac = pos - i0;
                dst[i] = (1.0 - frac) * src[i0] + frac * src[i0 + 1];
            }
        }
    }
    return y;
}

Dataset resample_length(const Dataset& ds, int target_len) {
    Dataset out;
    out.channels = ds.channels;
    out.length = target_len;
    out.signals.reserve(ds.signals.size());
    for (const Signal& s : ds.signals) out.signals.push_back(resample_length(s, target_len));
    return out;
}

Signal normalize(const Signal& x) {
    const int C = x.channels();
    const int L = x.length();
    Signal y = x;
    y.norm_range.assign(C, {0.0, 0.0});
    for (int c = 0; c < C; ++c) {
        const double* src = x.values.row(c);
        double mn = src[0], mx = src[0];
        for (int i = 0; i < L; ++i) {
            if (!std::isfinite(src[i]))
                throw std::invalid_argument("normalize: non-finite value in channel " + std::to_string(c));
            mn = std::min(mn, src[i]);
            mx = std::max(mx, src[i]);
        }
        y.norm_range[c] = {mn, mx};
        double* dst = y.values.row(c);
        if (mx == mn) {
            for (int i = 0; i < L; ++i) dst[i] = 0.0;
        } else {
            // divide (rather than multiply by a reciprocal) so min and max land
            // on exactly -1 and +1
            double d = mx - mn;
            for (int i = 0; i < L; ++i) dst[i] = 2.0 * (src[i] - mn) / d - 1.0;
        }
    }
    return y;
}

Signal denormalize(const Signal& x) {
    const int C = x.channels();
    if (static_cast<int>(x.norm_range.size()) != C)
        throw std::invalid_argument("denormalize: signal carries no normalization metadata");
    Signal y = x;
    y.norm_range.clear();
    for (int c = 0; c < C; ++c) {
        auto [mn, mx] = x.norm_range[c];
        double* dst = y.values.row(c);
        for (int i = 0; i < x.length(); ++i) dst[i] = (dst[i] + 1.0) * 0.5 * (mx - mn) + mn;
    }
    return y;
}

// ---- corruption -------------------------------------------------------------

CorruptionKind corruption_kind_from_string(const std::string& name) {
    if (name == "thermal") return CorruptionKind::thermal;
    if (name == "drift") return CorruptionKind::drift;
    if (name == "spikes") return CorruptionKind::spikes;
    if (name == "mask") return CorruptionKind::mask;
    if (name == "downsample") return CorruptionKind::downsample;
    throw std::invalid_argument("unknown corruption kind '" + name + "'");
}

std::string to_string(CorruptionKind kind) {
    switch (kind) {
        case CorruptionKind::thermal: return "thermal";
        case CorruptionKind::drift: return "drift";
        case CorruptionKind::spikes: return "spikes";
        case CorruptionKind::mask: return "mask";
        case CorruptionKind::downsample: return "downsample";
    }
    throw std::invalid_argument("unknown corruption kind");
}

namespace {

std::set<int> distinct_positions(Rng* rng, int count, int len) {
    std::set<int> pos;
    while (static_cast<int>(pos.size()) < count)
        pos.insert(static_cast<int>(rng->uniform_int(static_cast<uint64_t>(len))));
    return pos;
}

}  // namespace

Signal corrupt(const Signal& x, const CorruptionSpec& spec) {
    const int C = x.channels();
    const int L = x.length();
    if (C < 1 || L < 1) throw std::invalid_argument("corrupt: empty signal");
    if (!std::isfinite(spec.amplitude) || spec.amplitude < 0.0)
        throw std::invalid_argument("corrupt: amplitude must be finite and >= 0");
    if (!std::isfinite(spec.rate) || spec.rate < 0.0 || spec.rate > 1.0)
        throw std::invalid_argument("corrupt: rate must lie in [0, 1]");

    Rng rng(derive_seed(spec.seed, to_string(spec.kind)));
    Signal y = x;

    switch (spec.kind) {
        case CorruptionKind::thermal: {
            if (spec.amplitude == 0.0) return y;
            for (double& v : y.values.v) v += spec.amplitude * rng.gaussian();
            break;
        }
        case CorruptionKind::drift: {
            if (spec.amplitude == 0.0) return y;
            const int nsin = 1 + static_cast<int>(rng.uniform_int(3));
            std::vector<double> period(nsin), phase(nsin), weight(nsin);
            for (int k = 0; k < nsin; ++k) {
                period[k] = rng.uniform(L / 2.0, 2.0 * L);
                phase[k] = rng.uniform(0.0, 6.283185307179586);
                weight[k] = rng.uniform(0.5, 1.0);
            }
            std::vector<double> base(L, 0.0);
            double peak = 0.0;
            for (int i = 0; i < L; ++i) {
                double b = 0.0;
                for (int k = 0; k < nsin; ++k)
                    b += weight[k] * std::sin(6.283185307179586 * i / period[k] + phase[k]);
                base[i] = b;
                peak = std::max(peak, std::abs(b));
            }
            double scale = peak > 1e-12 ? spec.amplitude / peak : 0.0;
            for (int c = 0; c < C; ++c) {
                double* row = y.values.row(c);
                for (int i = 0; i < L; ++i) row[i] += scale * base[i];
            }
            break;
        }
        case CorruptionKind::spikes: {
            if (spec.amplitude == 0.0 || spec.rate == 0.0) return y;
            const int count = static_cast<int>(std::lround(spec.rate * L));
            if (count == 0) return y;
            std::set<int> pos = distinct_positions(&rng, count, L);
            for (int p : pos) {
                double sign = rng.uniform() < 0.5 ? -1.0 : 1.0;
                int width = 1 + static_cast<int>(rng.uniform_int(3));
                for (int i = p; i < std::min(p + width, L); ++i)
                    for (int c = 0; c < C; ++c) y.values(c, i) += sign * spec.amplitude;
            }
            break;
        }
        case CorruptionKind::mask: {
            const int count = static_cast<int>(std::lround(spec.rate * L));
            if (count == 0) return y;
            std::set<int> pos = distinct_positions(&rng, count, L);
            y.mask_positions.assign(pos.begin(), pos.end());
            for (int p : pos)
                for (int c = 0; c < C; ++c) y.values(c, p) = 0.0;
            break;
        }
        case CorruptionKind::downsample: {
            if (spec.factor < 1) throw std::invalid_argument("corrupt: downsample factor must be >= 1");
            if (L % spec.factor != 0)
                throw std::invalid_argument("corrupt: length " + std::to_string(L) +
                                            " not divisible by factor " + std::to_string(spec.factor));
            if (spec.factor == 1) return y;
            const int f = spec.factor;
            const int kept = L / f;
            for (int c = 0; c < C; ++c) {
                const double* src = x.values.row(c);
                double* dst = y.values.row(c);
                for (int i = 0; i < L; ++i) {
                    int j = i / f;
                    if (j + 1 < kept) {
                        double frac = static_cast<double>(i - j * f) / f;
                        dst[i] = (1.0 - frac) * src[j * f] + frac * src[(j + 1) * f];
                    } else {
                        int r = i - j * f;
                        dst[i] = r == 0 ? src[j * f] : src[(kept - 1) * f];
                    }
                }
            }
            break;
        }
    }
    return y;
}

}  // namespace biodiff
