#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <map>
#include <stdexcept>
#include <variant>

#include "biodiff/engine.hpp"
#include "biodiff/errors.hpp"

namespace biodiff {

namespace {

constexpr char kMagic[4] = {'B', 'D', 'I', 'F'};
constexpr uint32_t kFormatVersion = 1;

enum : uint8_t { kI64 = 0, kF64 = 1, kStr = 2, kF64Vec = 3 };

// explicit little-endian encoding, independent of host order
void put_u32(std::string* out, uint32_t v) {
    for (int i = 0; i < 4; ++i) out->push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

void put_u64(std::string* out, uint64_t v) {
    for (int i = 0; i < 8; ++i) out->push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

void put_f64(std::string* out, double v) { put_u64(out, std::bit_cast<uint64_t>(v)); }

void put_name(std::string* out, const std::string& name) {
    put_u32(out, static_cast<uint32_t>(name.size()));
    out->append(name);
}

void add_i64(std::string* out, const std::string& name, int64_t v) {
    put_name(out, name);
    out->push_back(kI64);
    put_u64(out, static_cast<uint64_t>(v));
}

void add_f64(std::string* out, const std::string& name, double v) {
    put_name(out, name);
    out->push_back(kF64);
    put_f64(out, v);
}

void add_str(std::string* out, const std::string& name, const std::string& v) {
    put_name(out, name);
    out->push_back(kStr);
    put_u64(out, v.size());
    out->append(v);
}

void add_vec(std::string* out, const std::string& name, const std::vector<double>& v) {
    put_name(out, name);
    out->push_back(kF64Vec);
    put_u64(out, v.size());
    for (double x : v) put_f64(out, x);
}

struct Entry {
    uint8_t type;
    int64_t i = 0;
    double f = 0.0;
    std::string s;
    std::vector<double> vec;
};

class Reader {
public:
    Reader(const std::string& buf) : buf_(buf) {}

    uint8_t u8() {
        need(1, "byte");
        return static_cast<uint8_t>(buf_[pos_++]);
    }
    uint32_t u32() {
        need(4, "u32");
        uint32_t v = 0;
        for (int i = 0; i < 4; ++i) v |= static_cast<uint32_t>(static_cast<uint8_t>(buf_[pos_++])) << (8 * i);
        return v;
    }
    uint64_t u64() {
        need(8, "u64");
        uint64_t v = 0;
        for (int i = 0; i < 8; ++i) v |= static_cast<uint64_t>(static_cast<uint8_t>(buf_[pos_++])) << (8 * i);
        return v;
    }
    double f64() { return std::bit_cast<double>(u64()); }
    std::string str(size_t n) {
        need(n, "string payload");
        std::string s = buf_.substr(pos_, n);
        pos_ += n;
        return s;
    }
    bool done() const { return pos_ == buf_.size(); }
    size_t pos() const { return pos_; }

private:
    void need(size_t n, const char* what) {
        if (pos_ + n > buf_.size())
            throw CorruptCheckpoint(std::string("truncated file reading ") + what + " at offset " +
                                    std::to_string(pos_));
    }
    const std::string& buf_;
    size_t pos_ = 0;
};

class EntryMap {
public:
    explicit EntryMap(std::map<std::string, Entry> m) : m_(std::move(m)) {}

    int64_t i64(const std::string& name) const { return get(name, kI64).i; }
    double f64(const std::string& name) const { return get(name, kF64).f; }
    const std::string& str(const std::string& name) const { return get(name, kStr).s; }
    const std::vector<double>& vec(const std::string& name) const { return get(name, kF64Vec).vec; }

private:
    const Entry& get(const std::string& name, uint8_t type) const {
        auto it = m_.find(name);
        if (it == m_.end()) throw CorruptCheckpoint("missing entry '" + name + "'");
        if (it->second.type != type)
            throw CorruptCheckpoint("entry '" + name + "' has wrong type");
        return it->second;
    }
    std::map<std::string, Entry> m_;
};

}  // namespace

void save_checkpoint(const std::string& path, const Checkpoint& ckpt) {
    std::string out;
    out.append(kMagic, 4);
    put_u32(&out, kFormatVersion);

    add_i64(&out, "model.in_channels", ckpt.config.in_channels);
    add_i64(&out, "model.signal_length", ckpt.config.signal_length);
    add_i64(&out, "model.base_channels", ckpt.config.base_channels);
    std::vector<double> mults(ckpt.config.channel_mults.begin(), ckpt.config.channel_mults.end());
    add_vec(&out, "model.channel_mults", mults);
    add_i64(&out, "model.res_groups", ckpt.config.res_groups);
    add_i64(&out, "model.attn_heads", ckpt.config.attn_heads);
    add_i64(&out, "model.num_classes", ckpt.config.num_classes ? *ckpt.config.num_classes : -1);
    add_i64(&out, "model.signal_cond", ckpt.config.signal_cond ? 1 : 0);
    add_f64(&out, "model.cond_drop_prob", ckpt.config.cond_drop_prob);
    add_i64(&out, "model.time_embed_dim", ckpt.config.time_embed_dim);

    add_str(&out, "schedule.kind", to_string(ckpt.schedule_kind));
    add_i64(&out, "schedule.timesteps", ckpt.timesteps);
    add_str(&out, "train.regime", to_string(ckpt.regime));
    add_i64(&out, "train.epochs_completed", ckpt.epochs_completed);
    add_f64(&out, "train.best_val_loss", ckpt.best_val_loss);
    add_i64(&out, "train.seed", static_cast<int64_t>(ckpt.seed));
    add_str(&out, "provenance", ckpt.provenance);

    add_vec(&out, "weights", ckpt.weights);
    add_vec(&out, "ema_weights", ckpt.ema_weights);
    add_vec(&out, "opt.m", ckpt.opt.m);
    add_vec(&out, "opt.v", ckpt.opt.v);
    add_i64(&out, "opt.step", ckpt.opt.step);

    std::ofstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot open " + path + " for writing");
    f.write(out.data(), static_cast<std::streamsize>(out.size()));
    if (!f) throw IoError("write failure on " + path);
}

Checkpoint load_checkpoint(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot open " + path);
    std::string buf((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
    if (f.bad()) throw IoError("read failure on " + path);

    Reader r(buf);
    if (buf.size() < 8) throw CorruptCheckpoint("file shorter than header");
    if (std::memcmp(buf.data(), kMagic, 4) != 0) throw CorruptCheckpoint("bad magic");
    r.str(4);
    uint32_t version = r.u32();
    if (version != kFormatVersion)
        throw UnsupportedVersion(static_cast<int>(version), static_cast<int>(kFormatVersion));

    std::map<std::string, Entry> entries;
    while (!r.done()) {
        uint32_t name_len = r.u32();
        std::string name = r.str(name_len);
        Entry e;
        e.type = r.u8();
        switch (e.type) {
            case kI64: e.i = static_cast<int64_t>(r.u64()); break;
            case kF64: e.f = r.f64(); break;
            case kStr: {
                uint64_t n = r.u64();
                e.s = r.str(n);
                break;
            }
            case kF64Vec: {
                uint64_t n = r.u64();
                e.vec.resize(n);
                for (uint64_t i = 0; i < n; ++i) e.vec[i] = r.f64();
                break;
            }
            default:
                throw CorruptCheckpoint("unknown entry type " + std::to_string(e.type) +
                                        " at offset " + std::to_string(r.pos()));
        }
        entries.emplace(std::move(name), std::move(e));
    }
    EntryMap m(std::move(entries));

    Checkpoint c;
    c.config.in_channels = static_cast<int>(m.i64("model.in_channels"));
    c.config.signal_length = static_cast<int>(m.i64("model.signal_length"));
    c.config.base_channels = static_cast<int>(m.i64("model.base_channels"));
    c.config.channel_mults.clear();
    for (double v : m.vec("model.channel_mults")) c.config.channel_mults.push_back(static_cast<int>(v));
    c.config.res_groups = static_cast<int>(m.i64("model.res_groups"));
    c.config.attn_heads = static_cast<int>(m.i64("model.attn_heads"));
    int64_t ncls = m.i64("model.num_classes");
    c.config.num_classes = ncls >= 0 ? std::optional<int>(static_cast<int>(ncls)) : std::nullopt;
    c.config.signal_cond = m.i64("model.signal_cond") != 0;
    c.config.cond_drop_prob = m.f64("model.cond_drop_prob");
    c.config.time_embed_dim = static_cast<int>(m.i64("model.time_embed_dim"));

    c.schedule_kind = schedule_kind_from_string(m.str("schedule.kind"));
    c.timesteps = static_cast<int>(m.i64("schedule.timesteps"));
    c.regime = regime_from_string(m.str("train.regime"));
    c.epochs_completed = m.i64("train.epochs_completed");
    c.best_val_loss = m.f64("train.best_val_loss");
    c.seed = static_cast<unsigned long long>(m.i64("train.seed"));
    c.provenance = m.str("provenance");
    c.weights = m.vec("weights");
    c.ema_weights = m.vec("ema_weights");
    c.opt.m = m.vec("opt.m");
    c.opt.v = m.vec("opt.v");
    c.opt.step = m.i64("opt.step");
    return c;
}

}  // namespace biodiff
