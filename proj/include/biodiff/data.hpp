#pragma once

#include <map>
#include <optional>
#include <string>

#include "biodiff/signal.hpp"

namespace biodiff {

// ---- simulated generator ----------------------------------------------------

struct SimOptions {
    // scale of the additive observation term: a fixed background rhythm plus
    // 2% white noise, unit variance at 1.0; 0 disables it entirely
    double obs_noise = 1.0;
    int length = 512;
};

// Five labelled waveform classes on a single channel, normalized per signal to
// [-1, 1].  Layout: class 0 first (n_per_class signals), then class 1, ...
Dataset gen_simulated(int n_per_class, unsigned long long seed, const SimOptions& opt = {});

// key=value description of a gen_simulated run, one entry per line.
std::string simulated_manifest(int n_per_class, unsigned long long seed,
                               const SimOptions& opt = {});

// ---- CSV ingestion ----------------------------------------------------------

struct CsvLayout {
    int channels = 1;
    int length = 0;
    // When set, labels must fall in [0, num_classes); out-of-range rows throw
    // InvalidLabel.  Unset: any integer label is accepted (-1 = unlabeled).
    std::optional<int> num_classes;
    bool has_synth_flag = false;  // trailing 0/1 column after the label
    bool normalize = true;        // min-max normalize each signal on load
};

// One signal per row: channels*length values channel-major, then an integer
// label, then (optionally) a 0/1 synthetic flag.  A single leading header row
// is skipped if its first field is not numeric.
Dataset load_csv(const std::string& path, const CsvLayout& layout);

// Inverse of load_csv.  Signals carrying normalization metadata are written
// back in their original units.  Values use shortest round-trip formatting so
// a rewrite of an unmodified dataset is byte-stable.
void write_csv(const std::string& path, const Dataset& ds, bool synth_flag_column = false);

std::map<int, int> class_counts(const Dataset& ds);

// ---- shape / range utilities ------------------------------------------------

// Linear resample of every channel to target_len.  Endpoints are preserved
// exactly; target_len == length is an exact copy.
Signal resample_length(const Signal& x, int target_len);
Dataset resample_length(const Dataset& ds, int target_len);

// Per-channel min-max map onto [-1, 1]; constant channels map to 0.  The
// (min, max) pair per channel is stored on the signal so denormalize can
// restore original units.
Signal normalize(const Signal& x);
Signal denormalize(const Signal& x);

// ---- corruption -------------------------------------------------------------

enum class CorruptionKind { thermal, drift, spikes, mask, downsample };

CorruptionKind corruption_kind_from_string(const std::string& name);
std::string to_string(CorruptionKind kind);

struct CorruptionSpec {
    CorruptionKind kind = CorruptionKind::thermal;
    double amplitude = 0.0;        // thermal / drift / spikes strength
    double rate = 0.0;             // spikes / mask: fraction of positions hit
    int factor = 2;                // downsample decimation factor
    unsigned long long seed = 0;
};

// Deterministic degradation; output shape always equals input shape
// (downsample interpolates back to full length).  Masked positions are
// recorded on the returned signal.
Signal corrupt(const Signal& x, const CorruptionSpec& spec);

}  // namespace biodiff
