#pragma once

#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "biodiff/tensor.hpp"

namespace biodiff {

// A multichannel 1-D series with optional label and provenance metadata.
struct Signal {
    Tensor values;                       // C x L
    std::optional<int> label;            // class id, >= 0
    std::optional<std::string> subject_id;
    bool synthetic = false;              // set on generated / augmented rows
    std::string provenance;              // e.g. restoration task name

    // per-channel (min, max) before normalization; empty if never normalized
    std::vector<std::pair<double, double>> norm_range;
    // time indices zeroed by mask corruption, empty otherwise
    std::vector<int> mask_positions;

    Signal() = default;
    explicit Signal(Tensor t) : values(std::move(t)) {}
    Signal(int ch, int len) : values(ch, len) {}

    int channels() const { return values.ch; }
    int length() const { return values.len; }
};

struct Dataset {
    int channels = 0;
    int length = 0;
    std::vector<Signal> signals;

    size_t size() const { return signals.size(); }
    bool empty() const { return signals.empty(); }
};

}  // namespace biodiff
