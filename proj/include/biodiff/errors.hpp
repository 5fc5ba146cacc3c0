#pragma once

#include <stdexcept>
#include <string>

namespace biodiff {

// Thrown when a training step produces a non-finite loss.
class TrainingDiverged : public std::runtime_error {
public:
    TrainingDiverged(long step, const std::string& detail)
        : std::runtime_error("training diverged at step " + std::to_string(step) + ": " + detail),
          step_(step) {}
    long step() const { return step_; }

private:
    long step_;
};

// Checkpoint file is damaged or not a checkpoint at all.
class CorruptCheckpoint : public std::runtime_error {
public:
    explicit CorruptCheckpoint(const std::string& detail)
        : std::runtime_error("corrupt checkpoint: " + detail) {}
};

// Checkpoint written by an incompatible format version.
class UnsupportedVersion : public std::runtime_error {
public:
    UnsupportedVersion(int found, int supported)
        : std::runtime_error("unsupported checkpoint version " + std::to_string(found) +
                             " (supported: " + std::to_string(supported) + ")"),
          found_(found), supported_(supported) {}
    int found() const { return found_; }
    int supported() const { return supported_; }

private:
    int found_, supported_;
};

// CSV / config text could not be parsed.
class ParseError : public std::runtime_error {
public:
    ParseError(long row, const std::string& detail)
        : std::runtime_error("parse error at row " + std::to_string(row) + ": " + detail),
          row_(row) {}
    long row() const { return row_; }

private:
    long row_;
};

// Row carries a label outside the declared class range.
class InvalidLabel : public ParseError {
public:
    InvalidLabel(long row, int label, int num_classes)
        : ParseError(row, "label " + std::to_string(label) + " outside [0, " +
                              std::to_string(num_classes - 1) + "]"),
          label_(label) {}
    int label() const { return label_; }

private:
    int label_;
};

// File parsed fine but contained no usable rows.
class EmptyDataset : public std::runtime_error {
public:
    explicit EmptyDataset(const std::string& detail)
        : std::runtime_error("empty dataset: " + detail) {}
};

// File could not be opened / read / written.
class IoError : public std::runtime_error {
public:
    explicit IoError(const std::string& detail) : std::runtime_error("io error: " + detail) {}
};

}  // namespace biodiff
