#pragma once

#include <stdexcept>
#include <string>

namespace lstmpipe {

// Dimension/contract violations in model construction or forward execution.
struct SpecError : std::runtime_error {
    explicit SpecError(const std::string& msg) : std::runtime_error(msg) {}
};

// Malformed or inconsistent model manifest files.
struct ManifestError : std::runtime_error {
    explicit ManifestError(const std::string& msg) : std::runtime_error(msg) {}
};

// Bad input data (empty datasets, single-class benchmarks, unreadable CSV).
struct DataError : std::runtime_error {
    explicit DataError(const std::string& msg) : std::runtime_error(msg) {}
};

// Training diverged (loss became non-finite) at the recorded epoch.
struct TrainDivergence : std::runtime_error {
    int epoch;
    explicit TrainDivergence(int at)
        : std::runtime_error("training diverged (non-finite loss) at epoch " + std::to_string(at)),
          epoch(at) {}
};

}  // namespace lstmpipe
