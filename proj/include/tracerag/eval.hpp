#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace tracerag::eval {

struct ConfusionCounts {
    std::int64_t tp = 0;
    std::int64_t fp = 0;
    std::int64_t fn = 0;
    std::int64_t tn = 0;

    std::int64_t total() const { return tp + fp + fn + tn; }

    bool operator==(const ConfusionCounts&) const = default;
};

struct KeyMismatch : std::runtime_error {
    KeyMismatch() : std::runtime_error("prediction and truth key sets differ") {}
};

struct EmptyCounts : std::runtime_error {
    EmptyCounts() : std::runtime_error("no samples to evaluate") {}
};

struct ZeroTotal : std::runtime_error {
    ZeroTotal() : std::runtime_error("behavior accuracy over zero total") {}
};

ConfusionCounts confusion(const std::map<std::string, bool>& predictions,
                          const std::map<std::string, bool>& truth);

// A 0/0 ratio is reported as nullopt, never silently as zero.
struct BinaryMetrics {
    std::optional<double> accuracy;
    std::optional<double> precision;
    std::optional<double> recall;
    std::optional<double> f1;
};

BinaryMetrics binary_metrics(const ConfusionCounts& c);

struct MicroMetrics {
    std::optional<double> precision;
    std::optional<double> recall;
    std::optional<double> f1;
};

// Pools tp/fp/fn across categories, then applies the binary formulas.
MicroMetrics micro_metrics(const std::vector<ConfusionCounts>& per_category);

double behavior_accuracy(std::int64_t correct, std::int64_t total);

} // namespace tracerag::eval
