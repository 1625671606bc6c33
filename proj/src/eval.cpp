#include "tracerag/eval.hpp"

namespace tracerag::eval {

ConfusionCounts confusion(const std::map<std::string, bool>& predictions,
                          const std::map<std::string, bool>& truth) {
    if (predictions.size() != truth.size()) {
        throw KeyMismatch();
    }
    ConfusionCounts c;
    for (const auto& [id, predicted] : predictions) {
        auto it = truth.find(id);
        if (it == truth.end()) {
            throw KeyMismatch();
        }
        bool actual = it->second;
        if (predicted && actual) ++c.tp;
        else if (predicted && !actual) ++c.fp;
        else if (!predicted && actual) ++c.fn;
        else ++c.tn;
    }
    return c;
}

namespace {

std::optional<double> ratio(std::int64_t num, std::int64_t den) {
    if (den == 0) return std::nullopt;
    return static_cast<double>(num) / static_cast<double>(den);
}

} // namespace

BinaryMetrics binary_metrics(const ConfusionCounts& c) {
    if (c.total() == 0) {
        throw EmptyCounts();
    }
    BinaryMetrics m;
    m.accuracy = ratio(c.tp + c.tn, c.total());
    m.precision = ratio(c.tp, c.tp + c.fp);
    m.recall = ratio(c.tp, c.tp + c.fn);
    if (m.precision && m.recall && (*m.precision + *m.recall) > 0.0) {
        m.f1 = 2.0 * (*m.precision) * (*m.recall) / (*m.precision + *m.recall);
    }
    return m;
}

MicroMetrics micro_metrics(const std::vector<ConfusionCounts>& per_category) {
    if (per_category.empty()) {
        throw EmptyCounts();
    }
    ConfusionCounts pooled;
    for (const ConfusionCounts& c : per_category) {
        pooled.tp += c.tp;
        pooled.fp += c.fp;
        pooled.fn += c.fn;
        pooled.tn += c.tn;
    }
    if (pooled.total() == 0) {
        throw EmptyCounts();
    }
    BinaryMetrics b = binary_metrics(pooled);
    return MicroMetrics{b.precision, b.recall, b.f1};
}

double behavior_accuracy(std::int64_t correct, std::int64_t total) {
    if (total <= 0) {
        throw ZeroTotal();
    }
    if (correct < 0 || correct > total) {
        throw std::invalid_argument("correct must lie in [0, total]");
    }
    return static_cast<double>(correct) / static_cast<double>(total);
}

} // namespace tracerag::eval
