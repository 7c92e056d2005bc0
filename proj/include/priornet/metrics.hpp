#pragma once

#include <cstddef>
#include <stdexcept>
#include <vector>

namespace priornet {

struct ClassMetrics {
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
    std::size_t support = 0;
};

struct MetricsReport {
    double accuracy = 0.0;
    double weighted_f1 = 0.0;
    std::vector<ClassMetrics> per_class;
    std::vector<std::vector<std::size_t>> confusion;  // [true][pred]

    std::size_t num_classes() const { return per_class.size(); }
};

// Confusion-matrix bookkeeping from parallel label/prediction lists.
inline MetricsReport compute_metrics(const std::vector<int>& labels,
                                     const std::vector<int>& predictions,
                                     std::size_t num_classes) {
    if (labels.size() != predictions.size())
        throw std::invalid_argument("compute_metrics: size mismatch");
    if (labels.empty()) throw std::invalid_argument("compute_metrics: empty input");
    MetricsReport report;
    report.confusion.assign(num_classes, std::vector<std::size_t>(num_classes, 0));
    for (std::size_t i = 0; i < labels.size(); ++i) {
        if (labels[i] < 0 || static_cast<std::size_t>(labels[i]) >= num_classes ||
            predictions[i] < 0 || static_cast<std::size_t>(predictions[i]) >= num_classes)
            throw std::out_of_range("compute_metrics: class index out of range");
        ++report.confusion[labels[i]][predictions[i]];
    }
    std::size_t correct = 0;
    for (std::size_t c = 0; c < num_classes; ++c) correct += report.confusion[c][c];
    report.accuracy = static_cast<double>(correct) / static_cast<double>(labels.size());

    report.per_class.resize(num_classes);
    double weighted = 0.0;
    std::size_t total_support = 0;
    for (std::size_t c = 0; c < num_classes; ++c) {
        std::size_t tp = report.confusion[c][c];
        std::size_t actual = 0, predicted = 0;
        for (std::size_t j = 0; j < num_classes; ++j) {
            actual += report.confusion[c][j];
            predicted += report.confusion[j][c];
        }
        auto& m = report.per_class[c];
        m.support = actual;
        m.precision = predicted > 0 ? static_cast<double>(tp) / static_cast<double>(predicted) : 0.0;
        m.recall = actual > 0 ? static_cast<double>(tp) / static_cast<double>(actual) : 0.0;
        m.f1 = (m.precision + m.recall) > 0.0
                   ? 2.0 * m.precision * m.recall / (m.precision + m.recall)
                   : 0.0;
        weighted += static_cast<double>(m.support) * m.f1;
        total_support += m.support;
    }
    report.weighted_f1 = total_support > 0 ? weighted / static_cast<double>(total_support) : 0.0;
    return report;
}

} // namespace priornet
