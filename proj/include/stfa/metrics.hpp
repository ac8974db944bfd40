#pragma once

#include <cstdint>
#include <optional>
#include <utility>
#include <vector>

namespace stfa {

struct ConfusionMatrix {
    std::int64_t tp = 0;
    std::int64_t fn = 0;
    std::int64_t fp = 0;
    std::int64_t tn = 0;

    std::int64_t total() const { return tp + fn + fp + tn; }
};

// Rates are absent (not zero) when their denominator is empty.
struct Metrics {
    std::optional<double> accuracy;
    std::optional<double> recall;     // tp / (tp + fn)
    std::optional<double> tnr;        // tn / (tn + fp)
    std::optional<double> precision;  // tp / (tp + fp)
};

// Positive class is fake (label 1); predicted positive iff score >= threshold.
ConfusionMatrix confusion(const std::vector<double>& scores, const std::vector<int>& labels, double threshold);

Metrics metrics(const ConfusionMatrix& cm);

// Mann-Whitney rank statistic with midranks for ties: the probability that a
// random positive outscores a random negative, ties counting one half.
double auc(const std::vector<double>& scores, const std::vector<int>& labels);

// (fpr, tpr) swept over distinct scores descending, from (0,0) to (1,1).
std::vector<std::pair<double, double>> roc_points(const std::vector<double>& scores, const std::vector<int>& labels);

double trapezoid_area(const std::vector<std::pair<double, double>>& points);

}  // namespace stfa
