#include "stfa/metrics.hpp"

#include <algorithm>
#include <numeric>
#include <stdexcept>
#include <string>

namespace stfa {

namespace {

void validate(const std::vector<double>& scores, const std::vector<int>& labels) {
    if (scores.empty()) throw std::invalid_argument("metrics: empty score list");
    if (scores.size() != labels.size())
        throw std::invalid_argument("metrics: " + std::to_string(scores.size()) + " scores vs " +
                                    std::to_string(labels.size()) + " labels");
    for (int l : labels)
        if (l != 0 && l != 1) throw std::invalid_argument("metrics: labels must be 0 or 1, got " + std::to_string(l));
}

std::pair<std::int64_t, std::int64_t> class_counts(const std::vector<int>& labels) {
    std::int64_t pos = 0;
    for (int l : labels) pos += l;
    return {pos, static_cast<std::int64_t>(labels.size()) - pos};
}

}  // namespace

ConfusionMatrix confusion(const std::vector<double>& scores, const std::vector<int>& labels, double threshold) {
    validate(scores, labels);
    ConfusionMatrix cm;
    for (std::size_t i = 0; i < scores.size(); ++i) {
        const bool predicted = scores[i] >= threshold;
        if (labels[i] == 1)
            (predicted ? cm.tp : cm.fn)++;
        else
            (predicted ? cm.fp : cm.tn)++;
    }
    return cm;
}

Metrics metrics(const ConfusionMatrix& cm) {
    if (cm.tp < 0 || cm.fn < 0 || cm.fp < 0 || cm.tn < 0)
        throw std::invalid_argument("metrics: negative confusion counts");
    Metrics m;
    if (cm.total() > 0) m.accuracy = static_cast<double>(cm.tp + cm.tn) / static_cast<double>(cm.total());
    if (cm.tp + cm.fn > 0) m.recall = static_cast<double>(cm.tp) / static_cast<double>(cm.tp + cm.fn);
    if (cm.tn + cm.fp > 0) m.tnr = static_cast<double>(cm.tn) / static_cast<double>(cm.tn + cm.fp);
    if (cm.tp + cm.fp > 0) m.precision = static_cast<double>(cm.tp) / static_cast<double>(cm.tp + cm.fp);
    return m;
}

double auc(const std::vector<double>& scores, const std::vector<int>& labels) {
    validate(scores, labels);
    auto [pos, neg] = class_counts(labels);
    if (pos == 0 || neg == 0) throw std::invalid_argument("auc: needs both classes present");

    std::vector<std::size_t> order(scores.size());
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });

    // midranks over tie groups keep the statistic exactly the pairwise mean
    double pos_rank_sum = 0.0;
    std::size_t i = 0;
    while (i < order.size()) {
        std::size_t j = i;
        while (j < order.size() && scores[order[j]] == scores[order[i]]) ++j;
        const double midrank = (static_cast<double>(i + 1) + static_cast<double>(j)) / 2.0;
        for (std::size_t k = i; k < j; ++k)
            if (labels[order[k]] == 1) pos_rank_sum += midrank;
        i = j;
    }
    const double p = static_cast<double>(pos), n = static_cast<double>(neg);
    return (pos_rank_sum - p * (p + 1.0) / 2.0) / (p * n);
}

std::vector<std::pair<double, double>> roc_points(const std::vector<double>& scores, const std::vector<int>& labels) {
    validate(scores, labels);
    auto [pos, neg] = class_counts(labels);
    if (pos == 0 || neg == 0) throw std::invalid_argument("roc_points: needs both classes present");

    std::vector<std::size_t> order(scores.size());
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });

    std::vector<std::pair<double, double>> points{{0.0, 0.0}};
    std::int64_t tp = 0, fp = 0;
    std::size_t i = 0;
    while (i < order.size()) {
        std::size_t j = i;
        while (j < order.size() && scores[order[j]] == scores[order[i]]) ++j;
        for (std::size_t k = i; k < j; ++k)
            (labels[order[k]] == 1 ? tp : fp)++;
        points.emplace_back(static_cast<double>(fp) / static_cast<double>(neg),
                            static_cast<double>(tp) / static_cast<double>(pos));
        i = j;
    }
    return points;
}

double trapezoid_area(const std::vector<std::pair<double, double>>& points) {
    double area = 0.0;
    for (std::size_t i = 1; i < points.size(); ++i)
        area += (points[i].first - points[i - 1].first) * (points[i].second + points[i - 1].second) / 2.0;
    return area;
}

}  // namespace stfa
