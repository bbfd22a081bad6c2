#include "oclb/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "oclb/errors.hpp"
#include "oclb/stream.hpp"

namespace oclb {

AccuracyMatrix::AccuracyMatrix(std::size_t tasks) : rows_(tasks) {
    for (std::size_t t = 0; t < tasks; ++t) {
        rows_[t].assign(t + 1, 0.0);
    }
}

void AccuracyMatrix::set(std::size_t t, std::size_t k, double value) {
    if (t >= rows_.size() || k > t) {
        throw ContractError("AccuracyMatrix: entry (" + std::to_string(t) + "," + std::to_string(k) +
                            ") is undefined");
    }
    if (!(value >= 0.0 && value <= 100.0)) {
        throw ContractError("AccuracyMatrix: value outside [0,100]");
    }
    rows_[t][k] = value;
}

double AccuracyMatrix::at(std::size_t t, std::size_t k) const {
    if (t >= rows_.size() || k > t) {
        throw ContractError("AccuracyMatrix: entry (" + std::to_string(t) + "," + std::to_string(k) +
                            ") is undefined");
    }
    return rows_[t][k];
}

double rarg(double acc_base, double acc_new) {
    if (acc_base == 100.0) {
        throw UndefinedError("rarg: baseline accuracy is 100, no room to improve");
    }
    if (!(acc_base < 100.0)) {
        throw ContractError("rarg: baseline accuracy must be < 100");
    }
    return 100.0 * (acc_new - acc_base) / (100.0 - acc_base);
}

double bwt(const AccuracyMatrix& r) {
    const std::size_t k_tasks = r.tasks();
    if (k_tasks < 2) {
        throw ContractError("bwt: needs at least 2 tasks");
    }
    double sum = 0.0;
    for (std::size_t k = 0; k + 1 < k_tasks; ++k) {
        sum += r.at(k_tasks - 1, k) - r.at(k, k);
    }
    return sum / static_cast<double>(k_tasks - 1);
}

double forgetting(const AccuracyMatrix& r, bool clamp) {
    const std::size_t k_tasks = r.tasks();
    if (k_tasks < 2) {
        throw ContractError("forgetting: needs at least 2 tasks");
    }
    double sum = 0.0;
    for (std::size_t k = 0; k + 1 < k_tasks; ++k) {
        double best = r.at(k, k);
        for (std::size_t t = k + 1; t + 1 < k_tasks; ++t) {
            best = std::max(best, r.at(t, k));
        }
        double diff = best - r.at(k_tasks - 1, k);
        if (clamp) {
            diff = std::max(diff, 0.0);
        }
        sum += diff;
    }
    return sum / static_cast<double>(k_tasks - 1);
}

double plasticity(const AccuracyMatrix& r) {
    if (r.tasks() == 0) {
        throw ContractError("plasticity: empty matrix");
    }
    double sum = 0.0;
    for (std::size_t k = 0; k < r.tasks(); ++k) {
        sum += r.at(k, k);
    }
    return sum / static_cast<double>(r.tasks());
}

double final_accuracy(std::size_t correct, std::size_t total) {
    if (total == 0) {
        throw DataError("final_accuracy: empty test set");
    }
    return 100.0 * static_cast<double>(correct) / static_cast<double>(total);
}

MetricsReport compute_metrics(const StreamResult& result, bool clamp_forgetting) {
    MetricsReport m;
    m.acc_final = final_accuracy(result.final_correct, result.final_total);
    if (result.accuracy.tasks() >= 2) {
        m.bwt = bwt(result.accuracy);
        m.forg = forgetting(result.accuracy, clamp_forgetting);
    }
    m.pla = plasticity(result.accuracy);
    m.fwt = 0.0;
    m.ttime_min = result.ttime_s / 60.0;
    m.fps = result.fps;
    return m;
}

MeanStd mean_std(std::span<const std::optional<double>> values) {
    if (values.empty()) {
        return {};
    }
    double sum = 0.0;
    for (const auto& v : values) {
        if (!v) return {};
        sum += *v;
    }
    const double mean = sum / static_cast<double>(values.size());
    double ss = 0.0;
    for (const auto& v : values) {
        ss += (*v - mean) * (*v - mean);
    }
    return {mean, std::sqrt(ss / static_cast<double>(values.size()))};
}

MetricsSummary summarize(std::span<const MetricsReport> reports) {
    auto col = [&](auto get) {
        std::vector<std::optional<double>> v;
        for (const auto& r : reports) v.push_back(get(r));
        return mean_std(v);
    };
    MetricsSummary s;
    s.acc = col([](const MetricsReport& r) { return std::optional<double>(r.acc_final); });
    s.bwt = col([](const MetricsReport& r) { return r.bwt; });
    s.forg = col([](const MetricsReport& r) { return r.forg; });
    s.pla = col([](const MetricsReport& r) { return std::optional<double>(r.pla); });
    s.fwt = col([](const MetricsReport& r) { return std::optional<double>(r.fwt); });
    s.ttime_min = col([](const MetricsReport& r) { return std::optional<double>(r.ttime_min); });
    s.fps = col([](const MetricsReport& r) { return std::optional<double>(r.fps); });
    return s;
}

}  // namespace oclb
