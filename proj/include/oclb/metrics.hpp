#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <vector>

#include "oclb/accuracy.hpp"

namespace oclb {

struct StreamResult;

/// Room-aware relative gain 100 * (new - base) / (100 - base). Throws UndefinedError when base == 100.
double rarg(double acc_base, double acc_new);

/// Mean over k < K-1 of R[K-1][k] - R[k][k]. Requires K >= 2.
double bwt(const AccuracyMatrix& r);

/// Mean over k < K-1 of max_{k <= t < K-1} R[t][k] - R[K-1][k]. Requires K >= 2.
/// With `clamp`, negative per-task differences count as 0.
double forgetting(const AccuracyMatrix& r, bool clamp = false);

/// Mean of the diagonal. Requires K >= 1.
double plasticity(const AccuracyMatrix& r);

/// Percent correct over the whole final test set. Throws DataError when total == 0.
double final_accuracy(std::size_t correct, std::size_t total);

struct MetricsReport {
    double acc_final = 0.0;
    std::optional<double> bwt;   // absent for single-task runs
    std::optional<double> forg;  // absent for single-task runs
    double pla = 0.0;
    double fwt = 0.0;
    double ttime_min = 0.0;
    double fps = 0.0;
};

MetricsReport compute_metrics(const StreamResult& result, bool clamp_forgetting = false);

struct MeanStd {
    std::optional<double> mean;
    std::optional<double> std;
};

/// Population mean and standard deviation; absent when any input is absent.
MeanStd mean_std(std::span<const std::optional<double>> values);

struct MetricsSummary {
    MeanStd acc, bwt, forg, pla, fwt, ttime_min, fps;
};

MetricsSummary summarize(std::span<const MetricsReport> reports);

}  // namespace oclb
