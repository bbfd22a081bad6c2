#pragma once

#include <cstddef>
#include <vector>

namespace oclb {

/// K x K lower-triangular accuracy table. Entry (t, k), k <= t, is the percent
/// accuracy on task k's test samples after training through task t.
class AccuracyMatrix {
public:
    AccuracyMatrix() = default;
    explicit AccuracyMatrix(std::size_t tasks);

    std::size_t tasks() const noexcept { return rows_.size(); }
    static bool defined(std::size_t t, std::size_t k) noexcept { return k <= t; }

    /// Throws ContractError when k > t or the value is outside [0, 100].
    void set(std::size_t t, std::size_t k, double value);
    double at(std::size_t t, std::size_t k) const;

    friend bool operator==(const AccuracyMatrix&, const AccuracyMatrix&) = default;

private:
    std::vector<std::vector<double>> rows_;
};

}  // namespace oclb
