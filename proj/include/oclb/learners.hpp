#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <variant>
#include <vector>

#include "oclb/rng.hpp"
#include "oclb/tensor.hpp"

namespace oclb {

using ClassId = std::int32_t;

struct LabeledEmbedding {
    std::vector<double> z;
    ClassId label = 0;
};

/// Per-class scores ordered by class id. `label` is the arg-max; ties go to the lowest id.
struct Prediction {
    std::vector<std::pair<ClassId, double>> scores;
    ClassId label = 0;
};

/// Builds a Prediction from scores already ordered by class id.
Prediction make_prediction(std::vector<std::pair<ClassId, double>> scores);

struct Prototype {
    std::vector<double> mean;
    std::uint64_t count = 0;
};

/// Running class means m_c with their counters t_c.
struct PrototypeTable {
    std::map<ClassId, Prototype> classes;

    bool empty() const noexcept { return classes.empty(); }
    const Prototype* find(ClassId c) const;
    void observe(std::span<const double> z, ClassId y);
};

/// m' = (t m + z) / (t + 1), t' = t + 1. With t = 0 returns (z, 1) and `m` is ignored.
std::pair<std::vector<double>, std::uint64_t> update_running_mean(std::span<const double> m, std::uint64_t t,
                                                                  std::span<const double> z);

/// In-place form of update_running_covariance.
void accumulate_covariance(SymMatrix& sigma, std::uint64_t n, std::span<const double> z,
                           std::span<const double> m_y);

/// Sigma_{n+1} = (n Sigma_n + delta_n) / (n + 1), delta_n = n (z - m_y)(z - m_y)^T / (n + 1).
/// `m_y` is the class prototype before this sample's mean update.
SymMatrix update_running_covariance(const SymMatrix& sigma, std::uint64_t n, std::span<const double> z,
                                    std::span<const double> m_y);

/// Label of the l2-nearest prototype; scores are negative distances.
Prediction ncm_predict(const PrototypeTable& prototypes, std::span<const double> z);

// ---------------------------------------------------------------------------
// Learner states

enum class LearnerKind { ncm, slda, sqda, snb, prcpt, sovr, cbcl, ft, icarl, icarl2pc };

std::string_view to_string(LearnerKind kind);
std::optional<LearnerKind> parse_learner_kind(std::string_view name);

struct LearnerConfig {
    LearnerKind kind = LearnerKind::ncm;
    double epsilon = 1e-4;        // covariance shrinkage (slda, sqda, snb)
    double lr = 0.01;             // ft, icarl
    std::size_t buffer = 1000;    // icarl capacity; icarl2pc keeps 2 per seen class instead
    std::size_t replay_batch = 16;
    double cbcl_threshold = 17.0;
    std::size_t cbcl_max = 44;
    double sigma_floor = 1e-12;   // snb variance floor is sigma_floor^2
    std::uint64_t seed = 0;       // icarl replay stream
};

struct NcmState {
    PrototypeTable prototypes;
};

/// Linear SLDA head: scores w_c . z + b_c.
struct SldaWeights {
    std::vector<ClassId> classes;
    std::vector<std::vector<double>> w;
    std::vector<double> b;
};

struct SldaState {
    PrototypeTable prototypes;
    SymMatrix sigma;
    std::uint64_t n = 0;
    double epsilon = 1e-4;
    /// Materialized weights; reset by every observe, filled by Learner::prepare.
    std::shared_ptr<const SldaWeights> cache;
};

/// w_c = Lambda m_c, b_c = -0.5 m_c . w_c with Lambda the shrunk inverse of Sigma.
SldaWeights slda_weights(const SldaState& state);

struct SqdaClass {
    Prototype proto;
    SymMatrix sigma;
};

struct SqdaModel {
    std::vector<ClassId> classes;
    std::vector<Cholesky> factors;
    std::vector<double> log_det;
};

struct SqdaState {
    std::map<ClassId, SqdaClass> classes;
    double epsilon = 1e-4;
    std::shared_ptr<const SqdaModel> cache;
};

/// Welford running mean and sum of squared deviations.
struct WelfordVec {
    std::vector<double> mean;
    std::vector<double> m2;
    std::uint64_t count = 0;

    void add(std::span<const double> z);
    /// Population variance m2 / count.
    std::vector<double> variance() const;
};

struct SnbState {
    std::map<ClassId, WelfordVec> classes;
    double epsilon = 1e-4;
    double sigma_floor = 1e-12;
};

struct PrcptState {
    std::map<ClassId, std::vector<double>> weights;
};

struct SovrState {
    std::map<ClassId, Prototype> sums;  // `mean` holds the running sum here
    std::vector<double> global_sum;
    std::uint64_t global_count = 0;
};

struct CbclClass {
    std::vector<Prototype> centroids;
    std::uint64_t seen = 0;
};

struct CbclState {
    std::map<ClassId, CbclClass> classes;
    double threshold = 17.0;
    std::size_t max_prototypes = 44;
};

struct LinearRow {
    std::vector<double> w;
    double b = 0.0;
};

struct FtState {
    std::map<ClassId, LinearRow> rows;
    double lr = 0.01;
};

struct ReplayEntry {
    std::vector<double> z;
    ClassId y = 0;
};

struct IcarlState {
    FtState head;
    std::vector<ReplayEntry> buffer;
    std::size_t capacity = 1000;
    bool per_class_capacity = false;  // capacity = 2 * seen classes
    std::size_t replay_batch = 16;
    RngStream rng{0, "learner/icarl"};

    std::size_t effective_capacity() const;
    std::map<ClassId, std::size_t> buffer_counts() const;
};

using LearnerState = std::variant<NcmState, SldaState, SqdaState, SnbState, PrcptState, SovrState, CbclState,
                                  FtState, IcarlState>;

/// A streaming classifier: consumes one embedding at a time and predicts over all classes seen.
class Learner {
public:
    Learner(const LearnerConfig& config, std::size_t dim);

    /// One sample's worth of state change. Throws ContractError on a dim mismatch.
    void observe(std::span<const double> z, ClassId y);

    /// Throws StateError before the first observe.
    Prediction predict(std::span<const double> z) const;

    /// Materializes cached discriminants (SLDA, SQDA). Call before concurrent predicts.
    void prepare();

    LearnerKind kind() const noexcept { return config_.kind; }
    const LearnerConfig& config() const noexcept { return config_; }
    std::size_t dim() const noexcept { return dim_; }
    std::vector<ClassId> classes() const;

    const LearnerState& state() const noexcept { return state_; }
    LearnerState& state() noexcept { return state_; }

private:
    void check_input(std::span<const double> z) const;

    LearnerConfig config_;
    std::size_t dim_;
    LearnerState state_;
};

}  // namespace oclb
