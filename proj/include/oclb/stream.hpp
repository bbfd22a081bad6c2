#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <vector>

#include "oclb/accuracy.hpp"
#include "oclb/learners.hpp"
#include "oclb/metrics.hpp"

namespace oclb {

struct StreamEvent {
    std::size_t sample = 0;  // index into the train split
    ClassId label = 0;
    std::size_t task = 0;
    std::size_t position = 0;
};

/// Class-IID schedule with one class per task.
struct TaskSchedule {
    std::vector<ClassId> ordering;
    std::vector<std::vector<std::size_t>> samples;  // samples[k] = train indices of task k
    std::uint64_t seed = 0;
    std::optional<std::size_t> shots;

    std::size_t tasks() const noexcept { return ordering.size(); }
    std::vector<StreamEvent> events() const;
};

/// Orders classes by a seeded permutation, shuffles within each class and keeps at most
/// `shots` samples per class. Throws DataError if a class in `class_ids` has no train sample.
TaskSchedule build_schedule(std::span<const ClassId> class_ids, std::span<const ClassId> train_labels,
                            std::optional<std::size_t> shots, std::uint64_t seed);

/// Produces embeddings for train and test samples. Implementations must be safe to call
/// concurrently from several threads.
class EmbeddingSource {
public:
    virtual ~EmbeddingSource() = default;
    virtual std::size_t train_size() const = 0;
    virtual std::size_t test_size() const = 0;
    virtual ClassId train_label(std::size_t i) const = 0;
    virtual ClassId test_label(std::size_t i) const = 0;
    virtual std::vector<double> embed_train(std::size_t i) const = 0;
    virtual std::vector<double> embed_test(std::size_t i) const = 0;

    std::vector<ClassId> train_labels() const;
    std::vector<ClassId> class_ids() const;
};

/// Precomputed embeddings.
class VectorSource final : public EmbeddingSource {
public:
    VectorSource(std::vector<LabeledEmbedding> train, std::vector<LabeledEmbedding> test);

    std::size_t train_size() const override { return train_.size(); }
    std::size_t test_size() const override { return test_.size(); }
    ClassId train_label(std::size_t i) const override { return train_[i].label; }
    ClassId test_label(std::size_t i) const override { return test_[i].label; }
    std::vector<double> embed_train(std::size_t i) const override { return train_[i].z; }
    std::vector<double> embed_test(std::size_t i) const override { return test_[i].z; }

private:
    std::vector<LabeledEmbedding> train_;
    std::vector<LabeledEmbedding> test_;
};

struct StepLog {
    std::size_t task_index = 0;
    ClassId class_id = 0;
    std::size_t seen_classes = 0;
    double acc_seen = 0.0;  // percent, sample-weighted over all seen test samples
    double ttime_s = 0.0;   // cumulative training wall time
    double fps = 0.0;       // evaluation throughput of this step
};

struct StreamResult {
    AccuracyMatrix accuracy;
    std::vector<StepLog> steps;
    std::vector<std::size_t> test_counts;  // per task, in schedule order
    std::size_t final_correct = 0;
    std::size_t final_total = 0;
    double ttime_s = 0.0;
    double fps = 0.0;  // median over evaluation steps
};

struct StreamOptions {
    std::size_t threads = 1;
    bool clamp_forgetting = false;
};

/// Feeds every event once through `learner`, evaluating on all seen-class test samples after each task.
StreamResult run_stream(const TaskSchedule& schedule, Learner& learner, const EmbeddingSource& source,
                        const StreamOptions& options = {});

struct OrderingRun {
    std::uint64_t seed = 0;
    StreamResult result;
    MetricsReport metrics;
};

struct MultiOrderingResult {
    std::vector<OrderingRun> runs;
    MetricsSummary summary;
};

/// Runs `n_orderings` schedules with seeds base_seed, base_seed + 1, ... and a fresh learner each.
MultiOrderingResult multi_ordering_run(const std::function<Learner()>& make_learner, const EmbeddingSource& source,
                                       std::optional<std::size_t> shots, std::uint64_t base_seed,
                                       std::size_t n_orderings, const StreamOptions& options = {});

}  // namespace oclb
