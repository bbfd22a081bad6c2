#include "oclb/stream.hpp"

#include <algorithm>
#include <chrono>
#include <exception>
#include <map>
#include <set>
#include <thread>

#include "oclb/errors.hpp"

namespace oclb {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
    return std::chrono::duration<double>(Clock::now() - start).count();
}

double median(std::vector<double> v) {
    if (v.empty()) return 0.0;
    std::sort(v.begin(), v.end());
    const std::size_t n = v.size();
    return n % 2 == 1 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

/// Per-task correct counts for test samples in `items` (pairs of test index, task index).
std::vector<std::size_t> evaluate(const Learner& learner, const EmbeddingSource& source,
                                  std::span<const std::pair<std::size_t, std::size_t>> items,
                                  std::span<const ClassId> ordering, std::size_t n_tasks, std::size_t threads) {
    const std::size_t workers = std::max<std::size_t>(1, std::min(threads, items.size()));
    std::vector<std::vector<std::size_t>> partial(workers, std::vector<std::size_t>(n_tasks, 0));
    std::vector<std::exception_ptr> errors(workers);

    auto work = [&](std::size_t w) {
        try {
            for (std::size_t i = w; i < items.size(); i += workers) {
                const auto [test_idx, task] = items[i];
                const auto z = source.embed_test(test_idx);
                if (learner.predict(z).label == ordering[task]) {
                    ++partial[w][task];
                }
            }
        } catch (...) {
            errors[w] = std::current_exception();
        }
    };

    if (workers == 1) {
        work(0);
    } else {
        std::vector<std::jthread> pool;
        for (std::size_t w = 0; w < workers; ++w) {
            pool.emplace_back(work, w);
        }
    }
    for (const auto& e : errors) {
        if (e) std::rethrow_exception(e);
    }
    std::vector<std::size_t> correct(n_tasks, 0);
    for (const auto& p : partial) {
        for (std::size_t k = 0; k < n_tasks; ++k) correct[k] += p[k];
    }
    return correct;
}

}  // namespace

std::vector<StreamEvent> TaskSchedule::events() const {
    std::vector<StreamEvent> out;
    for (std::size_t k = 0; k < ordering.size(); ++k) {
        for (std::size_t n = 0; n < samples[k].size(); ++n) {
            out.push_back({samples[k][n], ordering[k], k, n});
        }
    }
    return out;
}

TaskSchedule build_schedule(std::span<const ClassId> class_ids, std::span<const ClassId> train_labels,
                            std::optional<std::size_t> shots, std::uint64_t seed) {
    if (shots && *shots == 0) {
        throw ContractError("build_schedule: shots must be >= 1");
    }
    std::set<ClassId> unique(class_ids.begin(), class_ids.end());
    if (unique.size() != class_ids.size()) {
        throw DataError("build_schedule: duplicate class id");
    }
    std::map<ClassId, std::vector<std::size_t>> by_class;
    for (ClassId c : unique) by_class[c];
    for (std::size_t i = 0; i < train_labels.size(); ++i) {
        if (auto it = by_class.find(train_labels[i]); it != by_class.end()) {
            it->second.push_back(i);
        }
    }
    for (const auto& [c, idx] : by_class) {
        if (idx.empty()) {
            throw DataError("build_schedule: class " + std::to_string(c) + " has no training samples");
        }
    }

    const RngStream base(seed, "schedule");
    TaskSchedule s;
    s.seed = seed;
    s.shots = shots;
    s.ordering.assign(unique.begin(), unique.end());
    RngStream order_rng = base.substream("ordering");
    for (std::size_t i = s.ordering.size(); i > 1; --i) {
        std::swap(s.ordering[i - 1], s.ordering[order_rng.below(i)]);
    }
    for (ClassId c : s.ordering) {
        auto idx = by_class[c];
        RngStream rng = base.substream("class/" + std::to_string(c));
        for (std::size_t i = idx.size(); i > 1; --i) {
            std::swap(idx[i - 1], idx[rng.below(i)]);
        }
        if (shots && idx.size() > *shots) {
            idx.resize(*shots);
        }
        s.samples.push_back(std::move(idx));
    }
    return s;
}

std::vector<ClassId> EmbeddingSource::train_labels() const {
    std::vector<ClassId> out(train_size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = train_label(i);
    return out;
}

std::vector<ClassId> EmbeddingSource::class_ids() const {
    std::set<ClassId> ids;
    for (std::size_t i = 0; i < train_size(); ++i) ids.insert(train_label(i));
    return {ids.begin(), ids.end()};
}

VectorSource::VectorSource(std::vector<LabeledEmbedding> train, std::vector<LabeledEmbedding> test)
    : train_(std::move(train)), test_(std::move(test)) {}

StreamResult run_stream(const TaskSchedule& schedule, Learner& learner, const EmbeddingSource& source,
                        const StreamOptions& options) {
    const std::size_t n_tasks = schedule.tasks();
    if (n_tasks == 0) {
        throw ContractError("run_stream: empty schedule");
    }
    std::map<ClassId, std::size_t> task_of;
    for (std::size_t k = 0; k < n_tasks; ++k) task_of[schedule.ordering[k]] = k;

    // Test samples grouped by the task that introduces their class.
    std::vector<std::vector<std::size_t>> test_by_task(n_tasks);
    for (std::size_t i = 0; i < source.test_size(); ++i) {
        auto it = task_of.find(source.test_label(i));
        if (it == task_of.end()) {
            throw ContractError("run_stream: test label " + std::to_string(source.test_label(i)) +
                                " is not in the schedule");
        }
        test_by_task[it->second].push_back(i);
    }

    StreamResult out;
    out.accuracy = AccuracyMatrix(n_tasks);
    for (std::size_t k = 0; k < n_tasks; ++k) {
        if (test_by_task[k].empty()) {
            throw DataError("run_stream: class " + std::to_string(schedule.ordering[k]) + " has no test samples");
        }
        out.test_counts.push_back(test_by_task[k].size());
    }

    std::vector<std::pair<std::size_t, std::size_t>> seen_items;
    std::vector<double> step_fps;
    double ttime = 0.0;
    for (std::size_t k = 0; k < n_tasks; ++k) {
        const auto train_start = Clock::now();
        for (std::size_t idx : schedule.samples[k]) {
            learner.observe(source.embed_train(idx), schedule.ordering[k]);
        }
        learner.prepare();
        ttime += seconds_since(train_start);

        for (std::size_t i : test_by_task[k]) seen_items.emplace_back(i, k);
        const auto eval_start = Clock::now();
        const auto correct = evaluate(learner, source, seen_items, schedule.ordering, n_tasks, options.threads);
        const double eval_s = seconds_since(eval_start);
        const double fps = eval_s > 0.0 ? static_cast<double>(seen_items.size()) / eval_s : 0.0;
        step_fps.push_back(fps);

        std::size_t total_correct = 0;
        std::size_t total = 0;
        for (std::size_t j = 0; j <= k; ++j) {
            out.accuracy.set(k, j, 100.0 * static_cast<double>(correct[j]) / static_cast<double>(out.test_counts[j]));
            total_correct += correct[j];
            total += out.test_counts[j];
        }
        out.steps.push_back(StepLog{k, schedule.ordering[k], k + 1,
                                    100.0 * static_cast<double>(total_correct) / static_cast<double>(total), ttime,
                                    fps});
        if (k + 1 == n_tasks) {
            out.final_correct = total_correct;
            out.final_total = total;
        }
    }
    out.ttime_s = ttime;
    out.fps = median(step_fps);
    return out;
}

MultiOrderingResult multi_ordering_run(const std::function<Learner()>& make_learner, const EmbeddingSource& source,
                                       std::optional<std::size_t> shots, std::uint64_t base_seed,
                                       std::size_t n_orderings, const StreamOptions& options) {
    if (n_orderings == 0) {
        throw ContractError("multi_ordering_run: need at least one ordering");
    }
    const auto classes = source.class_ids();
    const auto labels = source.train_labels();
    MultiOrderingResult out;
    std::vector<MetricsReport> reports;
    for (std::size_t i = 0; i < n_orderings; ++i) {
        const std::uint64_t seed = base_seed + i;
        const auto schedule = build_schedule(classes, labels, shots, seed);
        Learner learner = make_learner();
        OrderingRun run{seed, run_stream(schedule, learner, source, options), {}};
        run.metrics = compute_metrics(run.result, options.clamp_forgetting);
        reports.push_back(run.metrics);
        out.runs.push_back(std::move(run));
    }
    out.summary = summarize(reports);
    return out;
}

}  // namespace oclb
