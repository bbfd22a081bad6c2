#pragma once

#include <filesystem>
#include <memory>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "oclb/config.hpp"
#include "oclb/csv.hpp"
#include "oclb/pooling.hpp"
#include "oclb/stream.hpp"
#include "oclb/synth.hpp"

namespace oclb {

// ---------------------------------------------------------------------------
// Manifest: one record per line, `path,label,split`, LF endings. Relative paths
// resolve against the manifest's directory.

struct ManifestEntry {
    std::string path;
    ClassId label = 0;
    std::string split;  // "train" or "test"
};

std::vector<ManifestEntry> read_manifest(const std::filesystem::path& path);
void write_manifest(const std::filesystem::path& path, std::span<const ManifestEntry> entries);

// ---------------------------------------------------------------------------
// Embedding sources

/// Base for sources that may memoize embeddings (valid because every stage is deterministic).
class CachedSource : public EmbeddingSource {
public:
    std::vector<double> embed_train(std::size_t i) const final;
    std::vector<double> embed_test(std::size_t i) const final;

protected:
    CachedSource(std::size_t n_train, std::size_t n_test, bool memoize);
    /// Global sample index: train samples first, then test samples.
    virtual std::vector<double> compute(std::size_t global_index) const = 0;
    std::size_t n_train_;

private:
    bool memoize_;
    mutable std::mutex mu_;
    mutable std::vector<std::optional<std::vector<double>>> cache_;
};

/// augment -> toy backbone (or raw pixels) -> pool.
class ImagePipelineSource final : public CachedSource {
public:
    struct Options {
        AugmentKind train_augment = AugmentKind::clean;
        AugmentKind test_augment = AugmentKind::clean;
        std::uint64_t seed = 0;  // keys the "aug/<i>" and "pool/<i>" substreams
        PoolingSpec pooling;
        bool memoize = false;
    };

    ImagePipelineSource(std::shared_ptr<const ImageDataset> data, std::shared_ptr<const ToyBackbone> backbone,
                        Options options);

    std::size_t train_size() const override { return data_->train.size(); }
    std::size_t test_size() const override { return data_->test.size(); }
    ClassId train_label(std::size_t i) const override { return data_->train[i].label; }
    ClassId test_label(std::size_t i) const override { return data_->test[i].label; }

    /// Augmented image for a global sample index.
    Image augmented(std::size_t global_index) const;
    FeatureMap feature_map(std::size_t global_index) const;

private:
    std::vector<double> compute(std::size_t global_index) const override;

    std::shared_ptr<const ImageDataset> data_;
    std::shared_ptr<const ToyBackbone> backbone_;
    Options options_;
};

struct LabeledMap {
    FeatureMap map;
    ClassId label = 0;
};

/// Pre-extracted feature maps pooled on demand.
class FeatureMapSource final : public CachedSource {
public:
    FeatureMapSource(std::shared_ptr<const std::vector<LabeledMap>> train,
                     std::shared_ptr<const std::vector<LabeledMap>> test, PoolingSpec pooling, std::uint64_t seed,
                     bool memoize);

    std::size_t train_size() const override { return train_->size(); }
    std::size_t test_size() const override { return test_->size(); }
    ClassId train_label(std::size_t i) const override { return (*train_)[i].label; }
    ClassId test_label(std::size_t i) const override { return (*test_)[i].label; }

private:
    std::vector<double> compute(std::size_t global_index) const override;

    std::shared_ptr<const std::vector<LabeledMap>> train_;
    std::shared_ptr<const std::vector<LabeledMap>> test_;
    PoolingSpec pooling_;
    std::uint64_t seed_;
};

/// Everything loaded once per experiment, shared by all methods and grid cells.
struct ExperimentData {
    std::shared_ptr<const ImageDataset> images;
    std::shared_ptr<const ToyBackbone> backbone;
    std::shared_ptr<const std::vector<LabeledMap>> maps_train;
    std::shared_ptr<const std::vector<LabeledMap>> maps_test;
    std::vector<LabeledEmbedding> vectors_train;
    std::vector<LabeledEmbedding> vectors_test;
};

ExperimentData load_experiment_data(const ExperimentConfig& config);

std::unique_ptr<EmbeddingSource> make_source(const ExperimentConfig& config, const ExperimentData& data,
                                             const PoolingSpec& pooling, AugmentKind train_augment,
                                             AugmentKind test_augment, bool memoize);

/// Runs one method under the config's protocol.
MultiOrderingResult run_method(const ExperimentConfig& config, const ExperimentData& data, const MethodSpec& method,
                               AugmentKind train_augment, AugmentKind test_augment, bool memoize);

// ---------------------------------------------------------------------------
// Commands. Each writes its report files into config.output.

struct MethodRuns {
    std::string method;
    MultiOrderingResult result;
};

/// Writes accuracy_matrix.csv, per_step.csv, metrics.csv and report.md.
std::vector<MethodRuns> cmd_run(const ExperimentConfig& config);

struct GridRow {
    std::string method;
    AugmentKind train;
    std::vector<double> cells;  // mean final Acc per test augmentation
    std::optional<double> avg_od;
    std::string rarg_od;        // vs the baseline method's Avg-OD on the same train row
};

/// Writes grid.csv, grid_cells.csv and grid.md.
std::vector<GridRow> cmd_grid(const ExperimentConfig& config);

/// Method x config markdown table of mean Acc from metrics.csv files; the config label of a file is its
/// parent directory name. Throws DataError when no config appears in two files.
std::string cmd_compare(std::span<const std::filesystem::path> files, const std::optional<std::string>& method,
                        const std::optional<std::string>& baseline);

struct BenchRow {
    std::string method;
    std::string pooling;
    double ttime_min = 0.0;
    double fps = 0.0;
    double fps_delta_pct = 0.0;  // vs the same learner with average pooling
};

/// Writes bench.csv and bench.md.
std::vector<BenchRow> cmd_bench(const ExperimentConfig& config);

/// Exports the configured dataset as OCLT records plus manifest.txt.
std::filesystem::path cmd_gen(const ExperimentConfig& config);

/// Average over test augmentations other than `train`; absent when there are none.
std::optional<double> average_other_domain(AugmentKind train, std::span<const AugmentKind> tests,
                                           std::span<const double> cells);

}  // namespace oclb
