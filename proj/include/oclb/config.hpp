#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "oclb/learners.hpp"
#include "oclb/pooling.hpp"
#include "oclb/synth.hpp"

namespace oclb {

/// Flat `key = value` file. Keys are dotted identifiers; `#` starts a comment line.
class RawConfig {
public:
    struct Entry {
        std::string value;
        std::size_t line = 0;
    };

    /// Throws ConfigError with the offending line number.
    static RawConfig parse(std::string_view text);
    static RawConfig load(const std::filesystem::path& path);

    bool has(const std::string& key) const { return entries_.contains(key); }
    const Entry* find(const std::string& key) const;
    const std::map<std::string, Entry>& entries() const noexcept { return entries_; }
    void set(const std::string& key, std::string value);

private:
    std::map<std::string, Entry> entries_;
};

enum class DatasetSource { synthetic, manifest, features };
enum class BackboneKind { toy, passthrough };

struct MethodSpec {
    std::string name;
    PoolingSpec pooling;
    LearnerConfig learner;
};

struct ExperimentConfig {
    std::string name = "experiment";
    std::uint64_t seed = 0;
    std::size_t orderings = 5;
    std::size_t threads = 1;
    std::filesystem::path output = "out";

    DatasetSource source = DatasetSource::synthetic;
    std::size_t classes = 5;
    std::size_t train_per_class = 30;
    std::size_t test_per_class = 20;
    std::size_t image_size = 32;
    std::optional<std::uint64_t> dataset_seed;
    std::filesystem::path manifest;
    FeatureDatasetSpec features;

    BackboneKind backbone = BackboneKind::toy;
    std::uint64_t backbone_seed = 0;
    std::size_t backbone_channels = 64;
    std::size_t backbone_hidden = 16;

    std::vector<MethodSpec> methods;
    std::optional<std::size_t> shots;
    AugmentKind train_augment = AugmentKind::clean;
    AugmentKind test_augment = AugmentKind::clean;
    std::vector<AugmentKind> grid_train;
    std::vector<AugmentKind> grid_test;

    std::string baseline;  // method name RARG columns compare against
    bool timing = false;  // run and grid write NA timing columns unless enabled
    bool clamp_forgetting = false;
    std::string gen_stage = "features";

    std::uint64_t effective_dataset_seed() const { return dataset_seed.value_or(seed); }
    const MethodSpec& method(const std::string& name) const;
};

/// Validates every key and value. Throws ConfigError naming the bad key and its line.
/// `base_dir` resolves a relative manifest path.
ExperimentConfig parse_experiment_config(const RawConfig& raw, const std::filesystem::path& base_dir = {});

ExperimentConfig load_experiment_config(const std::filesystem::path& path);

}  // namespace oclb
