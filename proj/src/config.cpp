#include "oclb/config.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <fstream>
#include <set>
#include <sstream>

#include "oclb/errors.hpp"

namespace oclb {

namespace {

std::string trim(std::string_view s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string_view::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return std::string(s.substr(b, e - b + 1));
}

bool valid_key(std::string_view key) {
    if (key.empty() || key.front() == '.' || key.back() == '.') return false;
    return std::all_of(key.begin(), key.end(), [](char c) {
        return std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '.' || c == '-';
    });
}

std::vector<std::string> split_list(std::string_view s) {
    std::vector<std::string> out;
    std::size_t start = 0;
    while (start <= s.size()) {
        const auto comma = s.find(',', start);
        const auto item = trim(s.substr(start, comma == std::string_view::npos ? s.npos : comma - start));
        if (!item.empty()) out.push_back(item);
        if (comma == std::string_view::npos) break;
        start = comma + 1;
    }
    return out;
}

/// Typed access to a RawConfig that records which keys were consumed.
class Reader {
public:
    explicit Reader(const RawConfig& raw) : raw_(raw) {}

    const RawConfig::Entry* get(const std::string& key) {
        used_.insert(key);
        return raw_.find(key);
    }

    std::string str(const std::string& key, std::string def) {
        const auto* e = get(key);
        return e ? e->value : def;
    }

    template <typename T>
    T integer(const std::string& key, T def, T min_value = 0) {
        const auto* e = get(key);
        if (!e) return def;
        T v{};
        const auto* end = e->value.data() + e->value.size();
        const auto [p, ec] = std::from_chars(e->value.data(), end, v);
        if (ec != std::errc() || p != end) {
            throw ConfigError(key + ": expected an integer, got '" + e->value + "'", e->line);
        }
        if (v < min_value) {
            throw ConfigError(key + ": must be >= " + std::to_string(min_value), e->line);
        }
        return v;
    }

    double real(const std::string& key, double def) {
        const auto* e = get(key);
        if (!e) return def;
        try {
            std::size_t pos = 0;
            const double v = std::stod(e->value, &pos);
            if (pos != e->value.size()) throw std::invalid_argument("trailing");
            return v;
        } catch (const std::exception&) {
            throw ConfigError(key + ": expected a number, got '" + e->value + "'", e->line);
        }
    }

    bool boolean(const std::string& key, bool def) {
        const auto* e = get(key);
        if (!e) return def;
        if (e->value == "true" || e->value == "on" || e->value == "1") return true;
        if (e->value == "false" || e->value == "off" || e->value == "0") return false;
        throw ConfigError(key + ": expected on/off, got '" + e->value + "'", e->line);
    }

    std::size_t line(const std::string& key) const {
        const auto* e = raw_.find(key);
        return e ? e->line : 0;
    }

    void reject_unused() const {
        for (const auto& [key, e] : raw_.entries()) {
            if (!used_.contains(key)) {
                throw ConfigError("unknown key '" + key + "'", e.line);
            }
        }
    }

private:
    const RawConfig& raw_;
    std::set<std::string> used_;
};

AugmentKind parse_aug(Reader& r, const std::string& key, const std::string& value) {
    const auto k = parse_augment_kind(value);
    if (!k) {
        throw ConfigError(key + ": unknown augmentation '" + value + "'", r.line(key));
    }
    return *k;
}

/// Reads pooling.* under `prefix`. When the prefix does not set pooling.kind, `inherited` is returned unchanged.
PoolingSpec read_pooling(Reader& r, const std::string& prefix, const std::optional<PoolingSpec>& inherited) {
    const std::string kind_key = prefix + "pooling.kind";
    const auto* kind_entry = r.get(kind_key);
    const std::vector<std::string> params = {"R", "alpha", "p", "k_percent", "sigma_floor"};
    if (!kind_entry && inherited) {
        for (const auto& p : params) {
            if (r.get(prefix + "pooling." + p)) {
                throw ConfigError(prefix + "pooling." + p + ": set pooling.kind alongside pooling parameters",
                                  r.line(prefix + "pooling." + p));
            }
        }
        return *inherited;
    }
    const std::string kind = kind_entry ? kind_entry->value : "moments";
    std::set<std::string> allowed;
    PoolingSpec spec;
    if (kind == "moments") {
        spec.params = pooling::Moments{r.integer<std::size_t>(prefix + "pooling.R", 3, 1),
                                       r.real(prefix + "pooling.sigma_floor", 1e-12)};
        allowed = {"R", "sigma_floor"};
    } else if (kind == "avg") {
        spec.params = pooling::Avg{};
    } else if (kind == "max") {
        spec.params = pooling::Max{};
    } else if (kind == "avgmax") {
        spec.params = pooling::AvgMax{};
    } else if (kind == "mix") {
        spec.params = pooling::Mix{r.real(prefix + "pooling.alpha", 0.5)};
        allowed = {"alpha"};
    } else if (kind == "lp") {
        spec.params = pooling::Lp{r.real(prefix + "pooling.p", 2.0)};
        allowed = {"p"};
    } else if (kind == "stochastic") {
        spec.params = pooling::Stochastic{};
    } else if (kind == "rap") {
        spec.params = pooling::Rap{r.real(prefix + "pooling.k_percent", 0.01)};
        allowed = {"k_percent"};
    } else {
        throw ConfigError(kind_key + ": unknown pooling kind '" + kind + "'", r.line(kind_key));
    }
    for (const auto& p : params) {
        if (!allowed.contains(p) && r.get(prefix + "pooling." + p)) {
            throw ConfigError(prefix + "pooling." + p + ": does not apply to pooling kind " + kind,
                              r.line(prefix + "pooling." + p));
        }
    }
    try {
        spec.validate();
    } catch (const ContractError& e) {
        throw ConfigError(prefix + "pooling: " + e.what(), r.line(kind_key));
    }
    return spec;
}

LearnerConfig read_learner(Reader& r, const std::string& prefix, const LearnerConfig& base) {
    LearnerConfig c = base;
    const std::string kind_key = prefix + "learner.kind";
    if (const auto* e = r.get(kind_key)) {
        const auto k = parse_learner_kind(e->value);
        if (!k) {
            throw ConfigError(kind_key + ": unknown learner kind '" + e->value + "'", e->line);
        }
        c.kind = *k;
    }
    c.epsilon = r.real(prefix + "learner.epsilon", c.epsilon);
    if (!(c.epsilon > 0.0 && c.epsilon < 1.0)) {
        throw ConfigError(prefix + "learner.epsilon: must be in (0,1)", r.line(prefix + "learner.epsilon"));
    }
    c.lr = r.real(prefix + "learner.lr", c.lr);
    c.buffer = r.integer<std::size_t>(prefix + "learner.buffer", c.buffer);
    c.replay_batch = r.integer<std::size_t>(prefix + "learner.replay_batch", c.replay_batch);
    c.cbcl_threshold = r.real(prefix + "learner.cbcl_threshold", c.cbcl_threshold);
    c.cbcl_max = r.integer<std::size_t>(prefix + "learner.cbcl_max", c.cbcl_max, 1);
    c.sigma_floor = r.real(prefix + "learner.sigma_floor", c.sigma_floor);
    return c;
}

std::string default_method_name(const MethodSpec& m) {
    return std::string(to_string(m.learner.kind)) + "/" + m.pooling.describe();
}

}  // namespace

RawConfig RawConfig::parse(std::string_view text) {
    RawConfig cfg;
    std::size_t line_no = 0;
    std::size_t pos = 0;
    while (pos <= text.size()) {
        const auto nl = text.find('\n', pos);
        const auto line = trim(text.substr(pos, nl == std::string_view::npos ? text.npos : nl - pos));
        ++line_no;
        if (!line.empty() && line.front() != '#') {
            const auto eq = line.find('=');
            if (eq == std::string::npos) {
                throw ConfigError("expected 'key = value', got '" + line + "'", line_no);
            }
            const auto key = trim(std::string_view(line).substr(0, eq));
            const auto value = trim(std::string_view(line).substr(eq + 1));
            if (!valid_key(key)) {
                throw ConfigError("invalid key '" + key + "'", line_no);
            }
            if (cfg.entries_.contains(key)) {
                throw ConfigError("duplicate key '" + key + "'", line_no);
            }
            cfg.entries_[key] = Entry{value, line_no};
        }
        if (nl == std::string_view::npos) break;
        pos = nl + 1;
    }
    return cfg;
}

RawConfig RawConfig::load(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) {
        throw ConfigError("cannot read config " + path.string());
    }
    std::stringstream ss;
    ss << in.rdbuf();
    return parse(ss.str());
}

const RawConfig::Entry* RawConfig::find(const std::string& key) const {
    auto it = entries_.find(key);
    return it == entries_.end() ? nullptr : &it->second;
}

void RawConfig::set(const std::string& key, std::string value) {
    entries_[key] = Entry{std::move(value), 0};
}

const MethodSpec& ExperimentConfig::method(const std::string& name) const {
    for (const auto& m : methods) {
        if (m.name == name) return m;
    }
    throw ConfigError("no method named '" + name + "'");
}

ExperimentConfig parse_experiment_config(const RawConfig& raw, const std::filesystem::path& base_dir) {
    Reader r(raw);
    ExperimentConfig c;
    c.name = r.str("name", c.name);
    c.seed = r.integer<std::uint64_t>("seed", 0);
    c.orderings = r.integer<std::size_t>("orderings", 5, 1);
    c.threads = r.integer<std::size_t>("threads", 1, 1);
    c.output = r.str("output", "out");

    const auto source = r.str("dataset.source", "synthetic");
    if (source == "synthetic") {
        c.source = DatasetSource::synthetic;
    } else if (source == "manifest") {
        c.source = DatasetSource::manifest;
    } else if (source == "features") {
        c.source = DatasetSource::features;
    } else {
        throw ConfigError("dataset.source: unknown source '" + source + "'", r.line("dataset.source"));
    }
    c.classes = r.integer<std::size_t>("dataset.classes", 5, 1);
    c.train_per_class = r.integer<std::size_t>("dataset.train_per_class", 30, 1);
    c.test_per_class = r.integer<std::size_t>("dataset.test_per_class", 20, 1);
    c.image_size = r.integer<std::size_t>("dataset.image_size", 32, ToyBackbone::kMinSize);
    if (const auto* e = r.get("dataset.seed")) {
        c.dataset_seed = r.integer<std::uint64_t>("dataset.seed", 0);
        (void)e;
    }
    if (c.source == DatasetSource::synthetic && c.classes < 2) {
        throw ConfigError("dataset.classes: synthetic images need at least 2 classes", r.line("dataset.classes"));
    }
    c.features.n_classes = c.classes;
    c.features.train_per_class = c.train_per_class;
    c.features.test_per_class = c.test_per_class;
    c.features.dim = r.integer<std::size_t>("dataset.dim", 16, 1);
    c.features.anisotropy = r.real("dataset.anisotropy", 1.0);
    if (!(c.features.anisotropy >= 1.0)) {
        throw ConfigError("dataset.anisotropy: must be >= 1", r.line("dataset.anisotropy"));
    }
    c.features.skew = r.real("dataset.skew", 0.0);
    c.features.separation = r.real("dataset.separation", 6.0);
    c.features.seed = c.effective_dataset_seed();
    if (const auto* e = r.get("dataset.manifest")) {
        c.manifest = e->value;
        if (c.manifest.is_relative() && !base_dir.empty()) c.manifest = base_dir / c.manifest;
    }
    if (c.source == DatasetSource::manifest) {
        if (c.manifest.empty()) {
            throw ConfigError("dataset.manifest: required when dataset.source = manifest", r.line("dataset.source"));
        }
        if (!std::filesystem::exists(c.manifest)) {
            throw ConfigError("dataset.manifest: file not found: " + c.manifest.string(), r.line("dataset.manifest"));
        }
    }

    const auto backbone = r.str("backbone.kind", c.source == DatasetSource::synthetic ? "toy" : "passthrough");
    if (backbone == "toy") {
        c.backbone = BackboneKind::toy;
    } else if (backbone == "passthrough") {
        c.backbone = BackboneKind::passthrough;
    } else {
        throw ConfigError("backbone.kind: unknown backbone '" + backbone + "'", r.line("backbone.kind"));
    }
    if (c.source == DatasetSource::features && c.backbone == BackboneKind::toy) {
        throw ConfigError("backbone.kind: feature datasets require passthrough", r.line("backbone.kind"));
    }
    c.backbone_seed = r.integer<std::uint64_t>("backbone.seed", 0);
    c.backbone_channels = r.integer<std::size_t>("backbone.channels", 64, 1);
    c.backbone_hidden = r.integer<std::size_t>("backbone.hidden", 16, 1);

    if (const auto* e = r.get("protocol.shots")) {
        c.shots = r.integer<std::size_t>("protocol.shots", 0, 1);
        (void)e;
    }
    c.train_augment = parse_aug(r, "augment.train", r.str("augment.train", "clean"));
    c.test_augment = parse_aug(r, "augment.test", r.str("augment.test", "clean"));
    for (const auto& v : split_list(r.str("grid.train", ""))) c.grid_train.push_back(parse_aug(r, "grid.train", v));
    for (const auto& v : split_list(r.str("grid.test", ""))) c.grid_test.push_back(parse_aug(r, "grid.test", v));
    const bool images = c.source == DatasetSource::synthetic ||
                        (c.source == DatasetSource::manifest && c.backbone == BackboneKind::toy);
    auto non_clean = [](const std::vector<AugmentKind>& v) {
        return std::any_of(v.begin(), v.end(), [](AugmentKind k) { return k != AugmentKind::clean; });
    };
    if (!images && (c.train_augment != AugmentKind::clean || c.test_augment != AugmentKind::clean ||
                    non_clean(c.grid_train) || non_clean(c.grid_test))) {
        throw ConfigError("augment: augmentations need image inputs and the toy backbone", r.line("augment.train"));
    }

    const PoolingSpec base_pooling = read_pooling(r, "", std::nullopt);
    LearnerConfig base_learner = read_learner(r, "", LearnerConfig{});
    base_learner.seed = c.seed;

    const auto names = split_list(r.str("methods", ""));
    if (names.empty()) {
        MethodSpec m{"", base_pooling, base_learner};
        m.name = default_method_name(m);
        c.methods.push_back(std::move(m));
    } else {
        std::set<std::string> seen;
        for (const auto& name : names) {
            if (!seen.insert(name).second) {
                throw ConfigError("methods: duplicate method '" + name + "'", r.line("methods"));
            }
            const std::string prefix = "method." + name + ".";
            MethodSpec m{name, read_pooling(r, prefix, base_pooling), read_learner(r, prefix, base_learner)};
            c.methods.push_back(std::move(m));
        }
    }

    c.baseline = r.str("report.baseline", c.methods.front().name);
    if (std::none_of(c.methods.begin(), c.methods.end(), [&](const MethodSpec& m) { return m.name == c.baseline; })) {
        throw ConfigError("report.baseline: no method named '" + c.baseline + "'", r.line("report.baseline"));
    }
    c.timing = r.boolean("report.timing", false);
    c.clamp_forgetting = r.boolean("report.clamp_forgetting", false);
    c.gen_stage = r.str("gen.stage", "features");
    if (c.gen_stage != "images" && c.gen_stage != "features" && c.gen_stage != "pooled") {
        throw ConfigError("gen.stage: expected images, features or pooled", r.line("gen.stage"));
    }

    r.reject_unused();
    return c;
}

ExperimentConfig load_experiment_config(const std::filesystem::path& path) {
    return parse_experiment_config(RawConfig::load(path), path.parent_path());
}

}  // namespace oclb
