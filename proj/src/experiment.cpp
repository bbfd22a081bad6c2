#include "oclb/experiment.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>

#include "oclb/errors.hpp"
#include "oclb/tensor_io.hpp"

namespace oclb {

namespace {

std::string aug_label(std::size_t global_index) {
    return "aug/" + std::to_string(global_index);
}

std::string pool_label(std::size_t global_index) {
    return "pool/" + std::to_string(global_index);
}

std::vector<double> pool_map(const FeatureMap& g, const PoolingSpec& spec, std::uint64_t seed, std::size_t index) {
    if (spec.needs_rng()) {
        RngStream rng(seed, pool_label(index));
        return pool(g, spec, &rng).data;
    }
    return pool(g, spec).data;
}

std::string timing_cell(const ExperimentConfig& c, double v) {
    return c.timing ? fmt4(v) : "NA";
}

std::string mean_pm_std(const MeanStd& m) {
    if (!m.mean) return "NA";
    return fmt4(m.mean) + " ± " + fmt4(m.std);
}

void ensure_dir(const std::filesystem::path& dir) {
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec) {
        throw DataError("cannot create output directory " + dir.string() + ": " + ec.message());
    }
}

std::string md_row(const std::vector<std::string>& cells) {
    std::string s = "|";
    for (const auto& c : cells) s += " " + c + " |";
    return s + "\n";
}

std::string md_rule(std::size_t n) {
    std::string s = "|";
    for (std::size_t i = 0; i < n; ++i) s += "---|";
    return s + "\n";
}

std::string rarg_cell(std::optional<double> base, std::optional<double> value) {
    if (!base || !value) return "NA";
    if (*base == 100.0) return "NA(div0)";
    return fmt4(rarg(*base, *value));
}

const char* kMetricConventions =
    "Metric conventions: Acc is the sample-weighted accuracy over the whole test set after the last task. "
    "With R[t][k] the accuracy on task k after training task t and K tasks: "
    "BwT = mean over k < K-1 of (R[K-1][k] - R[k][k]); "
    "Forg = mean over k < K-1 of (max over k <= t < K-1 of R[t][k] - R[K-1][k]); "
    "Pla = mean over k of R[k][k]; FwT = 0 because tasks hold disjoint classes. "
    "Summary values are means and population standard deviations over class orderings.\n";

}  // namespace

// ---------------------------------------------------------------------------

std::vector<ManifestEntry> read_manifest(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw DataError("cannot open manifest " + path.string());
    }
    std::vector<ManifestEntry> out;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        const auto c1 = line.find(',');
        const auto c2 = c1 == std::string::npos ? std::string::npos : line.find(',', c1 + 1);
        if (c2 == std::string::npos || line.find(',', c2 + 1) != std::string::npos) {
            throw DataError("manifest line " + std::to_string(line_no) + ": expected path,label,split");
        }
        ManifestEntry e;
        e.path = line.substr(0, c1);
        try {
            std::size_t pos = 0;
            const std::string lbl = line.substr(c1 + 1, c2 - c1 - 1);
            e.label = static_cast<ClassId>(std::stol(lbl, &pos));
            if (pos != lbl.size()) throw std::invalid_argument("label");
        } catch (const std::exception&) {
            throw DataError("manifest line " + std::to_string(line_no) + ": bad label");
        }
        e.split = line.substr(c2 + 1);
        if (e.split != "train" && e.split != "test") {
            throw DataError("manifest line " + std::to_string(line_no) + ": split must be train or test");
        }
        out.push_back(std::move(e));
    }
    return out;
}

void write_manifest(const std::filesystem::path& path, std::span<const ManifestEntry> entries) {
    std::string text;
    for (const auto& e : entries) {
        text += e.path + "," + std::to_string(e.label) + "," + e.split + "\n";
    }
    write_text(path, text);
}

// ---------------------------------------------------------------------------

CachedSource::CachedSource(std::size_t n_train, std::size_t n_test, bool memoize)
    : n_train_(n_train), memoize_(memoize), cache_(memoize ? n_train + n_test : 0) {}

std::vector<double> CachedSource::embed_train(std::size_t i) const {
    if (i >= n_train_) throw ContractError("embed_train: index out of range");
    if (!memoize_) return compute(i);
    {
        std::lock_guard lock(mu_);
        if (cache_[i]) return *cache_[i];
    }
    auto z = compute(i);
    std::lock_guard lock(mu_);
    cache_[i] = z;
    return z;
}

std::vector<double> CachedSource::embed_test(std::size_t i) const {
    const std::size_t g = n_train_ + i;
    if (!memoize_) return compute(g);
    {
        std::lock_guard lock(mu_);
        if (g >= cache_.size()) throw ContractError("embed_test: index out of range");
        if (cache_[g]) return *cache_[g];
    }
    auto z = compute(g);
    std::lock_guard lock(mu_);
    cache_[g] = z;
    return z;
}

ImagePipelineSource::ImagePipelineSource(std::shared_ptr<const ImageDataset> data,
                                         std::shared_ptr<const ToyBackbone> backbone, Options options)
    : CachedSource(data->train.size(), data->test.size(), options.memoize),
      data_(std::move(data)),
      backbone_(std::move(backbone)),
      options_(std::move(options)) {
    options_.pooling.validate();
}

Image ImagePipelineSource::augmented(std::size_t g) const {
    const bool is_train = g < n_train_;
    const Image& img = is_train ? data_->train[g].image : data_->test.at(g - n_train_).image;
    RngStream rng(options_.seed, aug_label(g));
    return augment(img, is_train ? options_.train_augment : options_.test_augment, rng);
}

FeatureMap ImagePipelineSource::feature_map(std::size_t g) const {
    const Image img = augmented(g);
    return backbone_ ? backbone_->forward(img) : img.to_feature_map();
}

std::vector<double> ImagePipelineSource::compute(std::size_t g) const {
    return pool_map(feature_map(g), options_.pooling, options_.seed, g);
}

FeatureMapSource::FeatureMapSource(std::shared_ptr<const std::vector<LabeledMap>> train,
                                   std::shared_ptr<const std::vector<LabeledMap>> test, PoolingSpec pooling,
                                   std::uint64_t seed, bool memoize)
    : CachedSource(train->size(), test->size(), memoize),
      train_(std::move(train)),
      test_(std::move(test)),
      pooling_(std::move(pooling)),
      seed_(seed) {
    pooling_.validate();
}

std::vector<double> FeatureMapSource::compute(std::size_t g) const {
    const FeatureMap& m = g < n_train_ ? (*train_)[g].map : test_->at(g - n_train_).map;
    return pool_map(m, pooling_, seed_, g);
}

ExperimentData load_experiment_data(const ExperimentConfig& c) {
    ExperimentData d;
    if (c.backbone == BackboneKind::toy) {
        d.backbone = std::make_shared<const ToyBackbone>(c.backbone_seed, c.backbone_channels, c.backbone_hidden);
    }
    switch (c.source) {
        case DatasetSource::synthetic: {
            const auto specs = default_class_specs(c.classes);
            d.images = std::make_shared<const ImageDataset>(
                gen_image_dataset(specs, c.train_per_class, c.test_per_class, c.image_size, c.effective_dataset_seed()));
            break;
        }
        case DatasetSource::features: {
            auto ds = gen_feature_dataset(c.features);
            d.vectors_train = std::move(ds.train);
            d.vectors_test = std::move(ds.test);
            break;
        }
        case DatasetSource::manifest: {
            const auto entries = read_manifest(c.manifest);
            const auto dir = c.manifest.parent_path();
            auto images = std::make_shared<ImageDataset>();
            auto maps_train = std::make_shared<std::vector<LabeledMap>>();
            auto maps_test = std::make_shared<std::vector<LabeledMap>>();
            std::size_t n_vec = 0;
            std::size_t n_map = 0;
            for (const auto& e : entries) {
                std::filesystem::path p = e.path;
                if (p.is_relative()) p = dir / p;
                Tensor t = read_tensor_file(p);
                const bool train = e.split == "train";
                if (auto* v = std::get_if<Vector>(&t)) {
                    ++n_vec;
                    (train ? d.vectors_train : d.vectors_test).push_back({v->to_double(), e.label});
                } else {
                    ++n_map;
                    auto& fm = std::get<FeatureMap>(t);
                    if (c.backbone == BackboneKind::toy) {
                        (train ? images->train : images->test).push_back({Image::from_feature_map(fm), e.label});
                    } else {
                        (train ? *maps_train : *maps_test).push_back({std::move(fm), e.label});
                    }
                }
            }
            if (n_vec > 0 && n_map > 0) {
                throw DataError("manifest mixes rank-1 and rank-3 records");
            }
            if (n_vec > 0 && c.backbone == BackboneKind::toy) {
                throw DataError("manifest holds pooled vectors; use backbone.kind = passthrough");
            }
            if (c.backbone == BackboneKind::toy) {
                d.images = std::move(images);
            } else if (n_map > 0) {
                d.maps_train = std::move(maps_train);
                d.maps_test = std::move(maps_test);
            }
            break;
        }
    }
    return d;
}

std::unique_ptr<EmbeddingSource> make_source(const ExperimentConfig& c, const ExperimentData& d,
                                             const PoolingSpec& pooling, AugmentKind train_augment,
                                             AugmentKind test_augment, bool memoize) {
    if (d.images) {
        ImagePipelineSource::Options o;
        o.train_augment = train_augment;
        o.test_augment = test_augment;
        o.seed = c.seed;
        o.pooling = pooling;
        o.memoize = memoize;
        return std::make_unique<ImagePipelineSource>(d.images, d.backbone, o);
    }
    if (train_augment != AugmentKind::clean || test_augment != AugmentKind::clean) {
        throw ContractError("augmentations need image inputs");
    }
    if (d.maps_train) {
        return std::make_unique<FeatureMapSource>(d.maps_train, d.maps_test, pooling, c.seed, memoize);
    }
    return std::make_unique<VectorSource>(d.vectors_train, d.vectors_test);
}

MultiOrderingResult run_method(const ExperimentConfig& c, const ExperimentData& d, const MethodSpec& method,
                               AugmentKind train_augment, AugmentKind test_augment, bool memoize) {
    const auto source = make_source(c, d, method.pooling, train_augment, test_augment, memoize);
    if (source->train_size() == 0) {
        throw DataError("dataset has no training samples");
    }
    const std::size_t dim = source->embed_train(0).size();
    LearnerConfig lc = method.learner;
    lc.seed = c.seed;
    return multi_ordering_run([&] { return Learner(lc, dim); }, *source, c.shots, c.seed, c.orderings,
                              StreamOptions{c.threads, c.clamp_forgetting});
}

// ---------------------------------------------------------------------------

std::vector<MethodRuns> cmd_run(const ExperimentConfig& c) {
    const auto data = load_experiment_data(c);
    std::vector<MethodRuns> all;
    for (const auto& m : c.methods) {
        all.push_back({m.name, run_method(c, data, m, c.train_augment, c.test_augment, !c.timing)});
    }
    ensure_dir(c.output);

    const std::size_t k_tasks = all.front().result.runs.front().result.accuracy.tasks();
    CsvTable acc;
    acc.header = {"method", "seed", "step"};
    for (std::size_t k = 0; k < k_tasks; ++k) acc.header.push_back("task_" + std::to_string(k));
    CsvTable steps;
    steps.header = {"method", "seed", "task_index", "class_id", "seen_classes", "acc_seen", "ttime_s", "fps"};
    CsvTable metrics;
    metrics.header = {"method", "seed", "acc", "bwt", "forg", "pla", "fwt", "ttime_min", "fps"};

    for (const auto& mr : all) {
        for (const auto& run : mr.result.runs) {
            const std::string seed = std::to_string(run.seed);
            const auto& r = run.result.accuracy;
            for (std::size_t t = 0; t < r.tasks(); ++t) {
                std::vector<std::string> row{mr.method, seed, std::to_string(t)};
                for (std::size_t k = 0; k < k_tasks; ++k) {
                    row.push_back(k <= t && t < r.tasks() ? fmt4(r.at(t, k)) : "NA");
                }
                acc.rows.push_back(std::move(row));
            }
            for (const auto& s : run.result.steps) {
                steps.rows.push_back({mr.method, seed, std::to_string(s.task_index), std::to_string(s.class_id),
                                      std::to_string(s.seen_classes), fmt4(s.acc_seen), timing_cell(c, s.ttime_s),
                                      timing_cell(c, s.fps)});
            }
            const auto& m = run.metrics;
            metrics.rows.push_back({mr.method, seed, fmt4(m.acc_final), fmt4(m.bwt), fmt4(m.forg), fmt4(m.pla),
                                    fmt4(m.fwt), timing_cell(c, m.ttime_min), timing_cell(c, m.fps)});
        }
    }
    write_csv(c.output / "accuracy_matrix.csv", acc);
    write_csv(c.output / "per_step.csv", steps);
    write_csv(c.output / "metrics.csv", metrics);

    // report.md
    std::string md = "# " + c.name + "\n\n" + kMetricConventions + "\n";
    md += "Orderings: " + std::to_string(c.orderings) + ", base seed " + std::to_string(c.seed) +
          ", train augmentation " + std::string(to_string(c.train_augment)) + ", test augmentation " +
          std::string(to_string(c.test_augment)) + ".\n\n## Summary\n\n";
    const auto& base = std::find_if(all.begin(), all.end(), [&](const MethodRuns& m) { return m.method == c.baseline; })
                           ->result.summary.acc.mean;
    md += md_row({"Method", "Acc", "BwT", "Forg", "Pla", "TTime [min]", "FPS", "RARG vs " + c.baseline});
    md += md_rule(8);
    for (const auto& mr : all) {
        const auto& s = mr.result.summary;
        md += md_row({mr.method, mean_pm_std(s.acc), mean_pm_std(s.bwt), mean_pm_std(s.forg), mean_pm_std(s.pla),
                      c.timing ? mean_pm_std(s.ttime_min) : "NA", c.timing ? mean_pm_std(s.fps) : "NA",
                      mr.method == c.baseline ? "-" : rarg_cell(base, s.acc.mean)});
    }
    md += "\n## Runs\n\n" + md_row(metrics.header) + md_rule(metrics.header.size());
    for (const auto& row : metrics.rows) md += md_row(row);
    write_text(c.output / "report.md", md);
    return all;
}

std::optional<double> average_other_domain(AugmentKind train, std::span<const AugmentKind> tests,
                                           std::span<const double> cells) {
    double sum = 0.0;
    std::size_t n = 0;
    for (std::size_t i = 0; i < tests.size(); ++i) {
        if (tests[i] != train) {
            sum += cells[i];
            ++n;
        }
    }
    if (n == 0) return std::nullopt;
    return sum / static_cast<double>(n);
}

std::vector<GridRow> cmd_grid(const ExperimentConfig& c) {
    if (c.grid_train.empty() || c.grid_test.empty()) {
        throw ConfigError("grid.train and grid.test must list at least one augmentation");
    }
    const auto data = load_experiment_data(c);
    std::vector<GridRow> rows;
    CsvTable cells_csv;
    cells_csv.header = {"method", "train", "test", "seed", "acc", "bwt", "forg", "pla"};
    for (const auto& m : c.methods) {
        for (AugmentKind tr : c.grid_train) {
            GridRow row{m.name, tr, {}, std::nullopt, "NA"};
            for (AugmentKind te : c.grid_test) {
                const auto res = run_method(c, data, m, tr, te, true);
                row.cells.push_back(*res.summary.acc.mean);
                for (const auto& run : res.runs) {
                    cells_csv.rows.push_back({m.name, std::string(to_string(tr)), std::string(to_string(te)),
                                              std::to_string(run.seed), fmt4(run.metrics.acc_final),
                                              fmt4(run.metrics.bwt), fmt4(run.metrics.forg), fmt4(run.metrics.pla)});
                }
            }
            row.avg_od = average_other_domain(tr, c.grid_test, row.cells);
            rows.push_back(std::move(row));
        }
    }
    for (auto& row : rows) {
        if (row.method == c.baseline) {
            row.rarg_od = "-";
            continue;
        }
        for (const auto& b : rows) {
            if (b.method == c.baseline && b.train == row.train) {
                row.rarg_od = rarg_cell(b.avg_od, row.avg_od);
            }
        }
    }

    ensure_dir(c.output);
    CsvTable grid;
    grid.header = {"method", "train"};
    for (AugmentKind te : c.grid_test) grid.header.push_back("te_" + std::string(to_string(te)));
    grid.header.push_back("avg_od");
    grid.header.push_back("rarg_od");
    for (const auto& row : rows) {
        std::vector<std::string> r{row.method, std::string(to_string(row.train))};
        for (double v : row.cells) r.push_back(fmt4(v));
        r.push_back(fmt4(row.avg_od));
        r.push_back(row.rarg_od);
        grid.rows.push_back(std::move(r));
    }
    write_csv(c.output / "grid.csv", grid);
    write_csv(c.output / "grid_cells.csv", cells_csv);

    std::string md = "# " + c.name + " augmentation grid\n\n"
                     "Rows are training augmentations (tr), columns test augmentations (te); cells are mean final "
                     "Acc over " + std::to_string(c.orderings) + " orderings. Avg OD averages the test columns that "
                     "differ from the training augmentation; RARG OD compares it with " + c.baseline + ".\n\n";
    std::vector<std::string> head{"Method", "tr"};
    for (AugmentKind te : c.grid_test) head.push_back("te " + std::string(to_string(te)));
    head.push_back("Avg OD");
    head.push_back("RARG OD");
    md += md_row(head) + md_rule(head.size());
    for (const auto& r : grid.rows) md += md_row(r);
    write_text(c.output / "grid.md", md);
    return rows;
}

std::string cmd_compare(std::span<const std::filesystem::path> files, const std::optional<std::string>& method,
                        const std::optional<std::string>& baseline) {
    if (files.size() < 2) {
        throw DataError("compare: need at least two metrics files");
    }
    std::vector<std::string> methods;
    std::vector<std::string> configs;
    std::map<std::string, std::size_t> files_per_config;
    std::map<std::pair<std::string, std::string>, std::pair<double, std::size_t>> acc;
    for (const auto& f : files) {
        const auto table = read_csv(f);
        auto label = f.parent_path().filename().string();
        if (label.empty()) label = f.stem().string();
        if (std::find(configs.begin(), configs.end(), label) == configs.end()) configs.push_back(label);
        ++files_per_config[label];
        const auto mi = table.column("method");
        const auto ai = table.column("acc");
        for (const auto& row : table.rows) {
            if (std::find(methods.begin(), methods.end(), row[mi]) == methods.end()) methods.push_back(row[mi]);
            double v = 0.0;
            try {
                v = std::stod(row[ai]);
            } catch (const std::exception&) {
                throw DataError("compare: bad acc value '" + row[ai] + "' in " + f.string());
            }
            auto& cell = acc[{row[mi], label}];
            cell.first += v;
            ++cell.second;
        }
    }
    if (std::none_of(files_per_config.begin(), files_per_config.end(), [](const auto& kv) { return kv.second >= 2; })) {
        throw DataError("compare: metrics files share no config");
    }
    if (methods.size() < 2) {
        throw DataError("compare: need at least two methods");
    }
    const std::string base = baseline.value_or(methods.front());
    const std::string target = method.value_or(methods.back());
    for (const auto* name : {&base, &target}) {
        if (std::find(methods.begin(), methods.end(), *name) == methods.end()) {
            throw DataError("compare: unknown method '" + *name + "'");
        }
    }
    auto mean = [&](const std::string& m, const std::string& cfg) -> std::optional<double> {
        auto it = acc.find({m, cfg});
        if (it == acc.end()) return std::nullopt;
        return it->second.first / static_cast<double>(it->second.second);
    };

    std::vector<std::string> head{"Method"};
    head.insert(head.end(), configs.begin(), configs.end());
    std::string md = md_row(head) + md_rule(head.size());
    for (const auto& m : methods) {
        std::vector<std::string> row{m};
        for (const auto& cfg : configs) row.push_back(fmt4(mean(m, cfg)));
        md += md_row(row);
    }
    std::vector<std::string> row{"RARG " + target + " vs " + base};
    for (const auto& cfg : configs) row.push_back(rarg_cell(mean(base, cfg), mean(target, cfg)));
    md += md_row(row);
    return md;
}

std::vector<BenchRow> cmd_bench(const ExperimentConfig& c) {
    const auto data = load_experiment_data(c);
    std::vector<BenchRow> rows;
    for (const auto& m : c.methods) {
        const auto* mom = std::get_if<pooling::Moments>(&m.pooling.params);
        const bool is_avg = (mom && mom->order == 1) || std::holds_alternative<pooling::Avg>(m.pooling.params);

        const auto res = run_method(c, data, m, c.train_augment, c.test_augment, false);
        BenchRow main{m.name, m.pooling.describe(), *res.summary.ttime_min.mean, *res.summary.fps.mean, 0.0};
        if (is_avg) {
            rows.push_back(main);
            continue;
        }
        MethodSpec avg = m;
        avg.pooling.params = pooling::Moments{1, mom ? mom->sigma_floor : 1e-12};
        const auto ref = run_method(c, data, avg, c.train_augment, c.test_augment, false);
        BenchRow ref_row{m.name, avg.pooling.describe(), *ref.summary.ttime_min.mean, *ref.summary.fps.mean, 0.0};
        main.fps_delta_pct = ref_row.fps > 0.0 ? 100.0 * (main.fps - ref_row.fps) / ref_row.fps : 0.0;
        rows.push_back(ref_row);
        rows.push_back(main);
    }

    ensure_dir(c.output);
    CsvTable t;
    t.header = {"method", "pooling", "ttime_min", "fps", "fps_delta_pct"};
    std::string md = "# " + c.name + " timing\n\nTTime: training time [min]. FPS: test samples per second, "
                     "median over evaluation steps, including augmentation, backbone and pooling. "
                     "The delta compares each pooling with average pooling on the same backbone and learner.\n\n";
    md += md_row({"Method", "Pooling", "TTime [min]", "FPS", "FPS delta [%]"}) + md_rule(5);
    for (const auto& r : rows) {
        std::vector<std::string> row{r.method, r.pooling, fmt4(r.ttime_min), fmt4(r.fps), fmt4(r.fps_delta_pct)};
        md += md_row(row);
        t.rows.push_back(std::move(row));
    }
    write_csv(c.output / "bench.csv", t);
    write_text(c.output / "bench.md", md);
    return rows;
}

std::filesystem::path cmd_gen(const ExperimentConfig& c) {
    if (c.source == DatasetSource::manifest) {
        throw ConfigError("gen: dataset.source must be synthetic or features");
    }
    ensure_dir(c.output);
    const auto data = load_experiment_data(c);
    std::vector<ManifestEntry> entries;
    auto name = [](const char* split, std::size_t i) {
        char buf[64];
        std::snprintf(buf, sizeof buf, "%s_%05zu.oclt", split, i);
        return std::string(buf);
    };

    if (data.images) {
        const ImagePipelineSource::Options opts{c.train_augment, c.test_augment, c.seed, c.methods.front().pooling,
                                                false};
        const ImagePipelineSource src(data.images, data.backbone, opts);
        const std::size_t n_train = src.train_size();
        for (std::size_t g = 0; g < n_train + src.test_size(); ++g) {
            const bool train = g < n_train;
            const std::size_t local = train ? g : g - n_train;
            const char* split = train ? "train" : "test";
            Tensor t;
            if (c.gen_stage == "images") {
                t = src.augmented(g).to_feature_map();
            } else if (c.gen_stage == "features") {
                t = src.feature_map(g);
            } else {
                t = Vector(std::span<const double>(train ? src.embed_train(local) : src.embed_test(local)));
            }
            const auto file = name(split, local);
            write_tensor_file(c.output / file, t);
            entries.push_back({file, train ? src.train_label(local) : src.test_label(local), split});
        }
    } else {
        for (std::size_t i = 0; i < data.vectors_train.size(); ++i) {
            const auto file = name("train", i);
            write_tensor_file(c.output / file, Vector(std::span<const double>(data.vectors_train[i].z)));
            entries.push_back({file, data.vectors_train[i].label, "train"});
        }
        for (std::size_t i = 0; i < data.vectors_test.size(); ++i) {
            const auto file = name("test", i);
            write_tensor_file(c.output / file, Vector(std::span<const double>(data.vectors_test[i].z)));
            entries.push_back({file, data.vectors_test[i].label, "test"});
        }
    }
    const auto manifest = c.output / "manifest.txt";
    write_manifest(manifest, entries);
    return manifest;
}

}  // namespace oclb
