#include "oclb/learners.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "oclb/errors.hpp"

namespace oclb {

namespace {

template <class... Ts>
struct overloaded : Ts... {
    using Ts::operator()...;
};
template <class... Ts>
overloaded(Ts...) -> overloaded<Ts...>;

void require_dim(std::span<const double> a, std::size_t dim, const char* what) {
    if (a.size() != dim) {
        throw ContractError(std::string(what) + ": dim " + std::to_string(a.size()) + " != " +
                            std::to_string(dim));
    }
}

void add_scaled(std::vector<double>& dst, std::span<const double> src, double scale) {
    for (std::size_t i = 0; i < dst.size(); ++i) {
        dst[i] += scale * src[i];
    }
}

SqdaModel build_sqda_model(const SqdaState& s) {
    SqdaModel model;
    for (const auto& [c, cls] : s.classes) {
        model.classes.push_back(c);
        model.factors.emplace_back(shrink(cls.sigma, s.epsilon));
        model.log_det.push_back(model.factors.back().log_det());
    }
    return model;
}

Prediction linear_predict(const std::map<ClassId, LinearRow>& rows, std::span<const double> z) {
    std::vector<std::pair<ClassId, double>> scores;
    scores.reserve(rows.size());
    for (const auto& [c, row] : rows) {
        scores.emplace_back(c, dot(row.w, z) + row.b);
    }
    return make_prediction(std::move(scores));
}

/// One SGD step of mean softmax cross-entropy over `batch`.
void sgd_step(FtState& ft, std::span<const ReplayEntry* const> batch) {
    const std::size_t k = ft.rows.size();
    std::vector<LinearRow*> rows;
    std::vector<ClassId> ids;
    rows.reserve(k);
    for (auto& [c, row] : ft.rows) {
        ids.push_back(c);
        rows.push_back(&row);
    }
    const std::size_t dim = rows.front()->w.size();
    std::vector<std::vector<double>> grad_w(k, std::vector<double>(dim, 0.0));
    std::vector<double> grad_b(k, 0.0);
    std::vector<double> logits(k);
    const double scale = 1.0 / static_cast<double>(batch.size());

    for (const ReplayEntry* e : batch) {
        double mx = -std::numeric_limits<double>::infinity();
        for (std::size_t i = 0; i < k; ++i) {
            logits[i] = dot(rows[i]->w, e->z) + rows[i]->b;
            mx = std::max(mx, logits[i]);
        }
        double total = 0.0;
        for (auto& l : logits) {
            l = std::exp(l - mx);
            total += l;
        }
        for (std::size_t i = 0; i < k; ++i) {
            const double g = (logits[i] / total - (ids[i] == e->y ? 1.0 : 0.0)) * scale;
            add_scaled(grad_w[i], e->z, g);
            grad_b[i] += g;
        }
    }
    for (std::size_t i = 0; i < k; ++i) {
        add_scaled(rows[i]->w, grad_w[i], -ft.lr);
        rows[i]->b -= ft.lr * grad_b[i];
    }
}

void ft_observe(FtState& ft, std::span<const double> z, ClassId y, std::size_t dim) {
    if (!ft.rows.contains(y)) {
        ft.rows.emplace(y, LinearRow{std::vector<double>(dim, 0.0), 0.0});
    }
    const ReplayEntry e{{z.begin(), z.end()}, y};
    const ReplayEntry* batch[] = {&e};
    sgd_step(ft, batch);
}

void icarl_observe(IcarlState& s, std::span<const double> z, ClassId y, std::size_t dim) {
    if (!s.head.rows.contains(y)) {
        s.head.rows.emplace(y, LinearRow{std::vector<double>(dim, 0.0), 0.0});
    }
    const std::size_t capacity = s.effective_capacity();
    if (s.buffer.size() >= capacity && !s.buffer.empty()) {
        // Evict from the most represented class; prefer y among ties so the spread cannot grow.
        const auto counts = s.buffer_counts();
        std::size_t best = 0;
        for (const auto& [c, n] : counts) best = std::max(best, n);
        ClassId victim = counts.begin()->first;
        bool found = false;
        if (auto it = counts.find(y); it != counts.end() && it->second == best) {
            victim = y;
            found = true;
        }
        for (const auto& [c, n] : counts) {
            if (found) break;
            if (n == best) {
                victim = c;
                found = true;
            }
        }
        std::vector<std::size_t> slots;
        for (std::size_t i = 0; i < s.buffer.size(); ++i) {
            if (s.buffer[i].y == victim) slots.push_back(i);
        }
        const std::size_t slot = slots[s.rng.below(slots.size())];
        s.buffer[slot] = std::move(s.buffer.back());
        s.buffer.pop_back();
    }
    if (capacity > 0) {
        s.buffer.push_back(ReplayEntry{{z.begin(), z.end()}, y});
    }

    // Batch: the new sample plus up to replay_batch distinct buffer draws.
    const ReplayEntry current{{z.begin(), z.end()}, y};
    std::vector<const ReplayEntry*> batch{&current};
    const std::size_t draws = std::min(s.replay_batch, s.buffer.size());
    std::vector<std::size_t> idx(s.buffer.size());
    std::iota(idx.begin(), idx.end(), 0);
    for (std::size_t i = 0; i < draws; ++i) {
        const std::size_t j = i + static_cast<std::size_t>(s.rng.below(idx.size() - i));
        std::swap(idx[i], idx[j]);
        batch.push_back(&s.buffer[idx[i]]);
    }
    sgd_step(s.head, batch);
}

void cbcl_observe(CbclState& s, std::span<const double> z, ClassId y) {
    auto& cls = s.classes[y];
    ++cls.seen;
    auto& cents = cls.centroids;
    std::size_t nearest = cents.size();
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < cents.size(); ++i) {
        const double d = std::sqrt(squared_distance(cents[i].mean, z));
        if (d < best) {
            best = d;
            nearest = i;
        }
    }
    if (nearest < cents.size() && best < s.threshold) {
        auto [m, t] = update_running_mean(cents[nearest].mean, cents[nearest].count, z);
        cents[nearest] = Prototype{std::move(m), t};
    } else {
        cents.push_back(Prototype{{z.begin(), z.end()}, 1});
    }
    while (cents.size() > s.max_prototypes && cents.size() >= 2) {
        std::size_t bi = 0;
        std::size_t bj = 1;
        double bd = std::numeric_limits<double>::infinity();
        for (std::size_t i = 0; i < cents.size(); ++i) {
            for (std::size_t j = i + 1; j < cents.size(); ++j) {
                const double d = squared_distance(cents[i].mean, cents[j].mean);
                if (d < bd) {
                    bd = d;
                    bi = i;
                    bj = j;
                }
            }
        }
        auto& a = cents[bi];
        const auto& b = cents[bj];
        const double total = static_cast<double>(a.count + b.count);
        for (std::size_t k = 0; k < a.mean.size(); ++k) {
            a.mean[k] = (static_cast<double>(a.count) * a.mean[k] + static_cast<double>(b.count) * b.mean[k]) / total;
        }
        a.count += b.count;
        cents.erase(cents.begin() + static_cast<std::ptrdiff_t>(bj));
    }
}

double gaussian_score(double log_det, const Cholesky& factor, std::span<const double> diff) {
    const auto sol = factor.solve(diff);
    return -0.5 * log_det - 0.5 * dot(diff, sol);
}

}  // namespace

// ---------------------------------------------------------------------------

Prediction make_prediction(std::vector<std::pair<ClassId, double>> scores) {
    if (scores.empty()) {
        throw StateError("predict: no classes observed");
    }
    Prediction p;
    std::size_t best = 0;
    for (std::size_t i = 1; i < scores.size(); ++i) {
        if (scores[i].second > scores[best].second) {
            best = i;
        }
    }
    p.label = scores[best].first;
    p.scores = std::move(scores);
    return p;
}

const Prototype* PrototypeTable::find(ClassId c) const {
    auto it = classes.find(c);
    return it == classes.end() ? nullptr : &it->second;
}

void PrototypeTable::observe(std::span<const double> z, ClassId y) {
    auto& p = classes[y];
    auto [m, t] = update_running_mean(p.mean, p.count, z);
    p.mean = std::move(m);
    p.count = t;
}

std::pair<std::vector<double>, std::uint64_t> update_running_mean(std::span<const double> m, std::uint64_t t,
                                                                  std::span<const double> z) {
    if (t == 0) {
        return {std::vector<double>(z.begin(), z.end()), 1};
    }
    require_dim(z, m.size(), "update_running_mean");
    const double tn = static_cast<double>(t);
    std::vector<double> out(m.size());
    for (std::size_t i = 0; i < m.size(); ++i) {
        out[i] = (tn * m[i] + z[i]) / (tn + 1.0);
    }
    return {std::move(out), t + 1};
}

void accumulate_covariance(SymMatrix& sigma, std::uint64_t n, std::span<const double> z,
                           std::span<const double> m_y) {
    const std::size_t dim = sigma.dim();
    require_dim(z, dim, "update_running_covariance");
    require_dim(m_y, dim, "update_running_covariance");
    const double nn = static_cast<double>(n);
    const double coef = nn / (nn + 1.0);
    std::vector<double> dev(dim);
    for (std::size_t i = 0; i < dim; ++i) {
        dev[i] = z[i] - m_y[i];
    }
    for (std::size_t i = 0; i < dim; ++i) {
        for (std::size_t j = i; j < dim; ++j) {
            const double v = (nn * sigma(i, j) + coef * dev[i] * dev[j]) / (nn + 1.0);
            sigma(i, j) = v;
            sigma(j, i) = v;
        }
    }
}

SymMatrix update_running_covariance(const SymMatrix& sigma, std::uint64_t n, std::span<const double> z,
                                    std::span<const double> m_y) {
    SymMatrix out = sigma;
    accumulate_covariance(out, n, z, m_y);
    return out;
}

Prediction ncm_predict(const PrototypeTable& prototypes, std::span<const double> z) {
    if (prototypes.empty()) {
        throw StateError("ncm_predict: no prototypes");
    }
    std::vector<std::pair<ClassId, double>> scores;
    scores.reserve(prototypes.classes.size());
    for (const auto& [c, p] : prototypes.classes) {
        require_dim(z, p.mean.size(), "ncm_predict");
        scores.emplace_back(c, -std::sqrt(squared_distance(z, p.mean)));
    }
    return make_prediction(std::move(scores));
}

SldaWeights slda_weights(const SldaState& state) {
    if (state.prototypes.empty()) {
        throw StateError("slda_weights: no classes observed");
    }
    const Cholesky factor(shrink(state.sigma, state.epsilon));
    const SymMatrix lambda = factor.inverse();
    SldaWeights out;
    for (const auto& [c, p] : state.prototypes.classes) {
        out.classes.push_back(c);
        auto w = lambda.multiply(p.mean);
        out.b.push_back(-0.5 * dot(p.mean, w));
        out.w.push_back(std::move(w));
    }
    return out;
}

void WelfordVec::add(std::span<const double> z) {
    if (count == 0) {
        mean.assign(z.size(), 0.0);
        m2.assign(z.size(), 0.0);
    }
    ++count;
    const double n = static_cast<double>(count);
    for (std::size_t i = 0; i < z.size(); ++i) {
        const double delta = z[i] - mean[i];
        mean[i] += delta / n;
        m2[i] += delta * (z[i] - mean[i]);
    }
}

std::vector<double> WelfordVec::variance() const {
    std::vector<double> v(m2.size());
    for (std::size_t i = 0; i < v.size(); ++i) {
        v[i] = count > 0 ? m2[i] / static_cast<double>(count) : 0.0;
    }
    return v;
}

std::size_t IcarlState::effective_capacity() const {
    return per_class_capacity ? 2 * head.rows.size() : capacity;
}

std::map<ClassId, std::size_t> IcarlState::buffer_counts() const {
    std::map<ClassId, std::size_t> counts;
    for (const auto& e : buffer) {
        ++counts[e.y];
    }
    return counts;
}

// ---------------------------------------------------------------------------

std::string_view to_string(LearnerKind kind) {
    switch (kind) {
        case LearnerKind::ncm: return "ncm";
        case LearnerKind::slda: return "slda";
        case LearnerKind::sqda: return "sqda";
        case LearnerKind::snb: return "snb";
        case LearnerKind::prcpt: return "prcpt";
        case LearnerKind::sovr: return "sovr";
        case LearnerKind::cbcl: return "cbcl";
        case LearnerKind::ft: return "ft";
        case LearnerKind::icarl: return "icarl";
        case LearnerKind::icarl2pc: return "icarl2pc";
    }
    return "?";
}

std::optional<LearnerKind> parse_learner_kind(std::string_view name) {
    for (auto k : {LearnerKind::ncm, LearnerKind::slda, LearnerKind::sqda, LearnerKind::snb, LearnerKind::prcpt,
                   LearnerKind::sovr, LearnerKind::cbcl, LearnerKind::ft, LearnerKind::icarl,
                   LearnerKind::icarl2pc}) {
        if (to_string(k) == name) {
            return k;
        }
    }
    return std::nullopt;
}

Learner::Learner(const LearnerConfig& config, std::size_t dim) : config_(config), dim_(dim) {
    if (dim == 0) {
        throw ContractError("Learner: dim must be >= 1");
    }
    switch (config.kind) {
        case LearnerKind::ncm: state_ = NcmState{}; break;
        case LearnerKind::slda: {
            SldaState s;
            s.sigma = SymMatrix(dim);
            s.epsilon = config.epsilon;
            state_ = std::move(s);
            break;
        }
        case LearnerKind::sqda: state_ = SqdaState{{}, config.epsilon, nullptr}; break;
        case LearnerKind::snb: state_ = SnbState{{}, config.epsilon, config.sigma_floor}; break;
        case LearnerKind::prcpt: state_ = PrcptState{}; break;
        case LearnerKind::sovr: state_ = SovrState{{}, std::vector<double>(dim, 0.0), 0}; break;
        case LearnerKind::cbcl: state_ = CbclState{{}, config.cbcl_threshold, config.cbcl_max}; break;
        case LearnerKind::ft: state_ = FtState{{}, config.lr}; break;
        case LearnerKind::icarl:
        case LearnerKind::icarl2pc: {
            IcarlState s;
            s.head.lr = config.lr;
            s.capacity = config.buffer;
            s.per_class_capacity = config.kind == LearnerKind::icarl2pc;
            s.replay_batch = config.replay_batch;
            s.rng = RngStream(config.seed, "learner/icarl");
            state_ = std::move(s);
            break;
        }
    }
    if ((config.kind == LearnerKind::slda || config.kind == LearnerKind::sqda || config.kind == LearnerKind::snb) &&
        !(config.epsilon > 0.0)) {
        throw ContractError("Learner: epsilon must be > 0");
    }
    if (config.kind == LearnerKind::cbcl && config.cbcl_max < 1) {
        throw ContractError("Learner: cbcl_max must be >= 1");
    }
}

void Learner::check_input(std::span<const double> z) const {
    require_dim(z, dim_, "learner");
    for (double v : z) {
        if (!std::isfinite(v)) {
            throw DataError("learner: non-finite embedding");
        }
    }
}

void Learner::observe(std::span<const double> z, ClassId y) {
    check_input(z);
    std::visit(overloaded{
                   [&](NcmState& s) { s.prototypes.observe(z, y); },
                   [&](SldaState& s) {
                       // Covariance first, against the class mean as it was before this sample.
                       // An unseen class contributes no deviation.
                       const Prototype* p = s.prototypes.find(y);
                       accumulate_covariance(s.sigma, s.n, z, p ? std::span<const double>(p->mean) : z);
                       s.prototypes.observe(z, y);
                       ++s.n;
                       s.cache.reset();
                   },
                   [&](SqdaState& s) {
                       auto [it, fresh] = s.classes.try_emplace(y);
                       auto& cls = it->second;
                       if (fresh) {
                           cls.sigma = SymMatrix(dim_);
                       }
                       if (cls.proto.count > 0) {
                           accumulate_covariance(cls.sigma, cls.proto.count, z, cls.proto.mean);
                       }
                       auto [m, t] = update_running_mean(cls.proto.mean, cls.proto.count, z);
                       cls.proto = Prototype{std::move(m), t};
                       s.cache.reset();
                   },
                   [&](SnbState& s) { s.classes[y].add(z); },
                   [&](PrcptState& s) {
                       auto it = s.weights.find(y);
                       if (it == s.weights.end()) {
                           s.weights.emplace(y, std::vector<double>(z.begin(), z.end()));
                           return;
                       }
                       std::vector<std::pair<ClassId, double>> scores;
                       for (const auto& [c, w] : s.weights) scores.emplace_back(c, dot(w, z));
                       const ClassId pred = make_prediction(std::move(scores)).label;
                       if (pred != y) {
                           add_scaled(it->second, z, 1.0);
                           add_scaled(s.weights[pred], z, -1.0);
                       }
                   },
                   [&](SovrState& s) {
                       auto& p = s.sums[y];
                       if (p.count == 0) p.mean.assign(dim_, 0.0);
                       add_scaled(p.mean, z, 1.0);
                       ++p.count;
                       add_scaled(s.global_sum, z, 1.0);
                       ++s.global_count;
                   },
                   [&](CbclState& s) { cbcl_observe(s, z, y); },
                   [&](FtState& s) { ft_observe(s, z, y, dim_); },
                   [&](IcarlState& s) { icarl_observe(s, z, y, dim_); },
               },
               state_);
}

void Learner::prepare() {
    if (auto* s = std::get_if<SldaState>(&state_); s && !s->prototypes.empty() && !s->cache) {
        s->cache = std::make_shared<const SldaWeights>(slda_weights(*s));
    }
    if (auto* s = std::get_if<SqdaState>(&state_); s && !s->classes.empty() && !s->cache) {
        s->cache = std::make_shared<const SqdaModel>(build_sqda_model(*s));
    }
}

Prediction Learner::predict(std::span<const double> z) const {
    check_input(z);
    using Scores = std::vector<std::pair<ClassId, double>>;
    return std::visit(
        overloaded{
            [&](const NcmState& s) { return ncm_predict(s.prototypes, z); },
            [&](const SldaState& s) {
                std::shared_ptr<const SldaWeights> w = s.cache;
                if (!w) {
                    w = std::make_shared<const SldaWeights>(slda_weights(s));
                }
                Scores scores;
                for (std::size_t i = 0; i < w->classes.size(); ++i) {
                    scores.emplace_back(w->classes[i], dot(w->w[i], z) + w->b[i]);
                }
                return make_prediction(std::move(scores));
            },
            [&](const SqdaState& s) {
                if (s.classes.empty()) throw StateError("predict: no classes observed");
                std::shared_ptr<const SqdaModel> model = s.cache;
                if (!model) {
                    model = std::make_shared<const SqdaModel>(build_sqda_model(s));
                }
                Scores scores;
                std::vector<double> diff(dim_);
                std::size_t i = 0;
                for (const auto& [c, cls] : s.classes) {
                    for (std::size_t k = 0; k < dim_; ++k) diff[k] = z[k] - cls.proto.mean[k];
                    scores.emplace_back(c, gaussian_score(model->log_det[i], model->factors[i], diff));
                    ++i;
                }
                return make_prediction(std::move(scores));
            },
            [&](const SnbState& s) {
                Scores scores;
                const double floor2 = s.sigma_floor * s.sigma_floor;
                for (const auto& [c, cls] : s.classes) {
                    const auto var = cls.variance();
                    double score = 0.0;
                    for (std::size_t k = 0; k < dim_; ++k) {
                        const double v = std::max((1.0 - s.epsilon) * var[k] + s.epsilon, floor2);
                        const double d = z[k] - cls.mean[k];
                        score += -0.5 * std::log(v) - 0.5 * d * d / v;
                    }
                    scores.emplace_back(c, score);
                }
                return make_prediction(std::move(scores));
            },
            [&](const PrcptState& s) {
                Scores scores;
                for (const auto& [c, w] : s.weights) scores.emplace_back(c, dot(w, z));
                return make_prediction(std::move(scores));
            },
            [&](const SovrState& s) {
                Scores scores;
                if (s.global_count == 0) throw StateError("predict: no classes observed");
                const double gn = static_cast<double>(s.global_count);
                for (const auto& [c, p] : s.sums) {
                    const double cn = static_cast<double>(p.count);
                    double score = 0.0;
                    for (std::size_t k = 0; k < dim_; ++k) {
                        score += z[k] * (p.mean[k] / cn - s.global_sum[k] / gn);
                    }
                    scores.emplace_back(c, score);
                }
                return make_prediction(std::move(scores));
            },
            [&](const CbclState& s) {
                // Vote weights are 1 / seen_c normalized over classes; the vote is weight / distance,
                // so the arg-max minimizes distance / weight.
                Scores scores;
                double inv_total = 0.0;
                for (const auto& [c, cls] : s.classes) inv_total += 1.0 / static_cast<double>(cls.seen);
                for (const auto& [c, cls] : s.classes) {
                    double best = std::numeric_limits<double>::infinity();
                    for (const auto& p : cls.centroids) {
                        best = std::min(best, std::sqrt(squared_distance(p.mean, z)));
                    }
                    const double weight = (1.0 / static_cast<double>(cls.seen)) / inv_total;
                    scores.emplace_back(c, -best / weight);
                }
                return make_prediction(std::move(scores));
            },
            [&](const FtState& s) { return linear_predict(s.rows, z); },
            [&](const IcarlState& s) { return linear_predict(s.head.rows, z); },
        },
        state_);
}

std::vector<ClassId> Learner::classes() const {
    std::vector<ClassId> out;
    auto keys = [&](const auto& m) {
        for (const auto& kv : m) out.push_back(kv.first);
    };
    std::visit(overloaded{
                   [&](const NcmState& s) { keys(s.prototypes.classes); },
                   [&](const SldaState& s) { keys(s.prototypes.classes); },
                   [&](const SqdaState& s) { keys(s.classes); },
                   [&](const SnbState& s) { keys(s.classes); },
                   [&](const PrcptState& s) { keys(s.weights); },
                   [&](const SovrState& s) { keys(s.sums); },
                   [&](const CbclState& s) { keys(s.classes); },
                   [&](const FtState& s) { keys(s.rows); },
                   [&](const IcarlState& s) { keys(s.head.rows); },
               },
               state_);
    return out;
}

}  // namespace oclb
