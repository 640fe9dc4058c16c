#include "kmeval/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <numeric>
#include <set>
#include <sstream>

#include "kmeval/assign.hpp"
#include "kmeval/errors.hpp"
#include "kmeval/metrics.hpp"

namespace kmeval {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

bool same_pca(const PcaModel& a, const PcaModel& b) {
    return a.n_features == b.n_features && a.n_components == b.n_components &&
           a.n_samples_seen == b.n_samples_seen && a.mean == b.mean && a.components == b.components &&
           a.singular_values == b.singular_values;
}

std::string join(const std::vector<std::int64_t>& values) {
    std::ostringstream s;
    s << '{';
    for (std::size_t i = 0; i < values.size(); ++i) s << (i ? ", " : "") << values[i];
    s << '}';
    return s.str();
}

// Lazily opened inputs plus reduced-space projections keyed by PCA model.
class Workspace {
public:
    explicit Workspace(const RunConfig& config) : config_(config) {}

    FeatureSource& train_source() {
        if (!train_) train_ = open_features(config_.train_features, config_.chunk_rows);
        return *train_;
    }

    FeatureSource& eval_source() {
        if (!config_.eval_features) return train_source();
        if (!eval_) eval_ = open_features(*config_.eval_features, config_.chunk_rows);
        return *eval_;
    }

    const Matrix& train_reduced(const PcaModel& pca) {
        Entry& e = entry(pca);
        if (!e.train) e.train = pca_transform_stream(pca, train_source());
        return *e.train;
    }

    const Matrix& eval_reduced(const PcaModel& pca) {
        if (!config_.eval_features) return train_reduced(pca);
        Entry& e = entry(pca);
        if (!e.eval) e.eval = pca_transform_stream(pca, eval_source());
        return *e.eval;
    }

    const LabelSet* train_labels() {
        if (!config_.train_labels) return nullptr;
        if (!train_labels_) {
            train_labels_ = read_labels(*config_.train_labels);
            if (train_labels_->partition.size() != train_source().n_samples())
                throw InputError("train labels have " + std::to_string(train_labels_->partition.size()) +
                                 " entries but train features have " +
                                 std::to_string(train_source().n_samples()) + " rows");
        }
        return &*train_labels_;
    }

    const LabelSet& eval_labels() {
        if (!config_.eval_features) {
            const LabelSet* t = train_labels();
            if (!t) throw UsageError("evaluation needs --train-labels (or --eval-labels with --eval-features)");
            return *t;
        }
        if (!eval_labels_) {
            eval_labels_ = read_labels(*config_.eval_labels);
            if (eval_labels_->partition.size() != eval_source().n_samples())
                throw InputError("eval labels have " + std::to_string(eval_labels_->partition.size()) +
                                 " entries but eval features have " +
                                 std::to_string(eval_source().n_samples()) + " rows");
        }
        return *eval_labels_;
    }

private:
    struct Entry {
        PcaModel pca;
        std::optional<Matrix> train;
        std::optional<Matrix> eval;
    };

    Entry& entry(const PcaModel& pca) {
        for (auto& e : cache_)
            if (same_pca(e.pca, pca)) return e;
        cache_.push_back(Entry{pca, std::nullopt, std::nullopt});
        return cache_.back();
    }

    const RunConfig& config_;
    std::unique_ptr<FeatureSource> train_;
    std::unique_ptr<FeatureSource> eval_;
    std::optional<LabelSet> train_labels_;
    std::optional<LabelSet> eval_labels_;
    std::vector<Entry> cache_;
};

// How evaluation classes relate to the map built from training labels.
struct ClassSpace {
    std::set<std::size_t> keep;                 // dense eval classes retained
    std::vector<std::size_t> kept_to_merged;    // position in `keep` -> merged class
    std::size_t n_merged = 0;
    std::vector<std::size_t> train_to_merged;   // dense train class -> merged class or kUnassigned
};

struct UnionFind {
    std::vector<std::size_t> parent;
    std::size_t add() {
        parent.push_back(parent.size());
        return parent.size() - 1;
    }
    std::size_t find(std::size_t x) {
        while (parent[x] != x) x = parent[x] = parent[parent[x]];
        return x;
    }
    void unite(std::size_t a, std::size_t b) {
        a = find(a);
        b = find(b);
        if (a != b) parent[std::max(a, b)] = std::min(a, b);
    }
};

ClassSpace resolve_classes(const RunConfig& config, const LabelSet& eval, const LabelSet* train) {
    ClassSpace space;
    const bool need_train = config.assignment == AssignmentSource::train;
    if (!config.classes) {
        for (std::size_t c = 0; c < eval.original.size(); ++c) space.keep.insert(c);
        space.kept_to_merged.resize(eval.original.size());
        std::iota(space.kept_to_merged.begin(), space.kept_to_merged.end(), std::size_t{0});
        space.n_merged = eval.original.size();
        if (train) {
            for (auto v : train->original) {
                const auto idx = eval.index_of(v);
                space.train_to_merged.push_back(idx ? *idx : kUnassigned);
            }
            std::vector<std::int64_t> missing;
            for (auto v : eval.original)
                if (!train->index_of(v)) missing.push_back(v);
            if (need_train && !missing.empty())
                throw InputError("eval classes " + join(missing) +
                                 " do not occur in the train labels " + join(train->original) +
                                 "; supply --classes or use --assignment val");
        }
        return space;
    }

    const auto table = read_class_table(*config.classes);
    UnionFind uf;
    std::map<std::int64_t, std::size_t> eval_node, target_node;
    for (const auto& [e, t] : table) {
        if (!eval_node.count(e)) eval_node[e] = uf.add();
        if (!target_node.count(t)) target_node[t] = uf.add();
        uf.unite(eval_node[e], target_node[t]);
    }
    // Merged classes are numbered by the smallest eval class they contain.
    std::map<std::size_t, std::size_t> root_to_merged;
    for (const auto& [value, node] : eval_node) {
        const std::size_t root = uf.find(node);
        if (!root_to_merged.count(root)) root_to_merged.emplace(root, root_to_merged.size());
    }
    space.n_merged = root_to_merged.size();
    for (std::size_t c = 0; c < eval.original.size(); ++c)
        if (eval_node.count(eval.original[c])) space.keep.insert(c);
    if (space.keep.empty())
        throw InputError("none of the class-table eval classes occur in the eval labels " +
                         join(eval.original));
    for (std::size_t c : space.keep)
        space.kept_to_merged.push_back(root_to_merged.at(uf.find(eval_node.at(eval.original[c]))));

    if (train) {
        space.train_to_merged.assign(train->original.size(), kUnassigned);
        for (const auto& [value, node] : target_node) {
            if (const auto idx = train->index_of(value))
                space.train_to_merged[*idx] = root_to_merged.at(uf.find(node));
        }
        std::vector<std::int64_t> missing;
        for (const auto& [value, node] : target_node)
            if (!train->index_of(value)) missing.push_back(value);
        if (need_train && !missing.empty())
            throw InputError("class-table target classes " + join(missing) +
                             " do not occur in the train labels " + join(train->original));
    }
    return space;
}

KMeansOptions kmeans_options(const RunConfig& config, std::uint64_t seed) {
    KMeansOptions o;
    o.k = config.k;
    o.epochs = config.epochs;
    o.batch_size = config.batch_size;
    o.seed = seed;
    o.threads = config.threads;
    return o;
}

std::vector<SeedModels> fit_with(Workspace& ws, const RunConfig& config, const PcaModel& pca) {
    const Matrix& reduced = ws.train_reduced(pca);
    std::vector<SeedModels> out;
    for (const auto seed : config.seeds) {
        try {
            out.push_back(SeedModels{seed, pca, kmeans_fit(reduced, kmeans_options(config, seed))});
        } catch (const InputError& e) {
            throw InputError("seed " + std::to_string(seed) + ": " + e.what());
        } catch (const NumericError& e) {
            throw NumericError("seed " + std::to_string(seed) + ": " + e.what());
        }
    }
    return out;
}

MetricsReport evaluate_with(Workspace& ws, const RunConfig& config, const std::vector<SeedModels>& models) {
    if (models.empty()) throw UsageError("no models to evaluate");
    const LabelSet& eval = ws.eval_labels();
    const LabelSet* train = ws.train_labels();
    if (config.assignment == AssignmentSource::train && !train)
        throw UsageError("--assignment train needs --train-labels");
    const ClassSpace space = resolve_classes(config, eval, train);

    MetricsReport report;
    report.config = config_json(config);
    for (const auto& m : models) {
        const Matrix& eval_x = ws.eval_reduced(m.pca);
        const Partition pred_all = kmeans_predict(m.kmeans, eval_x, config.threads);
        const auto [pred, kept_truth] = restrict_to_classes(pred_all, eval.partition, space.keep);
        std::vector<std::size_t> merged(kept_truth.size());
        for (std::size_t n = 0; n < kept_truth.size(); ++n) merged[n] = space.kept_to_merged[kept_truth[n]];
        const Partition truth(std::move(merged), space.n_merged);
        const ContingencyTable table = build_contingency(pred, truth);

        SeedRecord rec;
        rec.seed = m.seed;
        rec.acc_val = accuracy(table, best_class_map(table).map);
        if (train) {
            const Matrix& train_x = ws.train_reduced(m.pca);
            const Partition train_pred = kmeans_predict(m.kmeans, train_x, config.threads);
            const ContingencyTable train_table = build_contingency(train_pred, train->partition);
            const ClassMap train_map = best_class_map(train_table).map;
            std::int64_t hits = 0;
            for (std::size_t i = 0; i < table.rows(); ++i) {
                const std::size_t cls = space.train_to_merged[train_map[i]];
                if (cls != kUnassigned) hits += table(i, cls);
            }
            rec.acc_tr = static_cast<double>(hits) / static_cast<double>(table.total());
        }
        rec.acc = config.assignment == AssignmentSource::train ? *rec.acc_tr : rec.acc_val;
        rec.ari = ari(table);
        rec.ami = ami(table, config.threads);
        rec.nmi = nmi(table);
        rec.inertia = inertia(m.kmeans, eval_x, config.threads);
        for (double v : {rec.acc, rec.ari, rec.ami, rec.nmi, rec.inertia})
            if (!std::isfinite(v)) throw NumericError("non-finite metric for seed " + std::to_string(m.seed));
        report.per_seed.push_back(rec);
    }
    return report;
}

PcaModel fit_pca(Workspace& ws, const RunConfig& config) {
    FeatureSource& src = ws.train_source();
    if (config.pca_dim > src.n_features())
        throw UsageError("--pca-dim " + std::to_string(config.pca_dim) + " exceeds the feature dimension " +
                         std::to_string(src.n_features()));
    return pca_fit_stream(src, config.pca_dim);
}

}  // namespace

const char* to_string(AssignmentSource source) {
    return source == AssignmentSource::train ? "train" : "val";
}

void validate(const RunConfig& c) {
    if (c.train_features.empty()) throw UsageError("--train-features is required");
    if (c.k == 0) throw UsageError("--k must be at least 1");
    if (c.pca_dim == 0) throw UsageError("--pca-dim must be at least 1");
    if (c.batch_size == 0) throw UsageError("--batch-size must be at least 1");
    if (c.chunk_rows == 0) throw UsageError("chunk size must be at least 1");
    if (c.threads == 0) throw UsageError("--threads must be at least 1");
    if (c.seeds.empty()) throw UsageError("--seeds must list at least one seed");
    if (c.eval_features.has_value() != c.eval_labels.has_value())
        throw UsageError("--eval-features and --eval-labels must be given together");
}

json config_json(const RunConfig& c) {
    json j = {{"train_features", c.train_features.string()},
              {"train_labels", c.train_labels ? json(c.train_labels->string()) : json(nullptr)},
              {"eval_features", c.eval_features ? json(c.eval_features->string()) : json(nullptr)},
              {"eval_labels", c.eval_labels ? json(c.eval_labels->string()) : json(nullptr)},
              {"classes", c.classes ? json(c.classes->string()) : json(nullptr)},
              {"k", c.k},
              {"d", c.pca_dim},
              {"epochs", c.epochs},
              {"batch_size", c.batch_size},
              {"seeds", c.seeds},
              {"assignment_source", to_string(c.assignment)},
              {"chunk_rows", c.chunk_rows}};
    return j;
}

std::vector<SeedModels> fit_models(const RunConfig& config) {
    validate(config);
    Workspace ws(config);
    return fit_with(ws, config, fit_pca(ws, config));
}

std::vector<SeedModels> fit_models(const RunConfig& config, const PcaModel& pca) {
    validate(config);
    Workspace ws(config);
    return fit_with(ws, config, pca);
}

void save_seed_models(const std::vector<SeedModels>& models, const fs::path& out, const RunConfig& config) {
    for (const auto& m : models) {
        const fs::path dir = out / ("seed_" + std::to_string(m.seed));
        save_model(m.pca, dir / "pca");
        save_model(m.kmeans, dir / "kmeans");
        std::ofstream cfg(dir / "run_config.json");
        cfg << config_json(config).dump(2) << '\n';
    }
}

std::vector<SeedModels> load_seed_models(const fs::path& dir, const std::vector<std::uint64_t>& seeds) {
    std::vector<SeedModels> out;
    for (const auto seed : seeds) {
        const fs::path d = dir / ("seed_" + std::to_string(seed));
        if (!fs::exists(d)) throw InputError("no models for seed " + std::to_string(seed) + " under " + dir.string());
        SeedModels m{seed, load_pca(d / "pca"), load_kmeans(d / "kmeans")};
        if (m.pca.n_components != m.kmeans.d)
            throw InputError("seed " + std::to_string(seed) + ": PCA dimension " +
                             std::to_string(m.pca.n_components) + " does not match k-means dimension " +
                             std::to_string(m.kmeans.d));
        out.push_back(std::move(m));
    }
    return out;
}

MetricsReport evaluate(const RunConfig& config, const std::vector<SeedModels>& models) {
    validate(config);
    Workspace ws(config);
    return evaluate_with(ws, config, models);
}

std::vector<SeedModels> cmd_fit(const RunConfig& config) {
    auto models = fit_models(config);
    if (config.out.empty()) throw UsageError("--out is required");
    save_seed_models(models, config.out, config);
    return models;
}

MetricsReport cmd_eval(const RunConfig& config, const fs::path& models_dir) {
    validate(config);
    auto models = load_seed_models(models_dir, config.seeds);
    Workspace ws(config);
    MetricsReport report = evaluate_with(ws, config, models);
    if (!config.out.empty()) write_report(report, config.out, config.format);
    return report;
}

MetricsReport cmd_run(const RunConfig& config) {
    validate(config);
    Workspace ws(config);
    const PcaModel pca = fit_pca(ws, config);
    const auto models = fit_with(ws, config, pca);
    MetricsReport report = evaluate_with(ws, config, models);
    if (!config.out.empty()) write_report(report, config.out, config.format);
    return report;
}

std::vector<SweepRow> cmd_sweep(const RunConfig& config, SweepAxis axis, const std::vector<std::size_t>& values) {
    validate(config);
    if (values.empty()) throw UsageError("sweep needs at least one value");
    for (auto v : values)
        if (v == 0) throw UsageError("sweep values must be positive");

    std::ofstream csv;
    if (!config.out.empty()) {
        if (config.out.has_parent_path()) fs::create_directories(config.out.parent_path());
        csv.open(config.out, std::ios::trunc);
        if (!csv) throw InputError("cannot write sweep output " + config.out.string());
        csv << "value,acc_mean,acc_std,ari_mean,ari_std,ami_mean,ami_std,nmi_mean,nmi_std\n" << std::flush;
    }

    std::vector<SweepRow> rows;
    Workspace shared(config);
    std::optional<PcaModel> shared_pca;
    for (const auto v : values) {
        RunConfig c = config;
        MetricsReport report;
        if (axis == SweepAxis::pca_dim) {
            c.pca_dim = v;
            Workspace ws(c);
            const PcaModel pca = fit_pca(ws, c);
            report = evaluate_with(ws, c, fit_with(ws, c, pca));
        } else {
            c.k = v;
            if (!shared_pca) shared_pca = fit_pca(shared, config);
            report = evaluate_with(shared, c, fit_with(shared, c, *shared_pca));
        }
        SweepRow row{v, report.aggregate()};
        if (csv.is_open()) {
            csv << v;
            for (const char* m : {"acc", "ari", "ami", "nmi"})
                csv << ',' << format_double(row.aggregate.at(m).mean) << ','
                    << format_double(row.aggregate.at(m).std);
            csv << '\n' << std::flush;
        }
        rows.push_back(std::move(row));
    }
    return rows;
}

}  // namespace kmeval
