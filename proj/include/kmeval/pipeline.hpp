#pragma once

// Fit / evaluate / sweep orchestration behind the command-line tool.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "kmeval/io.hpp"
#include "kmeval/kmeans.hpp"
#include "kmeval/pca.hpp"

namespace kmeval {

enum class AssignmentSource { train, val };

const char* to_string(AssignmentSource source);

struct RunConfig {
    std::filesystem::path train_features;
    std::optional<std::filesystem::path> train_labels;
    std::optional<std::filesystem::path> eval_features;
    std::optional<std::filesystem::path> eval_labels;
    std::size_t k = 1000;
    std::size_t pca_dim = kDefaultPcaDim;
    std::size_t epochs = 60;
    std::size_t batch_size = 1024;
    std::vector<std::uint64_t> seeds{0, 1, 2, 3, 4};
    AssignmentSource assignment = AssignmentSource::train;
    std::optional<std::filesystem::path> classes;  // eval_class,target_class CSV
    std::filesystem::path out;
    ReportFormat format = ReportFormat::json;
    std::size_t chunk_rows = kDefaultChunkRows;
    std::size_t threads = 1;
    bool deterministic = false;
};

/// Throws UsageError on an invalid configuration.
void validate(const RunConfig& config);

/// Configuration echo stored in reports and manifests.
nlohmann::json config_json(const RunConfig& config);

struct SeedModels {
    std::uint64_t seed = 0;
    PcaModel pca;
    KMeansModel kmeans;
};

/// PCA is fitted once and shared by every seed; only k-means varies.
std::vector<SeedModels> fit_models(const RunConfig& config);

/// Same, reusing an already fitted PCA model.
std::vector<SeedModels> fit_models(const RunConfig& config, const PcaModel& pca);

/// Writes <out>/seed_<s>/{pca,kmeans}/ for every seed.
void save_seed_models(const std::vector<SeedModels>& models, const std::filesystem::path& out,
                      const RunConfig& config);
std::vector<SeedModels> load_seed_models(const std::filesystem::path& dir,
                                         const std::vector<std::uint64_t>& seeds);

/// Predicts the evaluation set with each seed's models and scores it.
/// The cluster-to-class map comes from the train contingency (ACC-tr)
/// or the evaluation contingency itself (ACC-val); ARI/AMI/NMI are always
/// computed on the evaluation contingency.
MetricsReport evaluate(const RunConfig& config, const std::vector<SeedModels>& models);

std::vector<SeedModels> cmd_fit(const RunConfig& config);
MetricsReport cmd_eval(const RunConfig& config, const std::filesystem::path& models_dir);
MetricsReport cmd_run(const RunConfig& config);

enum class SweepAxis { pca_dim, k };

struct SweepRow {
    std::size_t value = 0;
    std::map<std::string, Summary> aggregate;
};

/// One run per value; rows are appended to the CSV at config.out as each
/// value completes.
std::vector<SweepRow> cmd_sweep(const RunConfig& config, SweepAxis axis,
                                const std::vector<std::size_t>& values);

}  // namespace kmeval
