#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "json.hpp"
#include "kmeval/core.hpp"
#include "kmeval/kmeans.hpp"
#include "kmeval/npy.hpp"
#include "kmeval/pca.hpp"

namespace kmeval {

// ---- features -------------------------------------------------------------

/// Streams a 2-D '<f4' / '<f8' .npy file without loading it. The header and
/// payload length are validated on open; finiteness is checked per chunk.
std::unique_ptr<FeatureSource> open_features(const std::filesystem::path& path,
                                             std::size_t chunk_rows = kDefaultChunkRows);

void write_features(const std::filesystem::path& path, const Matrix& data, DType dtype);

/// Reads every row of a source into memory.
Matrix read_all(FeatureSource& source);

// ---- labels ---------------------------------------------------------------

struct LabelSet {
    Partition partition;
    std::vector<std::int64_t> original;  // dense index -> original label value (ascending)

    /// Dense index of an original value, if present.
    std::optional<std::size_t> index_of(std::int64_t value) const;
};

/// Accepts a 1-D integer .npy file or a text file with one integer per line.
/// Original values are sorted ascending and re-indexed densely.
LabelSet read_labels(const std::filesystem::path& path);

void write_labels(const std::filesystem::path& path, std::span<const std::int64_t> labels);

/// Rows (eval_class, target_class) of a class keep/merge CSV.
std::vector<std::pair<std::int64_t, std::int64_t>> read_class_table(const std::filesystem::path& path);

// ---- models ---------------------------------------------------------------

inline constexpr int kManifestSchemaVersion = 1;

/// Each writes one .npy per tensor plus manifest.json (schema version,
/// tensor shapes/dtypes/CRC-32 checksums, scalar fields) into `dir`.
nlohmann::json save_model(const PcaModel& model, const std::filesystem::path& dir);
nlohmann::json save_model(const KMeansModel& model, const std::filesystem::path& dir);

PcaModel load_pca(const std::filesystem::path& dir);
KMeansModel load_kmeans(const std::filesystem::path& dir);
std::variant<PcaModel, KMeansModel> load_model(const std::filesystem::path& dir);

// ---- reports --------------------------------------------------------------

struct SeedRecord {
    std::uint64_t seed = 0;
    double acc = 0;
    std::optional<double> acc_tr;
    double acc_val = 0;
    double ari = 0;
    double ami = 0;
    double nmi = 0;
    double inertia = 0;
};

struct Summary {
    double mean = 0;
    double std = 0;  // population standard deviation; 0 for one seed
};

struct MetricsReport {
    nlohmann::json config = nlohmann::json::object();
    std::vector<SeedRecord> per_seed;

    /// acc, acc_val, ari, ami, nmi, inertia, and acc_tr when every seed has it.
    std::map<std::string, Summary> aggregate() const;
};

Summary summarize(std::span<const double> values);

enum class ReportFormat { json, csv };

nlohmann::json report_to_json(const MetricsReport& report);
std::string report_to_csv(const MetricsReport& report);
void write_report(const MetricsReport& report, const std::filesystem::path& path, ReportFormat format);

/// Shortest round-trip decimal representation used in every text output.
std::string format_double(double v);

}  // namespace kmeval
