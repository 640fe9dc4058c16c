#include "kmeval/io.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include <zlib.h>

#include "kmeval/errors.hpp"

namespace kmeval {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

class NpyFeatureSource final : public FeatureSource {
public:
    NpyFeatureSource(fs::path path, const npy::ArrayHeader& header, std::size_t chunk_rows)
        : FeatureSource(header.shape[0], header.shape[1],
                        header.type == npy::ElementType::float32 ? DType::float32 : DType::float64,
                        chunk_rows),
          path_(std::move(path)), header_(header), in_(path_, std::ios::binary) {
        if (!in_) throw InputError("cannot open " + path_.string());
    }

protected:
    void read_rows(std::size_t first, std::size_t count, Matrix& out) override {
        const std::size_t cols = n_features();
        const std::size_t item = npy::element_size(header_.type);
        out.resize(static_cast<Eigen::Index>(count), static_cast<Eigen::Index>(cols));
        in_.clear();
        in_.seekg(static_cast<std::streamoff>(header_.data_offset + first * cols * item));
        const std::size_t bytes = count * cols * item;
        if (header_.type == npy::ElementType::float64) {
            in_.read(reinterpret_cast<char*>(out.data()), static_cast<std::streamsize>(bytes));
        } else {
            buffer_.resize(count * cols);
            in_.read(reinterpret_cast<char*>(buffer_.data()), static_cast<std::streamsize>(bytes));
            std::copy(buffer_.begin(), buffer_.end(), out.data());
        }
        if (static_cast<std::size_t>(in_.gcount()) != bytes)
            throw InputError("npy payload truncated while streaming " + path_.string());
    }

private:
    fs::path path_;
    npy::ArrayHeader header_;
    std::ifstream in_;
    std::vector<float> buffer_;
};

std::uint32_t file_crc32(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw InputError("missing model tensor " + path.string());
    uLong crc = crc32(0L, Z_NULL, 0);
    std::vector<char> buf(1 << 16);
    while (in) {
        in.read(buf.data(), static_cast<std::streamsize>(buf.size()));
        const auto got = in.gcount();
        if (got > 0) crc = crc32(crc, reinterpret_cast<const Bytef*>(buf.data()), static_cast<uInt>(got));
    }
    return static_cast<std::uint32_t>(crc);
}

json tensor_entry(const fs::path& dir, const std::string& name, npy::ElementType type,
                  const std::vector<std::size_t>& shape) {
    const std::string file = name + ".npy";
    return {{"file", file},
            {"dtype", std::string(npy::descr(type))},
            {"shape", shape},
            {"crc32", file_crc32(dir / file)}};
}

void write_manifest(const fs::path& dir, const json& manifest) {
    std::ofstream out(dir / "manifest.json");
    if (!out) throw InputError("cannot write manifest in " + dir.string());
    out << manifest.dump(2) << '\n';
}

json read_manifest(const fs::path& dir) {
    std::ifstream in(dir / "manifest.json");
    if (!in) throw InputError("missing manifest.json in " + dir.string());
    json m;
    try {
        in >> m;
    } catch (const json::exception& e) {
        throw InputError("unparseable manifest in " + dir.string() + ": " + e.what());
    }
    if (!m.is_object() || m.value("schema_version", -1) != kManifestSchemaVersion)
        throw InputError("manifest schema mismatch in " + dir.string());
    return m;
}

// Validates checksum, dtype and shape against the manifest, then reads.
const json& tensor_meta(const json& manifest, const fs::path& dir, const std::string& name,
                        const std::vector<std::size_t>& expected_shape) {
    if (!manifest.contains("tensors") || !manifest["tensors"].contains(name))
        throw InputError("manifest in " + dir.string() + " lacks tensor '" + name + "'");
    const json& t = manifest["tensors"][name];
    const fs::path file = dir / t.at("file").get<std::string>();
    if (!fs::exists(file)) throw InputError("missing model tensor " + file.string());
    if (file_crc32(file) != t.at("crc32").get<std::uint32_t>())
        throw InputError("checksum mismatch for " + file.string());
    if (t.at("shape").get<std::vector<std::size_t>>() != expected_shape)
        throw InputError("tensor '" + name + "' shape in manifest disagrees with model fields");
    const npy::ArrayHeader h = npy::read_header(file);
    if (h.shape != expected_shape)
        throw InputError("tensor '" + name + "' payload shape disagrees with manifest in " + dir.string());
    return t;
}

std::vector<double> load_float_tensor(const json& manifest, const fs::path& dir,
                                      const std::string& name, const std::vector<std::size_t>& shape) {
    const json& t = tensor_meta(manifest, dir, name, shape);
    npy::ArrayHeader h;
    auto v = npy::read_float(dir / t.at("file").get<std::string>(), &h);
    if (h.type != npy::ElementType::float64) throw InputError("tensor '" + name + "' is not float64");
    return v;
}

template <typename Fn>
auto with_manifest_errors(const fs::path& dir, Fn&& fn) {
    try {
        return fn();
    } catch (const json::exception& e) {
        throw InputError("malformed manifest in " + dir.string() + ": " + e.what());
    }
}

std::vector<std::pair<std::string, std::vector<double>>> columns(const MetricsReport& r) {
    std::vector<std::pair<std::string, std::vector<double>>> cols;
    auto add = [&](const char* name, auto get) {
        std::vector<double> v;
        for (const auto& s : r.per_seed) v.push_back(get(s));
        cols.emplace_back(name, std::move(v));
    };
    add("acc", [](const SeedRecord& s) { return s.acc; });
    const bool have_tr = !r.per_seed.empty() &&
                         std::all_of(r.per_seed.begin(), r.per_seed.end(),
                                     [](const SeedRecord& s) { return s.acc_tr.has_value(); });
    if (have_tr) add("acc_tr", [](const SeedRecord& s) { return *s.acc_tr; });
    add("acc_val", [](const SeedRecord& s) { return s.acc_val; });
    add("ari", [](const SeedRecord& s) { return s.ari; });
    add("ami", [](const SeedRecord& s) { return s.ami; });
    add("nmi", [](const SeedRecord& s) { return s.nmi; });
    add("inertia", [](const SeedRecord& s) { return s.inertia; });
    return cols;
}

}  // namespace

std::unique_ptr<FeatureSource> open_features(const fs::path& path, std::size_t chunk_rows) {
    const npy::ArrayHeader h = npy::read_header(path);
    if (h.shape.size() != 2)
        throw InputError("expected 2-D array in " + path.string() + ", found " +
                         std::to_string(h.shape.size()) + "-D");
    if (h.type != npy::ElementType::float32 && h.type != npy::ElementType::float64)
        throw InputError("features in " + path.string() + " must be '<f4' or '<f8', found " +
                         std::string(npy::descr(h.type)));
    if (h.shape[0] == 0 || h.shape[1] == 0) throw InputError("feature array " + path.string() + " is empty");
    return std::make_unique<NpyFeatureSource>(path, h, chunk_rows);
}

void write_features(const fs::path& path, const Matrix& data, DType dtype) {
    const std::vector<std::size_t> shape{static_cast<std::size_t>(data.rows()),
                                         static_cast<std::size_t>(data.cols())};
    if (dtype == DType::float64) {
        npy::write(path, std::span<const double>(data.data(), static_cast<std::size_t>(data.size())), shape);
    } else {
        std::vector<float> f(data.data(), data.data() + data.size());
        npy::write(path, std::span<const float>(f), shape);
    }
}

Matrix read_all(FeatureSource& source) {
    Matrix out(static_cast<Eigen::Index>(source.n_samples()), static_cast<Eigen::Index>(source.n_features()));
    Matrix chunk;
    Eigen::Index row = 0;
    source.rewind();
    while (source.next(chunk)) {
        out.middleRows(row, chunk.rows()) = chunk;
        row += chunk.rows();
    }
    source.rewind();
    return out;
}

std::optional<std::size_t> LabelSet::index_of(std::int64_t value) const {
    const auto it = std::lower_bound(original.begin(), original.end(), value);
    if (it == original.end() || *it != value) return std::nullopt;
    return static_cast<std::size_t>(it - original.begin());
}

LabelSet read_labels(const fs::path& path) {
    if (!fs::exists(path)) throw InputError("label file not found: " + path.string());
    std::vector<std::int64_t> raw;
    if (npy::has_magic(path)) {
        npy::ArrayHeader h;
        raw = npy::read_int(path, &h);
        if (h.shape.size() != 1)
            throw InputError("expected 1-D label array in " + path.string());
    } else {
        std::ifstream in(path);
        std::string line;
        std::size_t lineno = 0;
        while (std::getline(in, line)) {
            ++lineno;
            const auto first = line.find_first_not_of(" \t\r");
            if (first == std::string::npos) continue;
            const auto last = line.find_last_not_of(" \t\r");
            std::int64_t v = 0;
            const char* b = line.data() + first;
            const char* e = line.data() + last + 1;
            const auto [ptr, ec] = std::from_chars(b, e, v);
            if (ec != std::errc{} || ptr != e)
                throw InputError("non-integer label '" + line + "' at " + path.string() + ":" +
                                 std::to_string(lineno));
            raw.push_back(v);
        }
    }
    if (raw.empty()) throw InputError("label file " + path.string() + " is empty");

    LabelSet out;
    out.original = raw;
    std::sort(out.original.begin(), out.original.end());
    out.original.erase(std::unique(out.original.begin(), out.original.end()), out.original.end());
    std::vector<std::size_t> dense(raw.size());
    for (std::size_t i = 0; i < raw.size(); ++i) dense[i] = *out.index_of(raw[i]);
    out.partition = Partition(std::move(dense), out.original.size());
    return out;
}

void write_labels(const fs::path& path, std::span<const std::int64_t> labels) {
    const std::vector<std::size_t> shape{labels.size()};
    npy::write(path, labels, shape);
}

std::vector<std::pair<std::int64_t, std::int64_t>> read_class_table(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw InputError("cannot open class table " + path.string());
    std::vector<std::pair<std::int64_t, std::int64_t>> rows;
    std::string line;
    std::size_t lineno = 0;
    auto parse = [&](std::string_view s, std::int64_t& v) {
        while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
        while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
        const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
        return ec == std::errc{} && ptr == s.data() + s.size() && !s.empty();
    };
    while (std::getline(in, line)) {
        ++lineno;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        const auto comma = line.find(',');
        if (comma == std::string::npos)
            throw InputError("class table " + path.string() + ":" + std::to_string(lineno) +
                             " needs two columns");
        std::int64_t e = 0, t = 0;
        const std::string_view lv(line);
        if (!parse(lv.substr(0, comma), e) || !parse(lv.substr(comma + 1), t)) {
            if (rows.empty() && lineno == 1) continue;  // header row
            throw InputError("non-integer class id at " + path.string() + ":" + std::to_string(lineno));
        }
        rows.emplace_back(e, t);
    }
    if (rows.empty()) throw InputError("class table " + path.string() + " has no rows");
    return rows;
}

json save_model(const PcaModel& m, const fs::path& dir) {
    if (!m.fitted()) throw UsageError("refusing to save an unfitted PCA model");
    fs::create_directories(dir);
    const std::size_t nf = m.n_features, d = m.n_components;
    npy::write(dir / "mean.npy", std::span<const double>(m.mean.data(), nf), std::vector<std::size_t>{nf});
    npy::write(dir / "components.npy", std::span<const double>(m.components.data(), d * nf),
               std::vector<std::size_t>{d, nf});
    npy::write(dir / "singular_values.npy", std::span<const double>(m.singular_values.data(), d),
               std::vector<std::size_t>{d});
    json manifest = {
        {"schema_version", kManifestSchemaVersion},
        {"kind", "pca"},
        {"fields", {{"n_features", nf}, {"n_components", d}, {"n_samples_seen", m.n_samples_seen}}},
        {"tensors",
         {{"mean", tensor_entry(dir, "mean", npy::ElementType::float64, {nf})},
          {"components", tensor_entry(dir, "components", npy::ElementType::float64, {d, nf})},
          {"singular_values", tensor_entry(dir, "singular_values", npy::ElementType::float64, {d})}}}};
    write_manifest(dir, manifest);
    return manifest;
}

json save_model(const KMeansModel& m, const fs::path& dir) {
    fs::create_directories(dir);
    const std::size_t k = m.k, d = m.d;
    npy::write(dir / "centers.npy", std::span<const double>(m.centers.data(), k * d),
               std::vector<std::size_t>{k, d});
    npy::write(dir / "per_center_counts.npy", std::span<const std::int64_t>(m.per_center_counts),
               std::vector<std::size_t>{k});
    json manifest = {
        {"schema_version", kManifestSchemaVersion},
        {"kind", "kmeans"},
        {"fields",
         {{"k", k}, {"d", d}, {"seed", m.rng_seed}, {"epochs", m.epochs_trained}, {"batch_size", m.batch_size}}},
        {"tensors",
         {{"centers", tensor_entry(dir, "centers", npy::ElementType::float64, {k, d})},
          {"per_center_counts", tensor_entry(dir, "per_center_counts", npy::ElementType::int64, {k})}}}};
    write_manifest(dir, manifest);
    return manifest;
}

PcaModel load_pca(const fs::path& dir) {
    const json manifest = read_manifest(dir);
    return with_manifest_errors(dir, [&] {
        if (manifest.at("kind") != "pca") throw InputError(dir.string() + " does not hold a PCA model");
        const json& f = manifest.at("fields");
        const auto nf = f.at("n_features").get<std::size_t>();
        const auto d = f.at("n_components").get<std::size_t>();
        PcaModel m(nf, d);
        m.n_samples_seen = f.at("n_samples_seen").get<std::size_t>();
        const auto mean = load_float_tensor(manifest, dir, "mean", {nf});
        const auto comps = load_float_tensor(manifest, dir, "components", {d, nf});
        const auto sv = load_float_tensor(manifest, dir, "singular_values", {d});
        m.mean = Eigen::Map<const Vector>(mean.data(), static_cast<Eigen::Index>(nf));
        m.components = Eigen::Map<const Matrix>(comps.data(), static_cast<Eigen::Index>(d),
                                                static_cast<Eigen::Index>(nf));
        m.singular_values = Eigen::Map<const Vector>(sv.data(), static_cast<Eigen::Index>(d));
        return m;
    });
}

KMeansModel load_kmeans(const fs::path& dir) {
    const json manifest = read_manifest(dir);
    return with_manifest_errors(dir, [&] {
        if (manifest.at("kind") != "kmeans") throw InputError(dir.string() + " does not hold a k-means model");
        const json& f = manifest.at("fields");
        KMeansModel m;
        m.k = f.at("k").get<std::size_t>();
        m.d = f.at("d").get<std::size_t>();
        m.rng_seed = f.at("seed").get<std::uint64_t>();
        m.epochs_trained = f.at("epochs").get<std::size_t>();
        m.batch_size = f.at("batch_size").get<std::size_t>();
        const auto centers = load_float_tensor(manifest, dir, "centers", {m.k, m.d});
        m.centers = Eigen::Map<const Matrix>(centers.data(), static_cast<Eigen::Index>(m.k),
                                             static_cast<Eigen::Index>(m.d));
        const json& t = tensor_meta(manifest, dir, "per_center_counts", {m.k});
        m.per_center_counts = npy::read_int(dir / t.at("file").get<std::string>());
        return m;
    });
}

std::variant<PcaModel, KMeansModel> load_model(const fs::path& dir) {
    const json manifest = read_manifest(dir);
    const std::string kind = manifest.value("kind", "");
    if (kind == "pca") return load_pca(dir);
    if (kind == "kmeans") return load_kmeans(dir);
    throw InputError("unknown model kind '" + kind + "' in " + dir.string());
}

Summary summarize(std::span<const double> values) {
    Summary s;
    if (values.empty()) return s;
    double sum = 0.0;
    for (double v : values) sum += v;
    s.mean = sum / static_cast<double>(values.size());
    double sq = 0.0;
    for (double v : values) sq += (v - s.mean) * (v - s.mean);
    s.std = std::sqrt(sq / static_cast<double>(values.size()));
    return s;
}

std::map<std::string, Summary> MetricsReport::aggregate() const {
    std::map<std::string, Summary> out;
    for (const auto& [name, values] : columns(*this)) out[name] = summarize(values);
    return out;
}

json report_to_json(const MetricsReport& r) {
    json per_seed = json::array();
    for (const auto& s : r.per_seed) {
        per_seed.push_back({{"seed", s.seed},
                            {"acc", s.acc},
                            {"acc_tr", s.acc_tr ? json(*s.acc_tr) : json(nullptr)},
                            {"acc_val", s.acc_val},
                            {"ari", s.ari},
                            {"ami", s.ami},
                            {"nmi", s.nmi},
                            {"inertia", s.inertia}});
    }
    json agg = json::object();
    for (const auto& [name, s] : r.aggregate()) agg[name] = {{"mean", s.mean}, {"std", s.std}};
    return {{"config", r.config}, {"per_seed", per_seed}, {"aggregate", agg}};
}

std::string format_double(double v) {
    if (std::isnan(v)) return "nan";
    char buf[64];
    const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, ptr);
}

std::string report_to_csv(const MetricsReport& r) {
    const auto cols = columns(r);
    std::ostringstream out;
    out << "seed";
    for (const auto& [name, _] : cols) out << ',' << name;
    out << '\n';
    for (std::size_t i = 0; i < r.per_seed.size(); ++i) {
        out << r.per_seed[i].seed;
        for (const auto& [_, v] : cols) out << ',' << format_double(v[i]);
        out << '\n';
    }
    out << "MEAN";
    for (const auto& [_, v] : cols) out << ',' << format_double(summarize(v).mean);
    out << "\nSTD";
    for (const auto& [_, v] : cols) out << ',' << format_double(summarize(v).std);
    out << '\n';
    return out.str();
}

void write_report(const MetricsReport& r, const fs::path& path, ReportFormat format) {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw InputError("cannot write report to " + path.string());
    if (format == ReportFormat::json)
        out << report_to_json(r).dump(2) << '\n';
    else
        out << report_to_csv(r);
    if (!out) throw InputError("failed writing report to " + path.string());
}

}  // namespace kmeval
