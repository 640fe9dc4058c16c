// kmeval: cluster pre-extracted features (incremental PCA + mini-batch
// k-means) and score the clusters against labels.
//
//   kmeval run   --train-features X.npy --train-labels y.npy --k 1000 --out report.json
//   kmeval fit   --train-features X.npy --out models/
//   kmeval eval  --models models/ --train-features X.npy --train-labels y.npy \
//                --eval-features Z.npy --eval-labels w.npy --assignment val --out report.json
//   kmeval sweep --axis k --values 1000,1500 ... --out sweep.csv

#include <charconv>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "kmeval/errors.hpp"
#include "kmeval/pipeline.hpp"

namespace {

enum ExitCode { kOk = 0, kUsage = 2, kData = 3, kNumeric = 4 };

template <typename T>
std::vector<T> parse_list(const std::string& text, const char* flag) {
    std::vector<T> out;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        const auto first = item.find_first_not_of(' ');
        const auto last = item.find_last_not_of(' ');
        if (first == std::string::npos) continue;
        T v{};
        const char* b = item.data() + first;
        const char* e = item.data() + last + 1;
        const auto [ptr, ec] = std::from_chars(b, e, v);
        if (ec != std::errc{} || ptr != e)
            throw kmeval::UsageError(std::string(flag) + ": '" + item + "' is not a non-negative integer");
        out.push_back(v);
    }
    return out;
}

void add_common(CLI::App& cmd, kmeval::RunConfig& c, std::string& seeds, std::string& assignment,
                std::string& format) {
    cmd.add_option("--train-features", c.train_features, "Training features (.npy, N x D)")->required();
    cmd.add_option("--train-labels", c.train_labels, "Training labels (.npy int or text)");
    cmd.add_option("--eval-features", c.eval_features, "Evaluation features (.npy)");
    cmd.add_option("--eval-labels", c.eval_labels, "Evaluation labels");
    cmd.add_option("--k", c.k, "Number of clusters")->capture_default_str();
    cmd.add_option("--pca-dim", c.pca_dim, "PCA output dimension")->capture_default_str();
    cmd.add_option("--epochs", c.epochs, "k-means epochs")->capture_default_str();
    cmd.add_option("--batch-size", c.batch_size, "k-means mini-batch size")->capture_default_str();
    cmd.add_option("--seeds", seeds, "Comma-separated seeds")->capture_default_str();
    cmd.add_option("--assignment", assignment, "Cluster-to-class map source")
        ->check(CLI::IsMember({"train", "val"}))
        ->capture_default_str();
    cmd.add_option("--classes", c.classes, "CSV eval_class,target_class keep/merge table");
    cmd.add_option("--out", c.out, "Output path");
    cmd.add_option("--format", format, "Report format")->check(CLI::IsMember({"json", "csv"}))->capture_default_str();
    cmd.add_flag("--deterministic", c.deterministic, "Ordered reductions (always on)");
    cmd.add_option("--threads", c.threads, "Worker threads")->capture_default_str();
    cmd.add_option("--chunk-rows", c.chunk_rows, "Rows per streamed chunk")->capture_default_str();
}

void print_summary(const kmeval::MetricsReport& report) {
    for (const auto& [name, s] : report.aggregate())
        std::cout << name << ": " << kmeval::format_double(s.mean) << " +- " << kmeval::format_double(s.std)
                  << '\n';
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Clustering evaluation of pre-extracted feature vectors"};
    app.require_subcommand(1);

    kmeval::RunConfig config;
    std::string seeds = "0,1,2,3,4";
    std::string assignment = "train";
    std::string format = "json";
    std::string models_dir;
    std::string axis;
    std::string values;

    auto* fit = app.add_subcommand("fit", "Fit PCA and k-means for every seed and save the models");
    add_common(*fit, config, seeds, assignment, format);
    auto* eval = app.add_subcommand("eval", "Score saved models on an evaluation set");
    add_common(*eval, config, seeds, assignment, format);
    eval->add_option("--models", models_dir, "Directory written by 'fit'")->required();
    auto* run = app.add_subcommand("run", "Fit and evaluate in one go");
    add_common(*run, config, seeds, assignment, format);
    auto* sweep = app.add_subcommand("sweep", "Repeat 'run' over PCA dimensions or cluster counts");
    add_common(*sweep, config, seeds, assignment, format);
    sweep->add_option("--axis", axis, "Swept parameter")->check(CLI::IsMember({"pca_dim", "k"}))->required();
    sweep->add_option("--values", values, "Comma-separated values")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? kOk : kUsage;
    }

    try {
        config.seeds = parse_list<std::uint64_t>(seeds, "--seeds");
        config.assignment =
            assignment == "val" ? kmeval::AssignmentSource::val : kmeval::AssignmentSource::train;
        config.format = format == "csv" ? kmeval::ReportFormat::csv : kmeval::ReportFormat::json;

        if (fit->parsed()) {
            if (config.out.empty()) throw kmeval::UsageError("fit needs --out DIR");
            const auto models = kmeval::cmd_fit(config);
            std::cout << "saved " << models.size() << " seed model(s) under " << config.out << '\n';
        } else if (eval->parsed()) {
            print_summary(kmeval::cmd_eval(config, models_dir));
        } else if (run->parsed()) {
            print_summary(kmeval::cmd_run(config));
        } else if (sweep->parsed()) {
            const auto list = parse_list<std::size_t>(values, "--values");
            const auto ax = axis == "k" ? kmeval::SweepAxis::k : kmeval::SweepAxis::pca_dim;
            for (const auto& row : kmeval::cmd_sweep(config, ax, list))
                std::cout << axis << '=' << row.value << " acc=" << kmeval::format_double(row.aggregate.at("acc").mean)
                          << " ari=" << kmeval::format_double(row.aggregate.at("ari").mean) << '\n';
        }
    } catch (const kmeval::UsageError& e) {
        std::cerr << "usage error: " << e.what() << '\n';
        return kUsage;
    } catch (const kmeval::NumericError& e) {
        std::cerr << "numeric failure: " << e.what() << '\n';
        return kNumeric;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kData;
    }
    return kOk;
}
