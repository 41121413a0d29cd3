#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "rbedl/metrics.hpp"
#include "rbedl/net.hpp"
#include "rbedl/synthdata.hpp"

namespace rbedl::cli {

enum ExitCode : int { kOk = 0, kBadArguments = 2, kIoFailure = 3, kContractViolation = 4 };

// Entry point minus the program name, e.g. {"train", "--data", "d", ...}.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

struct GenDataOptions {
    std::filesystem::path out;
    int n_train = 50;
    int n_val = 20;
    int n_test = 20;
    std::uint64_t seed = 7;
    std::string difficulty = "easy";
    bool force = false;
};
void gen_data(const GenDataOptions& opt);

struct TrainOptions {
    std::filesystem::path data;
    std::string task = "wt";
    std::string loss = "dice";
    int epochs = 200;
    double lr = 1e-3;
    std::uint64_t seed = 0;
    double kl_max = 0.1;
    int anneal_epochs = 100;
    std::filesystem::path out;
    // Defaults to trace.csv beside the model.
    std::optional<std::filesystem::path> trace;
};
TrainResult train_model(const TrainOptions& opt);
// Sidecar holding the resolved training config: MODEL.json.
std::filesystem::path sidecar_path(const std::filesystem::path& model);

struct EvalOptions {
    std::filesystem::path model;
    std::filesystem::path data;
    std::string split = "test";
    std::string perturb = "none";
    std::filesystem::path out;
    // Taken from the model sidecar when absent.
    std::optional<std::string> task;
    std::optional<std::string> label;
    int bins = 10;
    std::uint64_t seed = 0;
};

struct EvalRow {
    std::string image;  // zero-padded index, or "mean"
    std::string region;
    double dice = 0.0, ece = 0.0, sueo = 0.0, bras = 0.0;
};

struct EvalSummary {
    std::string label;
    std::vector<EvalRow> per_image;
    std::vector<EvalRow> aggregate;  // one per region
};
EvalSummary evaluate(const EvalOptions& opt);

struct ReportOptions {
    std::vector<std::filesystem::path> runs;
    std::optional<std::filesystem::path> out;
};
// The comparison table as CSV text; also written to opt.out when set.
std::string report(const ReportOptions& opt);

}  // namespace rbedl::cli
