#include <filesystem>
#include <map>
#include <sstream>

#include "cli.hpp"
#include "doctest.h"
#include "rbedl/io.hpp"

using namespace rbedl;
namespace fs = std::filesystem;

namespace {

struct Outcome {
    int code;
    std::string out, err;
};

Outcome rbedl_run(std::vector<std::string> args) {
    std::ostringstream out, err;
    const int code = cli::run(args, out, err);
    return {code, out.str(), err.str()};
}

fs::path scratch(const std::string& name) {
    const fs::path dir = fs::temp_directory_path() / ("rbedl_test_cli_" + name);
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

// Relative path -> bytes for every regular file below root.
std::map<std::string, std::vector<std::uint8_t>> snapshot(const fs::path& root) {
    std::map<std::string, std::vector<std::uint8_t>> files;
    for (const auto& entry : fs::recursive_directory_iterator(root))
        if (entry.is_regular_file()) files[fs::relative(entry.path(), root).string()] = read_bytes(entry.path());
    return files;
}

std::size_t count_lines(const std::string& text) { return static_cast<std::size_t>(std::count(text.begin(), text.end(), '\n')); }

// Small easy dataset shared by the train/eval cases.
const fs::path& small_dataset() {
    static const fs::path dir = [] {
        const fs::path d = scratch("data") / "ds";
        REQUIRE(rbedl_run({"gen-data", "--out", d.string(), "--n-train", "8", "--n-val", "1", "--n-test", "4"}).code == 0);
        return d;
    }();
    return dir;
}

}  // namespace

TEST_CASE("gen-data defaults write 90 triples and a manifest") {
    const fs::path d = scratch("gen") / "ds";
    const Outcome r = rbedl_run({"gen-data", "--out", d.string()});
    REQUIRE(r.code == 0);
    std::size_t triples = 0;
    for (const char* split : {"train", "val", "test"})
        for (const auto& e : fs::directory_iterator(d / split / "images")) {
            const auto name = e.path().filename();
            CHECK(fs::exists(d / split / "labels" / name));
            CHECK(fs::exists(d / split / "mask" / name));
            ++triples;
        }
    CHECK(triples == 90);
    const std::string manifest = read_text(d / "manifest.json");
    CHECK(manifest.find("\"n_train\": 50") != std::string::npos);
    CHECK(manifest.find("\"seed\": 7") != std::string::npos);
    CHECK(manifest.find("\"difficulty\": \"easy\"") != std::string::npos);
}

TEST_CASE("gen-data is byte-reproducible and guards existing output") {
    const fs::path root = scratch("gen_repeat");
    const std::vector<std::string> flags{"--n-train", "3", "--n-val", "2", "--n-test", "2", "--seed", "11",
                                         "--difficulty", "hard"};
    auto args = [&](const fs::path& out) {
        std::vector<std::string> a{"gen-data", "--out", out.string()};
        a.insert(a.end(), flags.begin(), flags.end());
        return a;
    };
    REQUIRE(rbedl_run(args(root / "a")).code == 0);
    REQUIRE(rbedl_run(args(root / "b")).code == 0);
    CHECK(snapshot(root / "a") == snapshot(root / "b"));

    CHECK(rbedl_run(args(root / "a")).code == cli::kIoFailure);
    auto forced = args(root / "a");
    forced.push_back("--force");
    CHECK(rbedl_run(forced).code == 0);
    CHECK(snapshot(root / "a") == snapshot(root / "b"));

    CHECK(rbedl_run({"gen-data", "--out", (root / "c").string(), "--n-train", "0"}).code == cli::kBadArguments);
    CHECK(rbedl_run({"gen-data", "--out", (root / "c").string(), "--difficulty", "medium"}).code ==
          cli::kBadArguments);
    CHECK(rbedl_run({"gen-data", "--bogus"}).code == cli::kBadArguments);
    CHECK(rbedl_run({}).code == cli::kBadArguments);
}

TEST_CASE("config file supplies snake_case keys and flags win") {
    const fs::path root = scratch("config");
    write_text(root / "gen.json", R"({"n_train": 2, "n_val": 1, "n_test": 5, "seed": 3})");
    REQUIRE(rbedl_run({"gen-data", "--config", (root / "gen.json").string(), "--out", (root / "ds").string(),
                       "--n-test", "1"})
                .code == 0);
    const std::string manifest = read_text(root / "ds" / "manifest.json");
    CHECK(manifest.find("\"n_train\": 2") != std::string::npos);
    CHECK(manifest.find("\"n_test\": 1") != std::string::npos);
    CHECK(manifest.find("\"seed\": 3") != std::string::npos);

    write_text(root / "bad.json", R"({"n_trains": 2})");
    CHECK(rbedl_run({"gen-data", "--config", (root / "bad.json").string(), "--out", (root / "x").string()}).code ==
          cli::kBadArguments);
    write_text(root / "type.json", R"({"n_train": "two"})");
    CHECK(rbedl_run({"gen-data", "--config", (root / "type.json").string(), "--out", (root / "x").string()}).code ==
          cli::kBadArguments);
    CHECK(rbedl_run({"gen-data", "--config", (root / "none.json").string(), "--out", (root / "x").string()}).code ==
          cli::kIoFailure);
}

TEST_CASE("train writes model, trace and config; reruns are byte-identical") {
    const fs::path root = scratch("train");
    const fs::path& data = small_dataset();
    auto train_args = [&](const fs::path& model, const std::string& epochs) {
        return std::vector<std::string>{"train", "--data", data.string(), "--task", "wt", "--loss", "dice",
                                        "--epochs", epochs, "--seed", "4", "--out", model.string()};
    };
    REQUIRE(rbedl_run(train_args(root / "a" / "m.bin", "1")).code == 0);
    const std::string trace = read_text(root / "a" / "trace.csv");
    CHECK(trace.rfind("epoch,data_term,kl_term,lambda,total\n", 0) == 0);
    CHECK(count_lines(trace) == 2);
    CHECK(fs::exists(root / "a" / "m.bin.json"));
    CHECK(read_text(root / "a" / "m.bin.json").find("\"loss\": \"dice\"") != std::string::npos);

    REQUIRE(rbedl_run(train_args(root / "b" / "m.bin", "6")).code == 0);
    REQUIRE(rbedl_run(train_args(root / "c" / "m.bin", "6")).code == 0);
    CHECK(read_bytes(root / "b" / "m.bin") == read_bytes(root / "c" / "m.bin"));
    CHECK(read_bytes(root / "b" / "trace.csv") == read_bytes(root / "c" / "trace.csv"));

    std::stringstream rows(read_text(root / "b" / "trace.csv"));
    std::string line, first, last;
    std::getline(rows, line);
    while (std::getline(rows, line)) {
        if (first.empty()) first = line;
        last = line;
    }
    const double first_total = std::stod(first.substr(first.rfind(',') + 1));
    const double last_total = std::stod(last.substr(last.rfind(',') + 1));
    CHECK(last_total < first_total);

    auto bad = train_args(root / "d" / "m.bin", "1");
    bad[6] = "hinge";
    CHECK(rbedl_run(bad).code == cli::kBadArguments);
    bad = train_args(root / "d" / "m.bin", "0");
    CHECK(rbedl_run(bad).code == cli::kBadArguments);
    bad = train_args(root / "d" / "m.bin", "1");
    bad[4] = "whole";
    CHECK(rbedl_run(bad).code == cli::kBadArguments);
    bad = train_args(root / "d" / "m.bin", "1");
    bad[2] = (root / "missing").string();
    CHECK(rbedl_run(bad).code == cli::kIoFailure);
}

TEST_CASE("eval outputs, perturbation direction and aggregate rows") {
    const fs::path root = scratch("eval");
    const fs::path& data = small_dataset();
    const fs::path model = root / "m.bin";
    REQUIRE(rbedl_run({"train", "--data", data.string(), "--epochs", "15", "--seed", "1", "--out", model.string()})
                .code == 0);

    REQUIRE(rbedl_run({"eval", "--model", model.string(), "--data", data.string(), "--out", (root / "clean").string()})
                .code == 0);
    REQUIRE(rbedl_run({"eval", "--model", model.string(), "--data", data.string(), "--perturb", "blur:1.5", "--out",
                       (root / "blur").string()})
                .code == 0);
    for (const char* prefix : {"unc_", "err_", "seg_"})
        for (std::size_t i = 0; i < 4; ++i) {
            const Grid<std::uint8_t> img = read_pgm(root / "clean" / indexed_name(i, prefix, ".pgm"));
            CHECK(img.height() == 64);
            CHECK(img.width() == 64);
        }
    CHECK(read_text(root / "clean" / "config.json").find("\"label\": \"edl-dice-wt\"") != std::string::npos);

    cli::EvalOptions opt;
    opt.model = model;
    opt.data = data;
    opt.out = root / "clean_again";
    const cli::EvalSummary clean = cli::evaluate(opt);
    opt.perturb = "blur:1.5";
    opt.out = root / "blur_again";
    const cli::EvalSummary blur = cli::evaluate(opt);
    REQUIRE(clean.per_image.size() == 4);
    REQUIRE(clean.aggregate.size() == 1);
    CHECK(blur.aggregate[0].dice <= clean.aggregate[0].dice);
    double mean_dice = 0, mean_ece = 0, mean_sueo = 0, mean_bras = 0;
    for (const auto& row : clean.per_image) {
        mean_dice += row.dice / 4;
        mean_ece += row.ece / 4;
        mean_sueo += row.sueo / 4;
        mean_bras += row.bras / 4;
    }
    CHECK(std::abs(mean_dice - clean.aggregate[0].dice) <= 1e-9);
    CHECK(std::abs(mean_ece - clean.aggregate[0].ece) <= 1e-9);
    CHECK(std::abs(mean_sueo - clean.aggregate[0].sueo) <= 1e-9);
    CHECK(std::abs(mean_bras - clean.aggregate[0].bras) <= 1e-9);
    auto first_run = snapshot(root / "clean");
    auto second_run = snapshot(root / "clean_again");
    // config.json differs only in the recorded output path.
    first_run.erase("config.json");
    second_run.erase("config.json");
    CHECK(first_run == second_run);

    // The CSV carries six significant digits, so its mean agrees to that precision.
    std::stringstream csv(read_text(root / "clean" / "metrics.csv"));
    std::string line;
    std::getline(csv, line);
    CHECK(line == "image,region,dice,ece,sueo,bras");
    double csv_sum = 0.0, csv_mean = 0.0;
    while (std::getline(csv, line)) {
        const double dice = std::stod(line.substr(line.find(",wt,") + 4));
        if (line.rfind("mean,", 0) == 0)
            csv_mean = dice;
        else
            csv_sum += dice;
    }
    CHECK(std::abs(csv_sum / 4 - csv_mean) <= 5e-6);

    CHECK(rbedl_run({"eval", "--model", model.string(), "--data", data.string(), "--perturb", "blur:0", "--out",
                     (root / "x").string()})
              .code == cli::kBadArguments);
    CHECK(rbedl_run({"eval", "--model", model.string(), "--data", data.string(), "--perturb", "tilt:2", "--out",
                     (root / "x").string()})
              .code == cli::kBadArguments);
    CHECK(rbedl_run({"eval", "--model", model.string(), "--data", data.string(), "--task", "multi", "--out",
                     (root / "x").string()})
              .code == cli::kBadArguments);
    CHECK(rbedl_run({"eval", "--model", (root / "nope.bin").string(), "--data", data.string(), "--out",
                     (root / "x").string()})
              .code == cli::kIoFailure);
}

TEST_CASE("zero network uncertainty maps are saturated") {
    const fs::path root = scratch("zero");
    save_model(root / "zero.bin", NetParams::zeros(2, 2));
    REQUIRE(rbedl_run({"eval", "--model", (root / "zero.bin").string(), "--data", small_dataset().string(), "--task",
                       "wt", "--out", (root / "ev").string()})
                .code == 0);
    const Grid<std::uint8_t> unc = read_pgm(root / "ev" / "unc_0000.pgm");
    for (auto v : unc.values()) CHECK(v == 255);
    // Without a sidecar the task must be given.
    CHECK(rbedl_run({"eval", "--model", (root / "zero.bin").string(), "--data", small_dataset().string(), "--out",
                     (root / "ev2").string()})
              .code == cli::kBadArguments);
}

TEST_CASE("multi-class model is scored per subregion") {
    const fs::path root = scratch("multi");
    const fs::path model = root / "m.bin";
    REQUIRE(rbedl_run({"train", "--data", small_dataset().string(), "--task", "multi", "--epochs", "2", "--out",
                       model.string()})
                .code == 0);
    cli::EvalOptions opt;
    opt.model = model;
    opt.data = small_dataset();
    opt.out = root / "ev";
    const cli::EvalSummary s = cli::evaluate(opt);
    REQUIRE(s.aggregate.size() == 3);
    CHECK(s.aggregate[0].region == "wt");
    CHECK(s.aggregate[1].region == "tc");
    CHECK(s.aggregate[2].region == "et");
    CHECK(s.per_image.size() == 12);
}

TEST_CASE("report tabulates runs sorted by label without touching them") {
    const fs::path root = scratch("report");
    const fs::path& data = small_dataset();
    save_model(root / "zero.bin", NetParams::zeros(2, 2));
    for (const char* label : {"zeta", "alpha"})
        REQUIRE(rbedl_run({"eval", "--model", (root / "zero.bin").string(), "--data", data.string(), "--task", "wt",
                           "--label", label, "--out", (root / label).string()})
                    .code == 0);
    const auto before = snapshot(root);
    const Outcome r =
        rbedl_run({"report", "--runs", (root / "zeta").string(), (root / "alpha").string(), "--out",
                   (root / "table.csv").string()});
    REQUIRE(r.code == 0);
    std::stringstream table(r.out);
    std::string header, first, second;
    std::getline(table, header);
    std::getline(table, first);
    std::getline(table, second);
    CHECK(header == "method,dice,ece,sueo,bras");
    CHECK(first.rfind("alpha,", 0) == 0);
    CHECK(second.rfind("zeta,", 0) == 0);
    CHECK(read_text(root / "table.csv") == r.out);
    auto after = snapshot(root);
    after.erase("table.csv");
    CHECK(after == before);

    CHECK(rbedl_run({"report", "--runs", (root / "missing").string()}).code == cli::kIoFailure);
    CHECK(rbedl_run({"report"}).code == cli::kBadArguments);
}

TEST_CASE("labels that break the class contract exit with code 4") {
    const fs::path root = scratch("contract");
    const fs::path d = root / "ds";
    REQUIRE(rbedl_run({"gen-data", "--out", d.string(), "--n-train", "1", "--n-val", "1", "--n-test", "1"}).code == 0);
    Grid<std::uint8_t> labels = read_grid(d / "train" / "labels" / "0000.rbt");
    const Grid<std::uint8_t> mask = read_grid(d / "train" / "mask" / "0000.rbt");
    for (std::size_t i = 0; i < labels.size(); ++i)
        if (mask[i]) {
            labels[i] = 9;
            break;
        }
    write_grid(d / "train" / "labels" / "0000.rbt", labels);
    CHECK(rbedl_run({"train", "--data", d.string(), "--epochs", "1", "--out", (root / "m.bin").string()}).code ==
          cli::kContractViolation);
}
