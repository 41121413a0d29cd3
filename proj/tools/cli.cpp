#include "cli.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <functional>
#include <map>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <tuple>

#include "CLI11.hpp"
#include "json.hpp"
#include "rbedl/io.hpp"
#include "rbedl/rng.hpp"

namespace rbedl::cli {
namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

class UsageError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

constexpr const char* kSplits[] = {"train", "val", "test"};

Task require_task(const std::string& name) {
    const auto t = parse_task(name);
    if (!t) throw UsageError("unknown task '" + name + "' (expected wt, tc, et or multi)");
    return *t;
}

LossKind require_loss(const std::string& name) {
    const auto k = parse_loss_kind(name);
    if (!k) throw UsageError("unknown loss '" + name + "' (expected ml, ce, mse, dice or wdice)");
    return *k;
}

std::string lower(std::string_view s) {
    std::string out(s);
    std::transform(out.begin(), out.end(), out.begin(), [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return out;
}

std::string dump(const json& j) { return j.dump(2) + "\n"; }

std::string csv_row(std::initializer_list<std::string> cells) {
    std::string line;
    for (const auto& c : cells) {
        if (!line.empty()) line += ',';
        line += c;
    }
    return line + "\n";
}

std::vector<std::string> split_csv(const std::string& line) {
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    return cells;
}

double parse_double(const std::string& s, const std::string& where) {
    try {
        std::size_t used = 0;
        const double v = std::stod(s, &used);
        if (used != s.size()) throw std::invalid_argument(s);
        return v;
    } catch (const std::exception&) {
        throw IoError(where + ": bad number '" + s + "'");
    }
}

Grid<std::uint8_t> scaled_map(const Grid<double>& values) {
    Grid<std::uint8_t> out(values.height(), values.width());
    for (std::size_t i = 0; i < values.size(); ++i)
        out[i] = static_cast<std::uint8_t>(std::lround(255.0 * std::clamp(values[i], 0.0, 1.0)));
    return out;
}

// Maps kebab-case flags to snake_case config keys and fills every option the
// command line left unset from the config object.
class Bindings {
public:
    explicit Bindings(CLI::App* app) : app_(app) {}

    template <typename T>
    CLI::Option* option(const std::string& flag, T& var, const std::string& help) {
        CLI::Option* opt = app_->add_option("--" + flag, var, help)->capture_default_str();
        bind(flag, opt, [&var](const json& j) { var = j.get<T>(); });
        return opt;
    }

    CLI::Option* flag(const std::string& flag, bool& var, const std::string& help) {
        CLI::Option* opt = app_->add_flag("--" + flag, var, help);
        bind(flag, opt, [&var](const json& j) { var = j.get<bool>(); });
        return opt;
    }

    void apply(const json& cfg) {
        if (!cfg.is_object()) throw UsageError("config file must hold a JSON object");
        for (const auto& [key, value] : cfg.items()) {
            const auto it = setters_.find(key);
            if (it == setters_.end()) throw UsageError("unknown config key '" + key + "'");
            if (it->second.first->count() > 0) continue;
            try {
                it->second.second(value);
            } catch (const json::exception&) {
                throw UsageError("config key '" + key + "' has the wrong type");
            }
        }
    }

private:
    static std::string snake(std::string s) {
        std::replace(s.begin(), s.end(), '-', '_');
        return s;
    }
    void bind(const std::string& flag, CLI::Option* opt, std::function<void(const json&)> set) {
        setters_.emplace(snake(flag), std::make_pair(opt, std::move(set)));
    }

    CLI::App* app_;
    std::map<std::string, std::pair<CLI::Option*, std::function<void(const json&)>>> setters_;
};

json load_config(const std::string& path) {
    if (path.empty()) return json::object();
    const std::string text = read_text(path);
    try {
        return json::parse(text);
    } catch (const json::parse_error& e) {
        throw UsageError("config " + path + ": " + e.what());
    }
}

}  // namespace

fs::path sidecar_path(const fs::path& model) { return fs::path(model.string() + ".json"); }

void gen_data(const GenDataOptions& opt) {
    if (opt.out.empty()) throw UsageError("--out is required");
    if (opt.n_train < 1 || opt.n_val < 1 || opt.n_test < 1) throw UsageError("split sizes must be >= 1");
    const auto difficulty = parse_difficulty(opt.difficulty);
    if (!difficulty) throw UsageError("unknown difficulty '" + opt.difficulty + "' (expected easy or hard)");

    std::error_code ec;
    if (fs::exists(opt.out) && !fs::is_empty(opt.out, ec)) {
        if (!opt.force) throw IoError(opt.out.string() + " is not empty (use --force to regenerate)");
        for (const char* split : kSplits) fs::remove_all(opt.out / split, ec);
        fs::remove(opt.out / "manifest.json", ec);
    }
    fs::create_directories(opt.out, ec);
    if (ec) throw IoError("cannot create " + opt.out.string() + ": " + ec.message());

    const int counts[] = {opt.n_train, opt.n_val, opt.n_test};
    for (std::size_t s = 0; s < 3; ++s)
        write_split(opt.out / kSplits[s],
                    generate_dataset(static_cast<std::size_t>(counts[s]), derive_seed(opt.seed, s), *difficulty));

    json manifest = {{"format", "rbedl-dataset"},
                     {"seed", opt.seed},
                     {"difficulty", opt.difficulty},
                     {"n_train", opt.n_train},
                     {"n_val", opt.n_val},
                     {"n_test", opt.n_test},
                     {"channels", kImageChannels},
                     {"height", kImageSide},
                     {"width", kImageSide},
                     {"classes", 4}};
    write_text(opt.out / "manifest.json", dump(manifest));
}

TrainResult train_model(const TrainOptions& opt) {
    if (opt.data.empty()) throw UsageError("--data is required");
    if (opt.out.empty()) throw UsageError("--out is required");
    const Task task = require_task(opt.task);
    TrainConfig cfg;
    cfg.epochs = opt.epochs;
    cfg.seed = opt.seed;
    cfg.adam.lr = opt.lr;
    cfg.loss.kind = require_loss(opt.loss);
    cfg.loss.kl_max = opt.kl_max;
    cfg.loss.anneal_epochs = opt.anneal_epochs;
    try {
        cfg.validate();
    } catch (const std::invalid_argument& e) {
        throw UsageError(e.what());
    }

    std::vector<TrainSample> data;
    for (const auto& img : read_split(opt.data / "train"))
        data.push_back({img.channels, subregion_labels(img, task)});
    const TrainResult result = train(data, cfg);

    save_model(opt.out, result.params);
    std::string trace = "epoch,data_term,kl_term,lambda,total\n";
    for (std::size_t e = 0; e < result.trace.size(); ++e) {
        const LossValue& v = result.trace[e];
        trace += csv_row({std::to_string(e), format_number(v.data_term), format_number(v.kl_term),
                          format_number(v.lambda), format_number(v.total)});
    }
    const fs::path trace_path = opt.trace ? *opt.trace : opt.out.parent_path() / "trace.csv";
    write_text(trace_path, trace);

    json resolved = {{"command", "train"},
                     {"data", opt.data.string()},
                     {"task", std::string(to_string(task))},
                     {"loss", std::string(to_string(cfg.loss.kind))},
                     {"epochs", opt.epochs},
                     {"lr", opt.lr},
                     {"seed", opt.seed},
                     {"kl_max", opt.kl_max},
                     {"anneal_epochs", opt.anneal_epochs},
                     {"out", opt.out.string()},
                     {"trace", trace_path.string()},
                     {"adam_beta1", cfg.adam.beta1},
                     {"adam_beta2", cfg.adam.beta2},
                     {"adam_eps", cfg.adam.eps},
                     {"steps", result.steps}};
    write_text(sidecar_path(opt.out), dump(resolved));
    return result;
}

EvalSummary evaluate(const EvalOptions& opt) {
    if (opt.model.empty()) throw UsageError("--model is required");
    if (opt.data.empty()) throw UsageError("--data is required");
    if (opt.out.empty()) throw UsageError("--out is required");
    if (opt.bins < 1) throw UsageError("--bins must be >= 1");
    Perturbation perturb;
    try {
        perturb = Perturbation::parse(opt.perturb);
    } catch (const std::invalid_argument& e) {
        throw UsageError(e.what());
    }

    const NetParams params = load_model(opt.model);
    json train_cfg = json::object();
    if (fs::exists(sidecar_path(opt.model))) {
        try {
            train_cfg = json::parse(read_text(sidecar_path(opt.model)));
        } catch (const json::parse_error& e) {
            throw IoError(sidecar_path(opt.model).string() + ": " + e.what());
        }
    }
    std::string task_name;
    if (opt.task) {
        task_name = *opt.task;
    } else if (train_cfg.contains("task")) {
        task_name = train_cfg["task"].get<std::string>();
    } else {
        throw UsageError("--task is required when the model has no config sidecar");
    }
    const Task task = require_task(task_name);
    if (params.classes != task_classes(task))
        throw UsageError("model has " + std::to_string(params.classes) + " classes but task " + task_name +
                         " needs " + std::to_string(task_classes(task)));
    const std::string loss_name = train_cfg.contains("loss") ? train_cfg["loss"].get<std::string>() : "unknown";

    const auto images = read_split(opt.data / opt.split);
    std::vector<Task> regions = task == Task::MULTI ? std::vector<Task>{Task::WT, Task::TC, Task::ET}
                                                    : std::vector<Task>{task};
    MetricsOptions mopt;
    mopt.m_bins = static_cast<std::size_t>(opt.bins);

    EvalSummary summary;
    summary.label = opt.label ? *opt.label : "edl-" + lower(loss_name) + "-" + std::string(to_string(task));
    std::vector<EvalRow> sums(regions.size());
    for (std::size_t i = 0; i < images.size(); ++i) {
        const SynthImage& img = images[i];
        const Field input = perturb.apply(img.channels, derive_seed(opt.seed, i));
        const Prediction pred = predict(params, input);
        const LabelField truth = subregion_labels(img, task);

        for (std::size_t r = 0; r < regions.size(); ++r) {
            Mask pred_mask(pred.labels.height(), pred.labels.width());
            if (task == Task::MULTI) {
                pred_mask = region_mask(pred.labels, regions[r]);
            } else {
                for (std::size_t v = 0; v < pred_mask.size(); ++v) pred_mask[v] = pred.labels[v] == 1;
            }
            const Mask gt_mask = region_mask(img.labels.labels(), regions[r]);
            const MetricsReport m = evaluate_region(pred.uncertainty, pred_mask, gt_mask, img.labels.domain_mask(), mopt);
            const EvalRow row{indexed_name(i, "", ""), std::string(to_string(regions[r])), m.dice, m.ece, m.sueo, m.bras};
            summary.per_image.push_back(row);
            sums[r].dice += m.dice;
            sums[r].ece += m.ece;
            sums[r].sueo += m.sueo;
            sums[r].bras += m.bras;
        }

        Grid<std::uint8_t> err_map(truth.height(), truth.width());
        Grid<std::uint8_t> seg_map(truth.height(), truth.width());
        const double seg_scale = 255.0 / static_cast<double>(params.classes - 1);
        for (std::size_t v = 0; v < err_map.size(); ++v) {
            err_map[v] = pred.labels[v] != truth.label(v) ? 255 : 0;
            seg_map[v] = static_cast<std::uint8_t>(std::lround(seg_scale * pred.labels[v]));
        }
        write_pgm(opt.out / indexed_name(i, "unc_", ".pgm"), scaled_map(pred.uncertainty.values));
        write_pgm(opt.out / indexed_name(i, "err_", ".pgm"), err_map);
        write_pgm(opt.out / indexed_name(i, "seg_", ".pgm"), seg_map);
    }
    const double n = static_cast<double>(images.size());
    for (std::size_t r = 0; r < regions.size(); ++r)
        summary.aggregate.push_back({"mean", std::string(to_string(regions[r])), sums[r].dice / n, sums[r].ece / n,
                                     sums[r].sueo / n, sums[r].bras / n});

    std::string csv = "image,region,dice,ece,sueo,bras\n";
    for (const auto* rows : {&summary.per_image, &summary.aggregate})
        for (const EvalRow& row : *rows)
            csv += csv_row({row.image, row.region, format_number(row.dice), format_number(row.ece),
                            format_number(row.sueo), format_number(row.bras)});
    write_text(opt.out / "metrics.csv", csv);

    json resolved = {{"command", "eval"},
                     {"model", opt.model.string()},
                     {"data", opt.data.string()},
                     {"split", opt.split},
                     {"perturb", perturb.to_string()},
                     {"out", opt.out.string()},
                     {"task", std::string(to_string(task))},
                     {"loss", loss_name},
                     {"label", summary.label},
                     {"bins", opt.bins},
                     {"seed", opt.seed},
                     {"images", images.size()},
                     {"train", train_cfg}};
    write_text(opt.out / "config.json", dump(resolved));
    return summary;
}

std::string report(const ReportOptions& opt) {
    if (opt.runs.empty()) throw UsageError("--runs needs at least one eval directory");
    struct Row {
        std::string label;
        std::string source;
        double values[4];
    };
    std::vector<Row> rows;
    for (const fs::path& run : opt.runs) {
        const fs::path csv_path = run / "metrics.csv";
        if (!fs::exists(csv_path)) throw IoError("missing " + csv_path.string());
        std::stringstream csv(read_text(csv_path));
        std::string line;
        std::getline(csv, line);
        if (line != "image,region,dice,ece,sueo,bras") throw IoError(csv_path.string() + ": unexpected header");
        Row row{run.filename().string(), run.string(), {0, 0, 0, 0}};
        if (row.label.empty()) row.label = run.parent_path().filename().string();
        int regions = 0;
        while (std::getline(csv, line)) {
            const auto cells = split_csv(line);
            if (cells.size() != 6) throw IoError(csv_path.string() + ": malformed row");
            if (cells[0] != "mean") continue;
            for (int k = 0; k < 4; ++k) row.values[k] += parse_double(cells[2 + k], csv_path.string());
            ++regions;
        }
        if (regions == 0) throw IoError(csv_path.string() + ": no aggregate row");
        for (double& v : row.values) v /= regions;
        if (fs::exists(run / "config.json")) {
            try {
                const json cfg = json::parse(read_text(run / "config.json"));
                if (cfg.contains("label")) row.label = cfg["label"].get<std::string>();
            } catch (const json::exception& e) {
                throw IoError((run / "config.json").string() + ": " + e.what());
            }
        }
        rows.push_back(row);
    }
    std::sort(rows.begin(), rows.end(),
              [](const Row& a, const Row& b) { return std::tie(a.label, a.source) < std::tie(b.label, b.source); });
    std::string table = "method,dice,ece,sueo,bras\n";
    for (const Row& r : rows)
        table += csv_row({r.label, format_number(r.values[0]), format_number(r.values[1]), format_number(r.values[2]),
                          format_number(r.values[3])});
    if (opt.out) write_text(*opt.out, table);
    return table;
}

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Dirichlet evidential segmentation toolkit", "rbedl"};
    app.require_subcommand(1);

    GenDataOptions gen;
    std::string gen_out, gen_config;
    CLI::App* gen_cmd = app.add_subcommand("gen-data", "Generate a synthetic train/val/test dataset");
    Bindings gen_b(gen_cmd);
    gen_b.option("out", gen_out, "Output directory");
    gen_b.option("n-train", gen.n_train, "Training images");
    gen_b.option("n-val", gen.n_val, "Validation images");
    gen_b.option("n-test", gen.n_test, "Test images");
    gen_b.option("seed", gen.seed, "Generator seed");
    gen_b.option("difficulty", gen.difficulty, "easy or hard");
    gen_b.flag("force", gen.force, "Regenerate into a non-empty directory");
    gen_cmd->add_option("--config", gen_config, "JSON config; flags override it");

    TrainOptions tr;
    std::string tr_data, tr_out, tr_trace, tr_config;
    CLI::App* train_cmd = app.add_subcommand("train", "Train an evidential segmentation model");
    Bindings tr_b(train_cmd);
    tr_b.option("data", tr_data, "Dataset directory");
    tr_b.option("task", tr.task, "wt, tc, et or multi");
    tr_b.option("loss", tr.loss, "ml, ce, mse, dice or wdice");
    tr_b.option("epochs", tr.epochs, "Training epochs");
    tr_b.option("lr", tr.lr, "Adam learning rate");
    tr_b.option("seed", tr.seed, "Initialisation and shuffle seed");
    tr_b.option("kl-max", tr.kl_max, "Final KL weight");
    tr_b.option("anneal-epochs", tr.anneal_epochs, "Epochs until the KL weight saturates");
    tr_b.option("out", tr_out, "Model file");
    tr_b.option("trace", tr_trace, "Loss trace CSV (default: trace.csv beside the model)");
    train_cmd->add_option("--config", tr_config, "JSON config; flags override it");

    EvalOptions ev;
    std::string ev_model, ev_data, ev_out, ev_task, ev_label, ev_config;
    CLI::App* eval_cmd = app.add_subcommand("eval", "Evaluate a model on a dataset split");
    Bindings ev_b(eval_cmd);
    ev_b.option("model", ev_model, "Model file");
    ev_b.option("data", ev_data, "Dataset directory");
    ev_b.option("split", ev.split, "train, val or test");
    ev_b.option("perturb", ev.perturb, "none, blur:S, noise:V or gamma:G");
    ev_b.option("out", ev_out, "Output directory");
    ev_b.option("task", ev_task, "Override the task recorded with the model");
    ev_b.option("label", ev_label, "Method label (default edl-{loss}-{task})");
    ev_b.option("bins", ev.bins, "Calibration bins");
    ev_b.option("seed", ev.seed, "Noise seed");
    eval_cmd->add_option("--config", ev_config, "JSON config; flags override it");

    ReportOptions rep;
    std::vector<std::string> rep_runs;
    std::string rep_out, rep_config;
    CLI::App* report_cmd = app.add_subcommand("report", "Tabulate eval directories");
    Bindings rep_b(report_cmd);
    rep_b.option("runs", rep_runs, "Eval output directories");
    rep_b.option("out", rep_out, "CSV file (default: stdout only)");
    report_cmd->add_option("--config", rep_config, "JSON config; flags override it");

    try {
        std::vector<std::string> reversed(args.rbegin(), args.rend());
        app.parse(reversed);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? kOk : kBadArguments;
    }

    try {
        if (gen_cmd->parsed()) {
            gen_b.apply(load_config(gen_config));
            gen.out = gen_out;
            gen_data(gen);
            out << "wrote " << gen.n_train + gen.n_val + gen.n_test << " images to " << gen.out.string() << "\n";
        } else if (train_cmd->parsed()) {
            tr_b.apply(load_config(tr_config));
            tr.data = tr_data;
            tr.out = tr_out;
            if (!tr_trace.empty()) tr.trace = tr_trace;
            const TrainResult r = train_model(tr);
            out << "trained " << r.trace.size() << " epochs (" << r.steps << " steps), final loss "
                << format_number(r.trace.back().total) << "\n";
        } else if (eval_cmd->parsed()) {
            ev_b.apply(load_config(ev_config));
            ev.model = ev_model;
            ev.data = ev_data;
            ev.out = ev_out;
            if (!ev_task.empty()) ev.task = ev_task;
            if (!ev_label.empty()) ev.label = ev_label;
            const EvalSummary s = evaluate(ev);
            for (const EvalRow& row : s.aggregate)
                out << s.label << " " << row.region << ": dice " << format_number(row.dice) << " ece "
                    << format_number(row.ece) << " sueo " << format_number(row.sueo) << " bras "
                    << format_number(row.bras) << "\n";
        } else if (report_cmd->parsed()) {
            rep_b.apply(load_config(rep_config));
            rep.runs.assign(rep_runs.begin(), rep_runs.end());
            if (!rep_out.empty()) rep.out = rep_out;
            out << report(rep);
        }
    } catch (const UsageError& e) {
        err << "error: " << e.what() << "\n";
        return kBadArguments;
    } catch (const ContractViolation& e) {
        err << "contract violation: " << e.what() << "\n";
        return kContractViolation;
    } catch (const IoError& e) {
        err << "I/O error: " << e.what() << "\n";
        return kIoFailure;
    } catch (const fs::filesystem_error& e) {
        err << "I/O error: " << e.what() << "\n";
        return kIoFailure;
    } catch (const ShapeError& e) {
        err << "error: " << e.what() << "\n";
        return kBadArguments;
    } catch (const std::invalid_argument& e) {
        err << "error: " << e.what() << "\n";
        return kBadArguments;
    }
    return kOk;
}

}  // namespace rbedl::cli
