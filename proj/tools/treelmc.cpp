#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "treelmc/checkpoint.hpp"
#include "treelmc/experiment.hpp"
#include "treelmc/oracle.hpp"

using namespace treelmc;
namespace fs = std::filesystem;

namespace {

constexpr int kExitUsage = 1;
constexpr int kExitVerify = 2;

// Experiment flags shared by the subcommands. Each flag only overrides the
// preset/config-file value when it was actually given.
struct Overrides {
    std::string preset = "desk";
    std::string config_file;
    std::vector<std::function<void(ExperimentConfig&)>> apply;

    template <typename T, typename Setter>
    CLI::Option* add(CLI::App* app, const std::string& name, const std::string& help, Setter set) {
        auto value = std::make_shared<T>();
        CLI::Option* opt = app->add_option(name, *value, help);
        apply.push_back([opt, value, set](ExperimentConfig& c) {
            if (opt->count() > 0) set(c, *value);
        });
        return opt;
    }

    void add_flag(CLI::App* app, const std::string& name, const std::string& help,
                  std::function<void(ExperimentConfig&)> set) {
        CLI::Option* opt = app->add_flag(name, help);
        apply.push_back([opt, set](ExperimentConfig& c) {
            if (opt->count() > 0) set(c);
        });
    }

    ExperimentConfig resolve() const {
        ExperimentConfig c = treelmc::preset(preset);
        if (!config_file.empty()) c = config_from_json(read_json_file(config_file), c);
        for (const auto& f : apply) f(c);
        c.validate();
        return c;
    }
};

void add_experiment_options(CLI::App* app, Overrides& o) {
    app->add_option("--config", o.config_file, "JSON config file; flags override its values")->check(CLI::ExistingFile);
    app->add_option("--preset", o.preset, "desk (D=2, M=64, 20 epochs) or paper (M=256, 50 epochs)")
        ->check(CLI::IsMember({"desk", "paper"}));

    o.add<std::string>(app, "--data", "CSV with a header and a trailing label column",
                       [](ExperimentConfig& c, const std::string& v) { c.data_path = v; });
    o.add<int>(app, "--classes", "class count override for CSV input",
               [](ExperimentConfig& c, int v) { c.classes = v; });
    o.add<std::size_t>(app, "--synth-rows", "synthetic rows when no CSV is given",
                       [](ExperimentConfig& c, std::size_t v) { c.synth.rows = v; });
    o.add<int>(app, "--synth-features", "synthetic feature count",
               [](ExperimentConfig& c, int v) { c.synth.features = v; });
    o.add<int>(app, "--synth-classes", "synthetic class count",
               [](ExperimentConfig& c, int v) { c.synth.classes = v; });
    o.add<double>(app, "--separation", "synthetic cluster separation",
                  [](ExperimentConfig& c, double v) { c.synth.separation = v; });
    o.add<int>(app, "--clusters", "synthetic clusters per class",
               [](ExperimentConfig& c, int v) { c.synth.clusters_per_class = v; });
    o.add<std::uint64_t>(app, "--synth-seed", "synthetic generator seed",
                         [](ExperimentConfig& c, std::uint64_t v) { c.synth.seed = v; });

    o.add<std::string>(app, "--arch", "tree architecture",
                       [](ExperimentConfig& c, const std::string& v) { c.kind = parse_kind(v); })
        ->check(CLI::IsMember({"nonoblivious", "oblivious", "dlist", "dlist-mod"}));
    o.add<int>(app, "--depth", "tree depth", [](ExperimentConfig& c, int v) { c.depth = v; });
    o.add<int>(app, "--trees", "trees per ensemble", [](ExperimentConfig& c, int v) { c.trees = v; });
    o.add<std::string>(app, "--matching", "wm or am",
                       [](ExperimentConfig& c, const std::string& v) { c.matching = parse_method(v); })
        ->check(CLI::IsMember({"wm", "am"}));
    o.add<std::string>(app, "--invariances", "naive, perm or full",
                       [](ExperimentConfig& c, const std::string& v) { c.invariances = parse_level(v); })
        ->check(CLI::IsMember({"naive", "perm", "full"}));
    o.add<int>(app, "--lambda-steps", "interpolation grid intervals",
               [](ExperimentConfig& c, int v) { c.lambda_steps = v; });
    o.add<std::vector<std::uint64_t>>(app, "--seeds-a", "seeds of the A models",
                                      [](ExperimentConfig& c, const std::vector<std::uint64_t>& v) { c.seeds_a = v; });
    o.add<std::vector<std::uint64_t>>(app, "--seeds-b", "seeds of the B models",
                                      [](ExperimentConfig& c, const std::vector<std::uint64_t>& v) { c.seeds_b = v; });
    o.add<std::vector<double>>(app, "--lr-candidates", "learning rates tried per model",
                               [](ExperimentConfig& c, const std::vector<double>& v) { c.train.learning_rates = v; });
    o.add<int>(app, "--epochs", "training epochs", [](ExperimentConfig& c, int v) { c.train.epochs = v; });
    o.add<int>(app, "--batch-size", "mini-batch size", [](ExperimentConfig& c, int v) { c.train.batch_size = v; });
    o.add_flag(app, "--split-data", "train A and B on the 80/20 class-ratio splits",
               [](ExperimentConfig& c) { c.split_data = true; });
    o.add<std::uint64_t>(app, "--data-seed", "seed of the train/test subsample",
                         [](ExperimentConfig& c, std::uint64_t v) { c.data_seed = v; });
    o.add<std::uint64_t>(app, "--split-seed", "seed of the class-ratio split",
                         [](ExperimentConfig& c, std::uint64_t v) { c.split_seed = v; });
    o.add<int>(app, "--am-samples", "samples used by activation matching",
               [](ExperimentConfig& c, int v) { c.am_samples = v; });
    o.add<int>(app, "--jobs", "parallel jobs (results do not depend on it)",
               [](ExperimentConfig& c, int v) { c.jobs = v; });
    o.add<std::string>(app, "--out", "output directory", [](ExperimentConfig& c, const std::string& v) { c.out = v; });
}

void save_config(const ExperimentConfig& c) {
    nlohmann::json j = config_to_json(c);
    j["config_hash"] = config_hash(c);
    j["format_version"] = kReportFormatVersion;
    write_json_file(fs::path(c.out) / "config.json", j);
}

std::string checkpoint_name(char side, std::uint64_t seed) {
    return std::string(1, side) + "_seed" + std::to_string(seed);
}

int cmd_train(const ExperimentConfig& c) {
    const PreparedData data = prepare_data(c);
    const fs::path out(c.out);
    write_prepared(out / "data", data, c);
    save_config(c);
    std::optional<ClassRatioSplit> split;
    if (c.split_data) split = class_ratio_split(data.train, c.split_seed);
    const ArchitectureSpec spec = architecture(c, data.train);
    for (char side : {'a', 'b'}) {
        const Dataset& rows = split ? (side == 'a' ? split->first : split->second) : data.train;
        for (std::uint64_t seed : side == 'a' ? c.seeds_a : c.seeds_b) {
            const TrainedModel m = train_model(spec, rows, c.train, seed);
            const std::string name = checkpoint_name(side, seed);
            nlohmann::json extra = selection_to_json(m);
            extra["config_hash"] = config_hash(c);
            extra["split"] = split ? (side == 'a' ? "first" : "second") : "full";
            save_checkpoint(out / "checkpoints" / (name + ".json"), m.params(), extra);
            write_history_csv(out / "history" / (name + ".csv"), m);
            std::printf("%s lr=%g train_accuracy=%.4f test_accuracy=%.4f\n", name.c_str(),
                        m.selection.best.learning_rate, m.selection.best.train_accuracy.back(),
                        accuracy(m.params(), data.test));
        }
    }
    return 0;
}

std::uint64_t checkpoint_seed(const fs::path& path) {
    const nlohmann::json j = read_json_file(path);
    return j.contains("seed") ? j["seed"].get<std::uint64_t>() : 0;
}

EnsembleParams load_pair_member(const fs::path& path, const ArchitectureSpec* other) {
    EnsembleParams p = load_checkpoint(path);
    if (other && !(p.spec == *other)) throw std::invalid_argument("checkpoints do not share an architecture");
    return p;
}

int cmd_match(const ExperimentConfig& c, const fs::path& a_path, const fs::path& b_path, fs::path out_path) {
    const EnsembleParams A = load_pair_member(a_path, nullptr);
    const EnsembleParams B = load_pair_member(b_path, &A.spec);
    Matrix samples;
    if (c.matching == MatchMethod::Activation && c.invariances != InvarianceLevel::Naive) {
        const PreparedData data = prepare_data(c);
        if (int(data.train.feature_count()) != A.spec.features)
            throw std::invalid_argument("dataset feature count does not match the checkpoints");
        samples = activation_samples(data.train, c.am_samples, c.data_seed);
    }
    const MatchResult r = align(A, B, c.matching, c.invariances, samples);
    nlohmann::json j = alignment_to_json(r.alignment, c.matching, c.invariances, A.spec);
    j["objective"] = r.objective;
    j["config_hash"] = config_hash(c);
    j["format_version"] = kReportFormatVersion;
    if (out_path.empty()) out_path = fs::path(c.out) / "alignment.json";
    write_json_file(out_path, j);
    std::printf("wrote %s objective=%.17g\n", out_path.string().c_str(), r.objective);
    return 0;
}

void print_summary(const nlohmann::json& summary) {
    for (const auto& [method, splits] : summary["barriers"].items()) {
        std::printf("%-6s train %.3f +- %.3f   test %.3f +- %.3f\n", method.c_str(),
                    splits["train"]["mean"].get<double>(), splits["train"]["std"].get<double>(),
                    splits["test"]["mean"].get<double>(), splits["test"]["std"].get<double>());
    }
}

int cmd_barrier(const ExperimentConfig& c, const fs::path& a_path, const fs::path& b_path,
                const fs::path& alignment_path) {
    const PreparedData data = prepare_data(c);
    const fs::path out(c.out);
    save_config(c);
    MatrixResult r;
    if (a_path.empty() && b_path.empty()) {
        write_prepared(out / "data", data, c);
        r = run_matrix(c, data);
    } else {
        if (a_path.empty() || b_path.empty()) throw std::invalid_argument("barrier needs both --a and --b");
        const EnsembleParams A = load_pair_member(a_path, nullptr);
        const EnsembleParams B = load_pair_member(b_path, &A.spec);
        if (int(data.train.feature_count()) != A.spec.features)
            throw std::invalid_argument("dataset feature count does not match the checkpoints");
        r.config = c;
        PairResult pair{checkpoint_seed(a_path), checkpoint_seed(b_path), {}};
        const std::vector<double> grid = lambda_grid(c.lambda_steps);
        if (alignment_path.empty()) {
            const Matrix samples = activation_samples(data.train, c.am_samples, c.data_seed);
            pair.suite = barrier_suite(A, B, data.train, data.test, c.matching, samples, grid);
        } else {
            const nlohmann::json aj = read_json_file(alignment_path);
            SuiteEntry e;
            e.level = parse_level(aj.at("invariances").get<std::string>());
            r.config.matching = parse_method(aj.at("method").get<std::string>());
            e.match.alignment = alignment_from_json(aj, A.spec);
            const EnsembleParams aligned = apply_alignment(A, e.match.alignment);
            e.train = barrier(aligned, B, data.train, grid);
            e.test = barrier(aligned, B, data.test, grid);
            pair.suite.push_back(std::move(e));
        }
        r.pairs.push_back(std::move(pair));
    }
    fs::create_directories(out);
    if (r.models_a.empty()) {
        std::ofstream(out / "report.csv") << report_csv(r);
        std::ofstream(out / "barriers.csv") << barrier_csv(r);
        const nlohmann::json s = summary_json(r);
        write_json_file(out / "summary.json", s);
        print_summary(s);
    } else {
        write_matrix(out, r);
        print_summary(summary_json(r));
    }
    return 0;
}

int cmd_merge_split(const ExperimentConfig& c) {
    const PreparedData data = prepare_data(c);
    save_config(c);
    const MergeResult r = run_merge_split(c, data);
    write_merge(c.out, r);
    for (const auto& p : r.pairs) {
        std::printf("seeds %llu/%llu  A %.3f  B %.3f  best interior %.3f at lambda %.4f%s\n",
                    (unsigned long long)p.seed_a, (unsigned long long)p.seed_b, p.test.accuracy_a, p.test.accuracy_b,
                    p.best_interior, p.best_interior_lambda, p.improves ? "  (above both)" : "");
    }
    std::printf("full-data reference accuracy %.3f\n", mean_std(r.reference_accuracy).mean);
    return 0;
}

int cmd_synth(const ExperimentConfig& c) {
    ExperimentConfig synth_only;
    synth_only.synth = c.synth;
    const Dataset d = load_source(synth_only);
    const fs::path path = fs::path(c.out) / "synth.csv";
    fs::create_directories(c.out);
    write_csv(path, d);
    std::printf("wrote %s (%zu rows, %zu features, %d classes)\n", path.string().c_str(), d.size(),
                d.feature_count(), d.classes);
    return 0;
}

struct VerifyOptions {
    std::string arch;
    int depth = 2;
    int trees = 2;
    int features = 3;
    int classes = 2;
    int trials = 10;
    std::uint64_t seed = 1;
};

int cmd_verify(const VerifyOptions& v) {
    std::vector<oracle::OracleReport> reports;
    if (v.arch.empty()) {
        reports = oracle::default_suite(v.seed);
    } else {
        const ArchitectureSpec spec{parse_kind(v.arch), v.depth, v.trees, v.features, v.classes};
        spec.validate();
        reports.push_back(oracle::equivalence_sweep(spec, v.trials, v.seed));
        reports.push_back(oracle::gradient_check(spec, v.seed + 1));
        if (spec.kind == TreeKind::Oblivious) reports.push_back(oracle::expansion_check(spec, 100, v.seed + 2));
        reports.push_back(oracle::lap_cross_check(100, 6, v.seed + 3));
    }
    int failed = 0;
    for (const auto& r : reports) {
        std::printf("%s %-64s cases=%zu max_deviation=%.3e tolerance=%.0e%s%s\n", r.passed() ? "PASS" : "FAIL",
                    r.name.c_str(), r.cases, r.max_deviation, r.tolerance, r.passed() ? "" : " first_failure=",
                    r.first_failure.value_or("").c_str());
        failed += !r.passed();
    }
    std::printf("%zu checks, %d failed\n", reports.size(), failed);
    return failed ? kExitVerify : 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Soft tree ensembles: training, alignment and linear mode connectivity barriers"};
    app.require_subcommand(1);

    Overrides train_o, match_o, barrier_o, merge_o, synth_o;
    auto* train_cmd = app.add_subcommand("train", "train the A and B models of every seed pair");
    add_experiment_options(train_cmd, train_o);

    auto* match_cmd = app.add_subcommand("match", "align checkpoint A onto checkpoint B");
    add_experiment_options(match_cmd, match_o);
    std::string a_path, b_path, alignment_path, alignment_out;
    match_cmd->add_option("--a", a_path, "checkpoint of model A")->required()->check(CLI::ExistingFile);
    match_cmd->add_option("--b", b_path, "checkpoint of model B")->required()->check(CLI::ExistingFile);
    match_cmd->add_option("--alignment-out", alignment_out, "alignment file (default <out>/alignment.json)");

    auto* barrier_cmd = app.add_subcommand("barrier", "interpolation curves and barriers; without checkpoints "
                                                      "trains and evaluates every seed pair");
    add_experiment_options(barrier_cmd, barrier_o);
    barrier_cmd->add_option("--a", a_path, "checkpoint of model A")->check(CLI::ExistingFile);
    barrier_cmd->add_option("--b", b_path, "checkpoint of model B")->check(CLI::ExistingFile);
    barrier_cmd->add_option("--alignment", alignment_path, "alignment file from `match`")->check(CLI::ExistingFile);

    auto* merge_cmd = app.add_subcommand("merge-split", "merge models trained on 80/20 class-ratio splits");
    add_experiment_options(merge_cmd, merge_o);

    auto* synth_cmd = app.add_subcommand("synth", "write a synthetic dataset to <out>/synth.csv");
    add_experiment_options(synth_cmd, synth_o);

    VerifyOptions verify;
    auto* verify_cmd = app.add_subcommand("verify", "run the reference oracles");
    verify_cmd->add_option("--arch", verify.arch, "only this architecture")
        ->check(CLI::IsMember({"nonoblivious", "oblivious", "dlist", "dlist-mod"}));
    verify_cmd->add_option("--depth", verify.depth, "depth for --arch");
    verify_cmd->add_option("--trees", verify.trees, "trees for the gradient check");
    verify_cmd->add_option("--features", verify.features, "input features");
    verify_cmd->add_option("--classes", verify.classes, "classes");
    verify_cmd->add_option("--trials", verify.trials, "random trees per equivalence sweep");
    verify_cmd->add_option("--seed", verify.seed, "oracle seed");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : kExitUsage;
    }

    try {
        if (*train_cmd) return cmd_train(train_o.resolve());
        if (*match_cmd) return cmd_match(match_o.resolve(), a_path, b_path, alignment_out);
        if (*barrier_cmd) return cmd_barrier(barrier_o.resolve(), a_path, b_path, alignment_path);
        if (*merge_cmd) return cmd_merge_split(merge_o.resolve());
        if (*synth_cmd) return cmd_synth(synth_o.resolve());
        if (*verify_cmd) return cmd_verify(verify);
    } catch (const std::invalid_argument& e) {
        std::fprintf(stderr, "usage error: %s\n", e.what());
        return kExitUsage;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kExitUsage;
    }
    return 0;
}
