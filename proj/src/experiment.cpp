#include "treelmc/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <cinttypes>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <sstream>
#include <stdexcept>
#include <thread>

#include "treelmc/checkpoint.hpp"
#include "treelmc/random.hpp"

namespace treelmc {

namespace {

constexpr std::uint64_t kSampleStream = 0xa11;

std::uint64_t fnv1a(const std::string& s) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char ch : s) {
        h ^= ch;
        h *= 0x100000001b3ULL;
    }
    return h;
}

void write_text(const std::filesystem::path& path, const std::string& text) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    out << text;
    if (!out) throw std::runtime_error("write failed: " + path.string());
}

// Runs job(i) for i in [0, n) on up to `jobs` threads. Each job writes only
// its own slot, so the result does not depend on scheduling.
template <typename Job>
void run_jobs(std::size_t n, int jobs, const Job& job) {
    const std::size_t workers = std::min<std::size_t>(n, std::size_t(std::max(jobs, 1)));
    if (workers <= 1) {
        for (std::size_t i = 0; i < n; ++i) job(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::vector<std::exception_ptr> errors(n);
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < workers; ++w) {
        pool.emplace_back([&] {
            for (std::size_t i; (i = next.fetch_add(1)) < n;) {
                try {
                    job(i);
                } catch (...) {
                    errors[i] = std::current_exception();
                }
            }
        });
    }
    for (auto& t : pool) t.join();
    for (auto& e : errors) {
        if (e) std::rethrow_exception(e);
    }
}

std::string header_line(const ExperimentConfig& c, const char* kind) {
    return std::string("# treelmc ") + kind + " v" + std::to_string(kReportFormatVersion) + " config " +
           config_hash(c) + "\n";
}

const char* split_name(bool test) { return test ? "test" : "train"; }

}  // namespace

std::string format_double(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

void ExperimentConfig::validate() const {
    if (seeds_a.size() != seeds_b.size()) throw std::invalid_argument("seeds-a and seeds-b must have equal length");
    if (seeds_a.empty()) throw std::invalid_argument("at least one seed pair is required");
    if (lambda_steps < 1) throw std::invalid_argument("lambda-steps must be at least 1");
    if (am_samples < 1) throw std::invalid_argument("am-samples must be positive");
    if (jobs < 1) throw std::invalid_argument("jobs must be positive");
    if (!data_path) {
        if (synth.rows < 2 || synth.features < 1 || synth.classes < 2 || synth.clusters_per_class < 1)
            throw std::invalid_argument("invalid synthetic dataset parameters");
    }
    train.validate();
    ArchitectureSpec{kind, depth, trees, 1, 2}.validate();
}

ExperimentConfig preset(const std::string& name) {
    ExperimentConfig c;
    if (name == "desk") return c;
    if (name == "paper") {
        c.trees = 256;
        c.train.epochs = 50;
        return c;
    }
    throw std::invalid_argument("unknown preset '" + name + "' (expected desk or paper)");
}

nlohmann::json config_to_json(const ExperimentConfig& c) {
    nlohmann::json j;
    j["data"] = c.data_path ? nlohmann::json(*c.data_path) : nlohmann::json(nullptr);
    j["classes"] = c.classes ? nlohmann::json(*c.classes) : nlohmann::json(nullptr);
    j["synth"] = {{"rows", c.synth.rows},
                  {"features", c.synth.features},
                  {"classes", c.synth.classes},
                  {"separation", c.synth.separation},
                  {"clusters_per_class", c.synth.clusters_per_class},
                  {"seed", c.synth.seed}};
    j["arch"] = std::string(kind_name(c.kind));
    j["depth"] = c.depth;
    j["trees"] = c.trees;
    j["matching"] = std::string(method_name(c.matching));
    j["invariances"] = std::string(level_name(c.invariances));
    j["lambda_steps"] = c.lambda_steps;
    j["seeds_a"] = c.seeds_a;
    j["seeds_b"] = c.seeds_b;
    j["lr_candidates"] = c.train.learning_rates;
    j["epochs"] = c.train.epochs;
    j["batch_size"] = c.train.batch_size;
    j["adam"] = {{"beta1", c.train.adam_beta1}, {"beta2", c.train.adam_beta2}, {"eps", c.train.adam_eps}};
    j["split_data"] = c.split_data;
    j["data_seed"] = c.data_seed;
    j["split_seed"] = c.split_seed;
    j["am_samples"] = c.am_samples;
    j["jobs"] = c.jobs;
    j["out"] = c.out;
    return j;
}

ExperimentConfig config_from_json(const nlohmann::json& j, ExperimentConfig c) {
    if (!j.is_object()) throw std::invalid_argument("config must be a JSON object");
    for (const auto& [key, v] : j.items()) {
        if (key == "data") c.data_path = v.is_null() ? std::nullopt : std::optional<std::string>(v.get<std::string>());
        else if (key == "classes") c.classes = v.is_null() ? std::nullopt : std::optional<int>(v.get<int>());
        else if (key == "synth") {
            for (const auto& [sk, sv] : v.items()) {
                if (sk == "rows") c.synth.rows = sv.get<std::size_t>();
                else if (sk == "features") c.synth.features = sv.get<int>();
                else if (sk == "classes") c.synth.classes = sv.get<int>();
                else if (sk == "separation") c.synth.separation = sv.get<double>();
                else if (sk == "clusters_per_class") c.synth.clusters_per_class = sv.get<int>();
                else if (sk == "seed") c.synth.seed = sv.get<std::uint64_t>();
                else throw std::invalid_argument("unknown config key synth." + sk);
            }
        } else if (key == "arch") c.kind = parse_kind(v.get<std::string>());
        else if (key == "depth") c.depth = v.get<int>();
        else if (key == "trees") c.trees = v.get<int>();
        else if (key == "matching") c.matching = parse_method(v.get<std::string>());
        else if (key == "invariances") c.invariances = parse_level(v.get<std::string>());
        else if (key == "lambda_steps") c.lambda_steps = v.get<int>();
        else if (key == "seeds_a") c.seeds_a = v.get<std::vector<std::uint64_t>>();
        else if (key == "seeds_b") c.seeds_b = v.get<std::vector<std::uint64_t>>();
        else if (key == "lr_candidates") c.train.learning_rates = v.get<std::vector<double>>();
        else if (key == "epochs") c.train.epochs = v.get<int>();
        else if (key == "batch_size") c.train.batch_size = v.get<int>();
        else if (key == "adam") {
            for (const auto& [ak, av] : v.items()) {
                if (ak == "beta1") c.train.adam_beta1 = av.get<double>();
                else if (ak == "beta2") c.train.adam_beta2 = av.get<double>();
                else if (ak == "eps") c.train.adam_eps = av.get<double>();
                else throw std::invalid_argument("unknown config key adam." + ak);
            }
        } else if (key == "split_data") c.split_data = v.get<bool>();
        else if (key == "data_seed") c.data_seed = v.get<std::uint64_t>();
        else if (key == "split_seed") c.split_seed = v.get<std::uint64_t>();
        else if (key == "am_samples") c.am_samples = v.get<int>();
        else if (key == "jobs") c.jobs = v.get<int>();
        else if (key == "out") c.out = v.get<std::string>();
        else if (key == "preset") continue;
        else throw std::invalid_argument("unknown config key " + key);
    }
    return c;
}

std::string config_hash(const ExperimentConfig& c) {
    nlohmann::json j = config_to_json(c);
    j.erase("out");
    j.erase("jobs");
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016" PRIx64, fnv1a(j.dump()));
    return buf;
}

ArchitectureSpec architecture(const ExperimentConfig& c, const Dataset& data) {
    ArchitectureSpec spec{c.kind, c.depth, c.trees, static_cast<int>(data.feature_count()), data.classes};
    spec.validate();
    return spec;
}

Dataset load_source(const ExperimentConfig& c) {
    if (c.data_path) return load_csv(*c.data_path, c.classes);
    const auto& s = c.synth;
    return synth_gaussian_blobs(s.rows, s.features, s.classes, s.separation, s.seed, s.clusters_per_class);
}

PreparedData prepare_data(const ExperimentConfig& c) {
    const Dataset full = load_source(c);
    TrainTestSplit split = subsample_protocol(full, c.data_seed);
    PreparedData out;
    out.transform = fit_quantile_transform(split.train);
    out.train = out.transform.apply(split.train);
    out.test = out.transform.apply(split.test);
    return out;
}

void write_prepared(const std::filesystem::path& dir, const PreparedData& data, const ExperimentConfig& c) {
    std::filesystem::create_directories(dir);
    write_csv(dir / "train.csv", data.train);
    write_csv(dir / "test.csv", data.test);
    nlohmann::json side;
    side["format_version"] = kReportFormatVersion;
    side["config_hash"] = config_hash(c);
    side["provenance"] = data.train.provenance;
    side["data_seed"] = c.data_seed;
    side["train_rows"] = data.train.size();
    side["test_rows"] = data.test.size();
    side["transform"] = data.transform.to_json();
    write_json_file(dir / "preprocessing.json", side);
}

Matrix activation_samples(const Dataset& data, int count, std::uint64_t seed) {
    std::vector<std::size_t> rows(data.size());
    std::iota(rows.begin(), rows.end(), std::size_t{0});
    Rng rng(stream_seed(seed, kSampleStream));
    rng.shuffle(std::span<std::size_t>(rows));
    rows.resize(std::min<std::size_t>(rows.size(), std::size_t(count)));
    return select_rows(data, rows).features;
}

TrainedModel train_model(const ArchitectureSpec& spec, const Dataset& data, TrainConfig config, std::uint64_t seed) {
    config.seed = seed;
    TrainedModel m;
    m.seed = seed;
    m.selection = select_learning_rate(spec, data, config);
    return m;
}

void write_history_csv(const std::filesystem::path& path, const TrainedModel& model) {
    std::ostringstream out;
    out << "epoch,train_accuracy,mean_loss\n";
    const auto& best = model.selection.best;
    for (std::size_t e = 0; e < best.train_accuracy.size(); ++e) {
        out << e + 1 << ',' << format_double(best.train_accuracy[e]) << ',' << format_double(best.mean_loss[e])
            << '\n';
    }
    write_text(path, out.str());
}

nlohmann::json selection_to_json(const TrainedModel& model) {
    return {{"seed", model.seed},
            {"learning_rate", model.selection.best.learning_rate},
            {"candidates", model.selection.candidates},
            {"final_train_accuracy", model.selection.final_accuracy}};
}

MatrixResult run_matrix(const ExperimentConfig& c, const PreparedData& data) {
    c.validate();
    const ArchitectureSpec spec = architecture(c, data.train);
    const std::size_t pairs = c.seeds_a.size();
    MatrixResult r;
    r.config = c;
    r.models_a.resize(pairs);
    r.models_b.resize(pairs);
    r.pairs.resize(pairs);
    run_jobs(2 * pairs, c.jobs, [&](std::size_t i) {
        const bool second = i >= pairs;
        const std::size_t k = i % pairs;
        (second ? r.models_b : r.models_a)[k] =
            train_model(spec, data.train, c.train, second ? c.seeds_b[k] : c.seeds_a[k]);
    });
    const Matrix samples = activation_samples(data.train, c.am_samples, c.data_seed);
    const std::vector<double> grid = lambda_grid(c.lambda_steps);
    run_jobs(pairs, c.jobs, [&](std::size_t k) {
        r.pairs[k].seed_a = c.seeds_a[k];
        r.pairs[k].seed_b = c.seeds_b[k];
        r.pairs[k].suite = barrier_suite(r.models_a[k].params(), r.models_b[k].params(), data.train, data.test,
                                         c.matching, samples, grid);
    });
    return r;
}

Stats mean_std(std::span<const double> values) {
    if (values.empty()) throw std::invalid_argument("mean_std: no values");
    Stats s;
    for (double v : values) s.mean += v;
    s.mean /= double(values.size());
    double ss = 0.0;
    for (double v : values) ss += (v - s.mean) * (v - s.mean);
    s.stddev = std::sqrt(ss / double(values.size()));
    return s;
}

std::string report_csv(const MatrixResult& r) {
    std::ostringstream out;
    out << header_line(r.config, "report");
    out << "method,matching,split,lambda,accuracy,seed_a,seed_b\n";
    const std::string matching(method_name(r.config.matching));
    for (const auto& pair : r.pairs) {
        for (const auto& entry : pair.suite) {
            for (bool test : {false, true}) {
                const BarrierCurve& curve = test ? entry.test : entry.train;
                for (std::size_t k = 0; k < curve.lambdas.size(); ++k) {
                    out << level_name(entry.level) << ',' << matching << ',' << split_name(test) << ','
                        << format_double(curve.lambdas[k]) << ',' << format_double(curve.accuracy[k]) << ','
                        << pair.seed_a << ',' << pair.seed_b << '\n';
                }
            }
        }
    }
    return out.str();
}

std::string barrier_csv(const MatrixResult& r) {
    std::ostringstream out;
    out << header_line(r.config, "barriers");
    out << "method,matching,split,seed_a,seed_b,barrier,accuracy_a,accuracy_b\n";
    const std::string matching(method_name(r.config.matching));
    for (const auto& pair : r.pairs) {
        for (const auto& entry : pair.suite) {
            for (bool test : {false, true}) {
                const BarrierCurve& curve = test ? entry.test : entry.train;
                out << level_name(entry.level) << ',' << matching << ',' << split_name(test) << ',' << pair.seed_a
                    << ',' << pair.seed_b << ',' << format_double(curve.barrier) << ','
                    << format_double(curve.accuracy_a) << ',' << format_double(curve.accuracy_b) << '\n';
            }
        }
    }
    return out.str();
}

nlohmann::json summary_json(const MatrixResult& r) {
    nlohmann::json j;
    j["format_version"] = kReportFormatVersion;
    j["config_hash"] = config_hash(r.config);
    j["config"] = config_to_json(r.config);
    j["matching"] = std::string(method_name(r.config.matching));
    j["endpoints"] = "lambda = 1 is model A (seed_a), lambda = 0 is model B (seed_b)";
    nlohmann::json methods = nlohmann::json::object();
    if (!r.pairs.empty()) {
        for (std::size_t e = 0; e < r.pairs.front().suite.size(); ++e) {
            const InvarianceLevel level = r.pairs.front().suite[e].level;
            nlohmann::json m;
            for (bool test : {false, true}) {
                std::vector<double> values;
                for (const auto& pair : r.pairs) {
                    values.push_back(test ? pair.suite[e].test.barrier : pair.suite[e].train.barrier);
                }
                const Stats s = mean_std(values);
                m[split_name(test)] = {{"mean", s.mean}, {"std", s.stddev}, {"values", values}};
            }
            methods[std::string(level_name(level))] = m;
        }
    }
    j["barriers"] = methods;
    if (r.models_a.size() != r.pairs.size()) return j;
    nlohmann::json lrs = nlohmann::json::array();
    for (std::size_t k = 0; k < r.pairs.size(); ++k) {
        lrs.push_back({{"a", selection_to_json(r.models_a[k])}, {"b", selection_to_json(r.models_b[k])}});
    }
    j["training"] = lrs;
    return j;
}

void write_matrix(const std::filesystem::path& dir, const MatrixResult& r) {
    write_text(dir / "report.csv", report_csv(r));
    write_text(dir / "barriers.csv", barrier_csv(r));
    write_json_file(dir / "summary.json", summary_json(r));
    for (std::size_t k = 0; k < r.pairs.size(); ++k) {
        write_history_csv(dir / "history" / ("a_seed" + std::to_string(r.models_a[k].seed) + ".csv"), r.models_a[k]);
        write_history_csv(dir / "history" / ("b_seed" + std::to_string(r.models_b[k].seed) + ".csv"), r.models_b[k]);
    }
}

MergeResult run_merge_split(const ExperimentConfig& c, const PreparedData& data) {
    c.validate();
    const ClassRatioSplit split = class_ratio_split(data.train, c.split_seed);
    const ArchitectureSpec spec = architecture(c, data.train);
    const std::size_t pairs = c.seeds_a.size();
    std::vector<TrainedModel> a(pairs), b(pairs), reference(pairs);
    run_jobs(3 * pairs, c.jobs, [&](std::size_t i) {
        const std::size_t k = i % pairs;
        switch (i / pairs) {
        case 0: a[k] = train_model(spec, split.first, c.train, c.seeds_a[k]); break;
        case 1: b[k] = train_model(spec, split.second, c.train, c.seeds_b[k]); break;
        default: reference[k] = train_model(spec, data.train, c.train, c.seeds_a[k]); break;
        }
    });
    const Matrix samples = activation_samples(data.train, c.am_samples, c.data_seed);
    const std::vector<double> grid = lambda_grid(c.lambda_steps);
    MergeResult r;
    r.config = c;
    r.pairs.resize(pairs);
    run_jobs(pairs, c.jobs, [&](std::size_t k) {
        MergePair& p = r.pairs[k];
        p.seed_a = c.seeds_a[k];
        p.seed_b = c.seeds_b[k];
        p.match = align(a[k].params(), b[k].params(), c.matching, c.invariances, samples);
        p.test = barrier(apply_alignment(a[k].params(), p.match.alignment), b[k].params(), data.test, grid);
        for (std::size_t i = 1; i + 1 < grid.size(); ++i) {
            if (i == 1 || p.test.accuracy[i] > p.best_interior) {
                p.best_interior = p.test.accuracy[i];
                p.best_interior_lambda = grid[i];
            }
        }
        p.improves = grid.size() > 2 && p.best_interior > std::max(p.test.accuracy_a, p.test.accuracy_b);
    });
    for (const auto& m : reference) r.reference_accuracy.push_back(accuracy(m.params(), data.test));
    return r;
}

std::string merge_csv(const MergeResult& r) {
    std::ostringstream out;
    out << header_line(r.config, "merge-split");
    out << "method,matching,split,lambda,accuracy,seed_a,seed_b\n";
    const std::string method(level_name(r.config.invariances));
    const std::string matching(method_name(r.config.matching));
    for (const auto& p : r.pairs) {
        for (std::size_t k = 0; k < p.test.lambdas.size(); ++k) {
            out << method << ',' << matching << ",test," << format_double(p.test.lambdas[k]) << ','
                << format_double(p.test.accuracy[k]) << ',' << p.seed_a << ',' << p.seed_b << '\n';
        }
    }
    return out.str();
}

nlohmann::json merge_summary_json(const MergeResult& r) {
    nlohmann::json j;
    j["format_version"] = kReportFormatVersion;
    j["config_hash"] = config_hash(r.config);
    j["config"] = config_to_json(r.config);
    j["endpoints"] = "lambda = 1 is model A (80/20 split), lambda = 0 is model B (20/80 split)";
    nlohmann::json pairs = nlohmann::json::array();
    int improved = 0;
    for (std::size_t k = 0; k < r.pairs.size(); ++k) {
        const auto& p = r.pairs[k];
        improved += p.improves;
        pairs.push_back({{"seed_a", p.seed_a},
                         {"seed_b", p.seed_b},
                         {"accuracy_a", p.test.accuracy_a},
                         {"accuracy_b", p.test.accuracy_b},
                         {"best_interior_accuracy", p.best_interior},
                         {"best_interior_lambda", p.best_interior_lambda},
                         {"improves_on_both_endpoints", p.improves},
                         {"reference_accuracy", r.reference_accuracy[k]}});
    }
    j["pairs"] = pairs;
    j["pairs_improved"] = improved;
    j["reference_accuracy"] = {{"mean", mean_std(r.reference_accuracy).mean},
                               {"std", mean_std(r.reference_accuracy).stddev}};
    return j;
}

void write_merge(const std::filesystem::path& dir, const MergeResult& r) {
    write_text(dir / "merge_split.csv", merge_csv(r));
    write_json_file(dir / "merge_summary.json", merge_summary_json(r));
}

}  // namespace treelmc
