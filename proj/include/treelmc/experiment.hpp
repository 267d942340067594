#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "treelmc/data.hpp"
#include "treelmc/evaluation.hpp"
#include "treelmc/matching.hpp"
#include "treelmc/model.hpp"
#include "treelmc/training.hpp"

namespace treelmc {

inline constexpr int kReportFormatVersion = 1;

struct SynthSpec {
    std::size_t rows = 4000;
    int features = 8;
    int classes = 2;
    double separation = 3.0;
    int clusters_per_class = 1;
    std::uint64_t seed = 0;
};

// Everything that determines an experiment's outputs. `out` and `jobs`
// do not affect results and are left out of the hash.
struct ExperimentConfig {
    std::optional<std::string> data_path;
    std::optional<int> classes;  // override for CSV input
    SynthSpec synth;
    TreeKind kind = TreeKind::Oblivious;
    int depth = 2;
    int trees = 64;
    MatchMethod matching = MatchMethod::Weight;
    InvarianceLevel invariances = InvarianceLevel::Full;
    int lambda_steps = 24;
    std::vector<std::uint64_t> seeds_a{1, 3, 5, 7, 9};
    std::vector<std::uint64_t> seeds_b{2, 4, 6, 8, 10};
    TrainConfig train{.learning_rates = {0.01, 0.001, 0.0001}, .batch_size = 512, .epochs = 20};
    bool split_data = false;
    std::uint64_t data_seed = 0;
    std::uint64_t split_seed = 0;
    int am_samples = 512;
    int jobs = 1;
    std::string out = "out";

    /// Throws std::invalid_argument on unequal seed lists, lambda_steps < 1, etc.
    void validate() const;
};

/// "desk" (the defaults above) or "paper" (M = 256, 50 epochs).
ExperimentConfig preset(const std::string& name);

nlohmann::json config_to_json(const ExperimentConfig& c);
/// Applies the keys present in `j` on top of `base`; unknown keys are errors.
ExperimentConfig config_from_json(const nlohmann::json& j, ExperimentConfig base = {});
/// 16 hex digits of FNV-1a over the result-relevant part of the config.
std::string config_hash(const ExperimentConfig& c);

ArchitectureSpec architecture(const ExperimentConfig& c, const Dataset& data);

struct PreparedData {
    Dataset train;  // quantile-transformed
    Dataset test;
    QuantileTransform transform;
};

Dataset load_source(const ExperimentConfig& c);
/// Subsample, then fit the transform on train and apply it to both splits.
PreparedData prepare_data(const ExperimentConfig& c);
/// Writes train.csv, test.csv and a sidecar JSON with the transform and seeds.
void write_prepared(const std::filesystem::path& dir, const PreparedData& data, const ExperimentConfig& c);

/// The first `count` rows of a seeded shuffle of `data` (all rows if fewer).
Matrix activation_samples(const Dataset& data, int count, std::uint64_t seed);

struct TrainedModel {
    std::uint64_t seed = 0;
    LearningRateSelection selection;
    const EnsembleParams& params() const { return selection.best.params; }
};

TrainedModel train_model(const ArchitectureSpec& spec, const Dataset& data, TrainConfig config, std::uint64_t seed);
void write_history_csv(const std::filesystem::path& path, const TrainedModel& model);
nlohmann::json selection_to_json(const TrainedModel& model);

struct PairResult {
    std::uint64_t seed_a = 0;
    std::uint64_t seed_b = 0;
    std::vector<SuiteEntry> suite;  // naive, perm, full
};

struct MatrixResult {
    ExperimentConfig config;
    std::vector<PairResult> pairs;
    std::vector<TrainedModel> models_a;
    std::vector<TrainedModel> models_b;
};

MatrixResult run_matrix(const ExperimentConfig& c, const PreparedData& data);

struct Stats {
    double mean = 0.0;
    double stddev = 0.0;  // population (divides by n)
};
Stats mean_std(std::span<const double> values);

/// CSV: `# treelmc report v1 config <hash>` then a header and one row per
/// (seed pair, method, split, lambda).
std::string report_csv(const MatrixResult& r);
/// One row per (seed pair, method, split) with the barrier and endpoints.
std::string barrier_csv(const MatrixResult& r);
nlohmann::json summary_json(const MatrixResult& r);
/// report.csv, barriers.csv, summary.json and history/<seed>.csv under `dir`.
void write_matrix(const std::filesystem::path& dir, const MatrixResult& r);

struct MergePair {
    std::uint64_t seed_a = 0;
    std::uint64_t seed_b = 0;
    MatchResult match;
    BarrierCurve test;
    double best_interior = 0.0;
    double best_interior_lambda = 0.0;
    bool improves = false;  // best interior accuracy above both endpoints
};

struct MergeResult {
    ExperimentConfig config;
    std::vector<MergePair> pairs;
    std::vector<double> reference_accuracy;  // full-train model per seed_a, on test
};

/// Binary labels only. Model A trains on the 80/20 split, B on its complement.
MergeResult run_merge_split(const ExperimentConfig& c, const PreparedData& data);
std::string merge_csv(const MergeResult& r);
nlohmann::json merge_summary_json(const MergeResult& r);
void write_merge(const std::filesystem::path& dir, const MergeResult& r);

/// Exact text of a double that reads back to the same value.
std::string format_double(double v);

}  // namespace treelmc
