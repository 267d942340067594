#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <vector>

#include "json.hpp"
#include "treelmc/dataset.hpp"

namespace treelmc {

/// Header row required; the last column must be named "label" and hold
/// non-negative integers. Class count is max label + 1 unless overridden.
Dataset load_csv(const std::filesystem::path& path, std::optional<int> classes = std::nullopt);

/// Same layout as load_csv reads; numbers are written with 17 significant digits.
void write_csv(const std::filesystem::path& path, const Dataset& data);

// Per-feature map to a standard normal: empirical CDF position with
// plotting position rank/(n+1), linear interpolation between the sorted
// training values, clamping at the extremes, inverse normal CDF, then
// standardization with the training mean and deviation.
struct QuantileTransform {
    struct Feature {
        std::vector<double> values;     // distinct training values, ascending
        std::vector<double> positions;  // CDF position of each value
        double mean = 0.0;
        double stddev = 1.0;
        bool degenerate = false;        // constant on the training rows -> maps to 0
    };
    std::vector<Feature> features;

    double map(std::size_t feature, double x) const;
    Dataset apply(const Dataset& data) const;
    nlohmann::json to_json() const;
};

QuantileTransform fit_quantile_transform(const Dataset& train);

struct TrainTestSplit {
    Dataset train;
    Dataset test;
    std::vector<std::size_t> train_rows;
    std::vector<std::size_t> test_rows;
};

/// 10,000 rows each for train and test when there are at least 20,000 rows;
/// otherwise a random half/half split. Deterministic per seed.
TrainTestSplit subsample_protocol(const Dataset& full, std::uint64_t seed);

struct ClassRatioSplit {
    Dataset first;   // 80% of negatives + 20% of positives
    Dataset second;  // the complement
    std::vector<std::size_t> first_rows;
    std::vector<std::size_t> second_rows;
};

/// Binary labels only. Depends on the data and `split_seed`, never on training seeds.
ClassRatioSplit class_ratio_split(const Dataset& train, std::uint64_t split_seed);

/// Balanced classes drawn from unit-variance normals. With one cluster per
/// class the centers sit on signed coordinate axes, `separation` apart.
/// Extra clusters per class are placed at random in a cube whose side scales
/// with `separation`.
Dataset synth_gaussian_blobs(std::size_t n, int features, int classes, double separation, std::uint64_t seed,
                             int clusters_per_class = 1);

}  // namespace treelmc
