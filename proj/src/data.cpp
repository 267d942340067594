#include "treelmc/data.hpp"

#include <algorithm>
#include <boost/math/distributions/normal.hpp>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <sstream>
#include <stdexcept>
#include <string>

#include "treelmc/random.hpp"

namespace treelmc {

namespace {

std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
    return s;
}

std::vector<std::string_view> split_fields(std::string_view line) {
    std::vector<std::string_view> out;
    std::size_t start = 0;
    while (true) {
        const std::size_t comma = line.find(',', start);
        out.push_back(trim(line.substr(start, comma == std::string_view::npos ? std::string_view::npos : comma - start)));
        if (comma == std::string_view::npos) break;
        start = comma + 1;
    }
    return out;
}

std::string fnv_hex(std::string_view bytes) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

double inverse_normal_cdf(double p) {
    static const boost::math::normal_distribution<double> standard;
    return boost::math::quantile(standard, p);
}

}  // namespace

Dataset load_csv(const std::filesystem::path& path, std::optional<int> classes) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open " + path.string());
    std::stringstream buffer;
    buffer << in.rdbuf();
    const std::string content = buffer.str();

    std::istringstream lines(content);
    std::string line;
    std::size_t line_no = 0;
    std::vector<std::string_view> header;
    std::string header_line;
    while (std::getline(lines, header_line)) {
        ++line_no;
        if (!trim(header_line).empty()) break;
    }
    if (trim(header_line).empty()) throw std::runtime_error(path.string() + ": missing header row");
    header = split_fields(header_line);
    if (header.size() < 2 || header.back() != "label") {
        throw std::runtime_error(path.string() + ": header must end with a 'label' column");
    }
    const std::size_t F = header.size() - 1;

    std::vector<double> values;
    std::vector<int> labels;
    while (std::getline(lines, line)) {
        ++line_no;
        if (trim(line).empty()) continue;
        const auto fields = split_fields(line);
        const std::string where = path.string() + ":" + std::to_string(line_no);
        if (fields.size() != header.size()) {
            throw std::runtime_error(where + ": expected " + std::to_string(header.size()) + " fields, found " +
                                     std::to_string(fields.size()));
        }
        for (std::size_t f = 0; f < F; ++f) {
            double v = 0.0;
            const auto field = fields[f];
            const auto res = std::from_chars(field.data(), field.data() + field.size(), v);
            if (field.empty() || res.ec != std::errc() || res.ptr != field.data() + field.size() || !std::isfinite(v)) {
                throw std::runtime_error(where + ": non-numeric feature '" + std::string(field) + "'");
            }
            values.push_back(v);
        }
        int label = 0;
        const auto lf = fields.back();
        const auto res = std::from_chars(lf.data(), lf.data() + lf.size(), label);
        if (lf.empty() || res.ec != std::errc() || res.ptr != lf.data() + lf.size() || label < 0) {
            throw std::runtime_error(where + ": label '" + std::string(lf) + "' is not a non-negative integer");
        }
        labels.push_back(label);
    }
    if (labels.empty()) throw std::runtime_error(path.string() + ": no data rows");

    Dataset data;
    data.features = Matrix(labels.size(), F);
    std::copy(values.begin(), values.end(), data.features.data().begin());
    data.labels = std::move(labels);
    for (std::size_t f = 0; f < F; ++f) data.feature_names.emplace_back(header[f]);
    const int inferred = *std::max_element(data.labels.begin(), data.labels.end()) + 1;
    if (classes && *classes < inferred) {
        throw std::runtime_error(path.string() + ": class override " + std::to_string(*classes) +
                                 " is smaller than max label + 1");
    }
    data.classes = classes.value_or(inferred);
    data.provenance = "csv:" + fnv_hex(content);
    return data;
}

void write_csv(const std::filesystem::path& path, const Dataset& data) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
    for (std::size_t f = 0; f < data.feature_count(); ++f) {
        out << (f < data.feature_names.size() ? data.feature_names[f] : "x" + std::to_string(f)) << ',';
    }
    out << "label\n";
    char buf[32];
    for (std::size_t r = 0; r < data.size(); ++r) {
        for (double v : data.features.row(r)) {
            std::snprintf(buf, sizeof buf, "%.17g", v);
            out << buf << ',';
        }
        out << data.labels[r] << '\n';
    }
    if (!out) throw std::runtime_error("failed writing " + path.string());
}

double QuantileTransform::map(std::size_t feature, double x) const {
    const Feature& ft = features.at(feature);
    if (ft.degenerate) return 0.0;
    const auto& v = ft.values;
    double p;
    if (x <= v.front()) {
        p = ft.positions.front();
    } else if (x >= v.back()) {
        p = ft.positions.back();
    } else {
        const auto hi = static_cast<std::size_t>(std::upper_bound(v.begin(), v.end(), x) - v.begin());
        const std::size_t lo = hi - 1;
        const double t = (x - v[lo]) / (v[hi] - v[lo]);
        p = ft.positions[lo] + t * (ft.positions[hi] - ft.positions[lo]);
    }
    return (inverse_normal_cdf(p) - ft.mean) / ft.stddev;
}

Dataset QuantileTransform::apply(const Dataset& data) const {
    if (data.feature_count() != features.size()) throw std::invalid_argument("quantile transform: feature count mismatch");
    Dataset out = data;
    for (std::size_t r = 0; r < data.size(); ++r) {
        auto row = out.features.row(r);
        for (std::size_t f = 0; f < row.size(); ++f) row[f] = map(f, row[f]);
    }
    return out;
}

nlohmann::json QuantileTransform::to_json() const {
    nlohmann::json j = nlohmann::json::array();
    for (const auto& ft : features) {
        j.push_back({{"values", ft.values},
                     {"positions", ft.positions},
                     {"mean", ft.mean},
                     {"stddev", ft.stddev},
                     {"degenerate", ft.degenerate}});
    }
    return nlohmann::json{{"kind", "quantile-normal"}, {"features", j}};
}

QuantileTransform fit_quantile_transform(const Dataset& train) {
    const std::size_t n = train.size();
    if (n == 0) throw std::invalid_argument("fit_quantile_transform: empty dataset");
    QuantileTransform qt;
    qt.features.resize(train.feature_count());
    std::vector<double> column(n);
    for (std::size_t f = 0; f < train.feature_count(); ++f) {
        for (std::size_t r = 0; r < n; ++r) column[r] = train.features(r, f);
        std::sort(column.begin(), column.end());
        auto& ft = qt.features[f];
        // Tied values share their average 1-based rank.
        for (std::size_t i = 0; i < n;) {
            std::size_t j = i;
            while (j + 1 < n && column[j + 1] == column[i]) ++j;
            const double mean_rank = 0.5 * double(i + 1 + j + 1);
            ft.values.push_back(column[i]);
            ft.positions.push_back(mean_rank / double(n + 1));
            i = j + 1;
        }
        if (ft.values.size() < 2) {
            ft.degenerate = true;
            continue;
        }
        // Standardize on the training rows after the normal map.
        std::vector<double> mapped(n);
        ft.mean = 0.0;
        ft.stddev = 1.0;
        for (std::size_t r = 0; r < n; ++r) mapped[r] = qt.map(f, train.features(r, f));
        const double mean = std::accumulate(mapped.begin(), mapped.end(), 0.0) / double(n);
        double var = 0.0;
        for (double m : mapped) var += (m - mean) * (m - mean);
        var /= double(n);
        ft.mean = mean;
        if (var > 0.0) {
            ft.stddev = std::sqrt(var);
        } else {
            ft.degenerate = true;
        }
    }
    return qt;
}

TrainTestSplit subsample_protocol(const Dataset& full, std::uint64_t seed) {
    const std::size_t n = full.size();
    if (n < 2) throw std::invalid_argument("subsample_protocol: need at least two rows");
    std::vector<std::size_t> idx(n);
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    Rng rng(stream_seed(seed, 0x5ab5));
    rng.shuffle(std::span<std::size_t>(idx));
    constexpr std::size_t kCap = 10000;
    std::size_t n_train, n_test;
    if (n >= 2 * kCap) {
        n_train = n_test = kCap;
    } else {
        n_train = n / 2;
        n_test = n - n_train;
    }
    TrainTestSplit out;
    out.train_rows.assign(idx.begin(), idx.begin() + n_train);
    out.test_rows.assign(idx.begin() + n_train, idx.begin() + n_train + n_test);
    out.train = select_rows(full, out.train_rows);
    out.test = select_rows(full, out.test_rows);
    return out;
}

ClassRatioSplit class_ratio_split(const Dataset& train, std::uint64_t split_seed) {
    std::vector<std::size_t> neg, pos;
    for (std::size_t r = 0; r < train.size(); ++r) {
        const int y = train.labels[r];
        if (y == 0) {
            neg.push_back(r);
        } else if (y == 1) {
            pos.push_back(r);
        } else {
            throw std::invalid_argument("class_ratio_split: labels must be binary, found " + std::to_string(y));
        }
    }
    if (train.classes > 2) throw std::invalid_argument("class_ratio_split: dataset declares more than two classes");
    Rng neg_rng(stream_seed(split_seed, 0));
    Rng pos_rng(stream_seed(split_seed, 1));
    neg_rng.shuffle(std::span<std::size_t>(neg));
    pos_rng.shuffle(std::span<std::size_t>(pos));
    const auto n_neg = static_cast<std::size_t>(std::llround(0.8 * double(neg.size())));
    const auto n_pos = static_cast<std::size_t>(std::llround(0.2 * double(pos.size())));

    ClassRatioSplit out;
    out.first_rows.assign(neg.begin(), neg.begin() + n_neg);
    out.first_rows.insert(out.first_rows.end(), pos.begin(), pos.begin() + n_pos);
    out.second_rows.assign(neg.begin() + n_neg, neg.end());
    out.second_rows.insert(out.second_rows.end(), pos.begin() + n_pos, pos.end());
    std::sort(out.first_rows.begin(), out.first_rows.end());
    std::sort(out.second_rows.begin(), out.second_rows.end());
    out.first = select_rows(train, out.first_rows);
    out.second = select_rows(train, out.second_rows);
    return out;
}

Dataset synth_gaussian_blobs(std::size_t n, int features, int classes, double separation, std::uint64_t seed,
                             int clusters_per_class) {
    if (classes < 1 || features < 1) throw std::invalid_argument("synth_gaussian_blobs: need features and classes");
    if (n < static_cast<std::size_t>(classes)) throw std::invalid_argument("synth_gaussian_blobs: n must be >= classes");
    if (clusters_per_class < 1) throw std::invalid_argument("synth_gaussian_blobs: clusters_per_class must be >= 1");
    if (clusters_per_class == 1 && classes > 2 * features) {
        throw std::invalid_argument("synth_gaussian_blobs: at most 2*features classes with one cluster each");
    }
    Rng rng(seed);
    const std::size_t F = static_cast<std::size_t>(features);
    const int clusters = classes * clusters_per_class;
    Matrix centers(clusters, F);
    if (clusters_per_class == 1) {
        const double radius = separation / std::sqrt(2.0);
        for (int k = 0; k < classes; ++k) centers(k, k % features) = ((k / features) % 2 ? -radius : radius);
    } else {
        for (int k = 0; k < clusters; ++k) {
            for (std::size_t f = 0; f < F; ++f) centers(k, f) = rng.uniform(-separation, separation);
        }
    }

    Dataset data;
    data.features = Matrix(n, F);
    data.labels.resize(n);
    data.classes = classes;
    for (std::size_t f = 0; f < F; ++f) data.feature_names.push_back("x" + std::to_string(f));
    for (std::size_t r = 0; r < n; ++r) {
        const int label = static_cast<int>(r % classes);
        const int cluster = label * clusters_per_class + static_cast<int>((r / classes) % clusters_per_class);
        data.labels[r] = label;
        for (std::size_t f = 0; f < F; ++f) data.features(r, f) = centers(cluster, f) + rng.normal();
    }
    std::ostringstream prov;
    prov << "synth:blobs n=" << n << " features=" << features << " classes=" << classes
         << " separation=" << separation << " clusters=" << clusters_per_class << " seed=" << seed;
    data.provenance = prov.str();
    return data;
}

}  // namespace treelmc
