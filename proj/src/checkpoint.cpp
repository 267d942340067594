#include "treelmc/checkpoint.hpp"

#include <fstream>
#include <stdexcept>

namespace treelmc {

using nlohmann::json;

json spec_to_json(const ArchitectureSpec& spec) {
    return json{{"kind", std::string(kind_name(spec.kind))},
                {"depth", spec.depth},
                {"trees", spec.trees},
                {"features", spec.features},
                {"classes", spec.classes}};
}

ArchitectureSpec spec_from_json(const json& j) {
    ArchitectureSpec spec;
    spec.kind = parse_kind(j.at("kind").get<std::string>());
    spec.depth = j.at("depth").get<int>();
    spec.trees = j.at("trees").get<int>();
    spec.features = j.at("features").get<int>();
    spec.classes = j.at("classes").get<int>();
    spec.validate();
    return spec;
}

json checkpoint_to_json(const EnsembleParams& params) {
    const auto& spec = params.spec;
    json trees = json::array();
    for (const auto& tree : params.trees) {
        json w = json::array();
        for (int f = 0; f < spec.features; ++f) {
            json row = json::array();
            for (int n = 0; n < tree.nodes(); ++n) row.push_back(tree.w_node(n)[f]);
            w.push_back(std::move(row));
        }
        json pi = json::array();
        for (int c = 0; c < spec.classes; ++c) {
            json row = json::array();
            for (int l = 0; l < tree.leaves(); ++l) row.push_back(tree.pi_at(c, l));
            pi.push_back(std::move(row));
        }
        const auto b = tree.b();
        trees.push_back(json{{"w", std::move(w)}, {"b", std::vector<double>(b.begin(), b.end())}, {"pi", std::move(pi)}});
    }
    return json{{"format_version", kCheckpointFormatVersion}, {"spec", spec_to_json(spec)}, {"trees", std::move(trees)}};
}

EnsembleParams checkpoint_from_json(const json& j) {
    const int version = j.at("format_version").get<int>();
    if (version != kCheckpointFormatVersion) {
        throw std::runtime_error("unsupported checkpoint format_version " + std::to_string(version));
    }
    EnsembleParams params = zeros_like(spec_from_json(j.at("spec")));
    const auto& spec = params.spec;
    const auto& trees = j.at("trees");
    if (trees.size() != params.trees.size()) throw std::runtime_error("checkpoint tree count does not match spec");
    for (std::size_t m = 0; m < trees.size(); ++m) {
        auto& tree = params.trees[m];
        const auto& w = trees[m].at("w");
        const auto& b = trees[m].at("b");
        const auto& pi = trees[m].at("pi");
        if (w.size() != std::size_t(spec.features) || b.size() != std::size_t(tree.nodes()) ||
            pi.size() != std::size_t(spec.classes)) {
            throw std::runtime_error("checkpoint tree " + std::to_string(m) + " has the wrong shape");
        }
        for (int f = 0; f < spec.features; ++f) {
            if (w[f].size() != std::size_t(tree.nodes())) throw std::runtime_error("checkpoint w row has the wrong length");
            for (int n = 0; n < tree.nodes(); ++n) tree.w_node(n)[f] = w[f][n].get<double>();
        }
        for (int n = 0; n < tree.nodes(); ++n) tree.b()[n] = b[n].get<double>();
        for (int c = 0; c < spec.classes; ++c) {
            if (pi[c].size() != std::size_t(tree.leaves())) throw std::runtime_error("checkpoint pi row has the wrong length");
            for (int l = 0; l < tree.leaves(); ++l) tree.pi_at(c, l) = pi[c][l].get<double>();
        }
    }
    params.validate();
    return params;
}

void write_json_file(const std::filesystem::path& path, const json& j) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
    out << j.dump(2) << '\n';
    if (!out) throw std::runtime_error("failed writing " + path.string());
}

json read_json_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open " + path.string());
    return json::parse(in);
}

void save_checkpoint(const std::filesystem::path& path, const EnsembleParams& params, const json& extra) {
    json j = checkpoint_to_json(params);
    for (auto it = extra.begin(); it != extra.end(); ++it) j[it.key()] = it.value();
    write_json_file(path, j);
}

EnsembleParams load_checkpoint(const std::filesystem::path& path) { return checkpoint_from_json(read_json_file(path)); }

}  // namespace treelmc
