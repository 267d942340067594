#pragma once

#include <string>
#include <vector>

#include "treelmc/matrix.hpp"

namespace treelmc {

struct Dataset {
    Matrix features;                        // rows x F
    std::vector<int> labels;                // one class index per row
    std::vector<std::string> feature_names;
    std::string provenance;                 // file hash or generator seed
    int classes = 0;

    std::size_t size() const noexcept { return labels.size(); }
    std::size_t feature_count() const noexcept { return features.cols(); }
};

/// Rows selected by index, in the given order.
Dataset select_rows(const Dataset& data, const std::vector<std::size_t>& rows);

}  // namespace treelmc
