#pragma once

#include <string>
#include <vector>

#include "crl/core.hpp"

namespace crl {

// Dense CSV matrix format: optional header row (auto-detected on read: any cell of the
// first row that fails to parse as a number makes it a header), decimal-point floats,
// no missing values.
Mat read_matrix_csv(const std::string& path);
void write_matrix_csv(const std::string& path, const Mat& M,
                      const std::vector<std::string>& header = {});

// Labels are a one-column CSV (header "label", 1-based integers).
std::vector<int> read_labels_csv(const std::string& path);
void write_labels_csv(const std::string& path, const std::vector<int>& labels);

}  // namespace crl
