#pragma once

#include <string>

#include "crl/selection.hpp"
#include "crl/solver.hpp"

namespace crl {

// On-disk model document: {loss, q, r, alpha, V (row-major), centroids, assign,
// objective_trace, config, seed}. Numeric fields survive a save/load round trip
// bit for bit (shortest round-trip decimal rendering).
struct ModelFile {
    FitConfig config;
    FitResult result;
};

std::string model_to_json(const FitResult& fit, const FitConfig& cfg);
ModelFile model_from_json(const std::string& text);

std::string report_to_json(const SelectionReport& rep);
std::string report_to_csv(const SelectionReport& rep);

std::string read_text_file(const std::string& path);
void write_text_file(const std::string& path, const std::string& text);

}  // namespace crl
