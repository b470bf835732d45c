#include "crl/csv.hpp"

#include <cerrno>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>

namespace crl {

namespace {

std::vector<std::string> split_line(const std::string& line) {
    std::vector<std::string> cells;
    std::string cell;
    std::stringstream ss(line);
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    if (!line.empty() && line.back() == ',') cells.emplace_back();
    return cells;
}

bool parse_double(const std::string& s, double& out) {
    const char* begin = s.c_str();
    char* end = nullptr;
    errno = 0;
    out = std::strtod(begin, &end);
    if (end == begin || errno == ERANGE) return false;
    while (*end == ' ' || *end == '\t' || *end == '\r') ++end;
    return *end == '\0';
}

}  // namespace

Mat read_matrix_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DomainError("cannot open '" + path + "' for reading");
    std::vector<std::vector<double>> rows;
    std::string line;
    bool first = true;
    size_t width = 0;
    size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        const auto cells = split_line(line);
        std::vector<double> row(cells.size());
        bool numeric = true;
        for (size_t j = 0; j < cells.size(); ++j)
            if (!parse_double(cells[j], row[j])) {
                numeric = false;
                break;
            }
        if (first) {
            first = false;
            width = cells.size();
            if (!numeric) continue;  // header row
        }
        if (!numeric)
            throw DomainError(path + ":" + std::to_string(lineno) + ": non-numeric cell");
        if (cells.size() != width)
            throw DomainError(path + ":" + std::to_string(lineno) + ": expected " +
                              std::to_string(width) + " columns, got " + std::to_string(cells.size()));
        rows.push_back(std::move(row));
    }
    if (rows.empty()) throw DomainError(path + ": no data rows");
    Mat M(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(width));
    for (Eigen::Index i = 0; i < M.rows(); ++i)
        for (Eigen::Index j = 0; j < M.cols(); ++j)
            M(i, j) = rows[static_cast<size_t>(i)][static_cast<size_t>(j)];
    return M;
}

void write_matrix_csv(const std::string& path, const Mat& M, const std::vector<std::string>& header) {
    std::ofstream out(path);
    if (!out) throw DomainError("cannot open '" + path + "' for writing");
    if (!header.empty()) {
        if (static_cast<Eigen::Index>(header.size()) != M.cols())
            throw StructuralError("header width does not match matrix");
        for (size_t j = 0; j < header.size(); ++j) out << (j ? "," : "") << header[j];
        out << '\n';
    }
    char buf[40];
    for (Eigen::Index i = 0; i < M.rows(); ++i) {
        for (Eigen::Index j = 0; j < M.cols(); ++j) {
            // %.17g round-trips doubles exactly
            std::snprintf(buf, sizeof(buf), "%.17g", M(i, j));
            if (j) out << ',';
            out << buf;
        }
        out << '\n';
    }
    if (!out) throw DomainError("write to '" + path + "' failed");
}

std::vector<int> read_labels_csv(const std::string& path) {
    const Mat M = read_matrix_csv(path);
    if (M.cols() != 1) throw DomainError(path + ": label file must have one column");
    std::vector<int> labels(static_cast<size_t>(M.rows()));
    for (Eigen::Index i = 0; i < M.rows(); ++i) {
        const double v = M(i, 0);
        const int k = static_cast<int>(std::lround(v));
        if (std::abs(v - k) > 1e-9) throw DomainError(path + ": non-integer label");
        labels[static_cast<size_t>(i)] = k;
    }
    return labels;
}

void write_labels_csv(const std::string& path, const std::vector<int>& labels) {
    Mat M(static_cast<Eigen::Index>(labels.size()), 1);
    for (Eigen::Index i = 0; i < M.rows(); ++i) M(i, 0) = labels[static_cast<size_t>(i)];
    write_matrix_csv(path, M, {"label"});
}

}  // namespace crl
