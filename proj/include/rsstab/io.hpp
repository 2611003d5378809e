#pragma once

// File formats shared by the runner and the tools.
//   rate matrix   JSON array of rows, or CSV with one row per line
//   samples       CSV, one sample per row, optional header line

#include "rsstab/ratematrix.hpp"

#include <filesystem>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

namespace rsstab {

// Format picked from the extension (.json, otherwise CSV). Throws
// InvalidArgument for unreadable or malformed files; validation errors of
// the matrix itself propagate unchanged.
RateMatrix read_rate_matrix(const std::filesystem::path& path);
std::vector<std::vector<double>> parse_csv_matrix(std::istream& is);

// First column of every row; a non-numeric first line is taken as a header.
std::vector<double> read_samples_csv(std::istream& is);
std::vector<double> read_samples_csv(const std::filesystem::path& path);
void write_samples_csv(std::ostream& os, std::span<const double> samples,
                       const std::string& header = "x");

// %.17g, so values round-trip exactly.
std::string format_double(double v);

}  // namespace rsstab
