#include "rsstab/io.hpp"

#include "rsstab/error.hpp"

#include "json.hpp"

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>

namespace rsstab {

namespace {

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

bool parse_number(const std::string& field, double& out) {
    const std::string t = trim(field);
    if (t.empty()) return false;
    char* end = nullptr;
    out = std::strtod(t.c_str(), &end);
    return end == t.c_str() + t.size();
}

std::vector<std::string> split(const std::string& line) {
    std::vector<std::string> out;
    std::stringstream ss(line);
    std::string field;
    while (std::getline(ss, field, ',')) out.push_back(field);
    if (!line.empty() && line.back() == ',') out.emplace_back();
    return out;
}

}  // namespace

std::vector<std::vector<double>> parse_csv_matrix(std::istream& is) {
    std::vector<std::vector<double>> rows;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(is, line)) {
        ++line_no;
        if (trim(line).empty() || trim(line)[0] == '#') continue;
        std::vector<double> row;
        for (const auto& f : split(line)) {
            double v = 0.0;
            if (!parse_number(f, v))
                throw InvalidArgument("csv line " + std::to_string(line_no) + ": bad number '" + trim(f) + "'");
            row.push_back(v);
        }
        rows.push_back(std::move(row));
    }
    return rows;
}

RateMatrix read_rate_matrix(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw InvalidArgument("cannot open rate matrix file " + path.string());
    if (path.extension() == ".json") {
        nlohmann::json j;
        try {
            in >> j;
            return RateMatrix::validate(j.get<std::vector<std::vector<double>>>());
        } catch (const nlohmann::json::exception& e) {
            throw InvalidArgument(path.string() + ": " + e.what());
        }
    }
    return RateMatrix::validate(parse_csv_matrix(in));
}

std::vector<double> read_samples_csv(std::istream& is) {
    std::vector<double> out;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(is, line)) {
        ++line_no;
        if (trim(line).empty()) continue;
        const auto fields = split(line);
        double v = 0.0;
        if (!parse_number(fields.empty() ? std::string() : fields[0], v)) {
            if (out.empty() && line_no == 1) continue;  // header
            throw InvalidArgument("samples line " + std::to_string(line_no) + ": bad number");
        }
        out.push_back(v);
    }
    return out;
}

std::vector<double> read_samples_csv(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw InvalidArgument("cannot open samples file " + path.string());
    return read_samples_csv(in);
}

std::string format_double(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

void write_samples_csv(std::ostream& os, std::span<const double> samples, const std::string& header) {
    if (!header.empty()) os << header << '\n';
    for (double v : samples) os << format_double(v) << '\n';
}

}  // namespace rsstab
