#include "lanp/csv.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace lanp {

std::string format_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

namespace {

std::vector<std::string> split_line(const std::string& line) {
    std::vector<std::string> out;
    std::string field;
    for (char c : line) {
        if (c == ',') {
            out.push_back(field);
            field.clear();
        } else if (c != '\r') {
            field += c;
        }
    }
    out.push_back(field);
    return out;
}

double parse_double(const std::string& s, const std::string& path, std::size_t row,
                    const char* what) {
    try {
        std::size_t used = 0;
        double v = std::stod(s, &used);
        if (used != s.size()) throw std::invalid_argument("trailing characters");
        return v;
    } catch (const std::exception&) {
        throw DataError(path + ": row " + std::to_string(row) + ": bad " + what + " value '" +
                        s + "'");
    }
}

} // namespace

void write_signals_csv(const std::string& path, std::span<const Signal> signals) {
    std::ofstream f(path, std::ios::trunc);
    if (!f) throw IoError("cannot open '" + path + "' for writing");
    f << "unit_id,x,y\n";
    for (const Signal& s : signals)
        for (const Observation& o : s.obs)
            f << s.unit_id << ',' << format_double(o.x) << ',' << format_double(o.y) << '\n';
    if (!f) throw IoError("write failed for '" + path + "'");
}

void write_labels_csv(const std::string& path, std::span<const Signal> signals) {
    std::ofstream f(path, std::ios::trunc);
    if (!f) throw IoError("cannot open '" + path + "' for writing");
    f << "unit_id,label\n";
    for (const Signal& s : signals)
        if (s.label) f << s.unit_id << ',' << *s.label << '\n';
    if (!f) throw IoError("write failed for '" + path + "'");
}

std::vector<Signal> load_signals_csv(const std::string& signals_path,
                                     const std::string& labels_path) {
    std::ifstream f(signals_path);
    if (!f) throw IoError("cannot open '" + signals_path + "'");
    std::string line;
    if (!std::getline(f, line) || split_line(line) != std::vector<std::string>{"unit_id", "x", "y"})
        throw DataError(signals_path + ": row 1: expected header 'unit_id,x,y'");

    std::map<std::string, Signal> units;
    std::size_t row = 1;
    while (std::getline(f, line)) {
        ++row;
        if (line.empty()) continue;
        std::vector<std::string> fields = split_line(line);
        if (fields.size() != 3)
            throw DataError(signals_path + ": row " + std::to_string(row) +
                            ": expected 3 fields, got " + std::to_string(fields.size()));
        if (fields[0].empty())
            throw DataError(signals_path + ": row " + std::to_string(row) + ": empty unit_id");
        Signal& s = units[fields[0]];
        s.unit_id = fields[0];
        double x = parse_double(fields[1], signals_path, row, "x");
        double y = parse_double(fields[2], signals_path, row, "y");
        if (!std::isfinite(x) || !std::isfinite(y))
            throw DataError(signals_path + ": row " + std::to_string(row) +
                            ": non-finite observation");
        s.obs.push_back({x, y});
    }

    if (!labels_path.empty()) {
        std::ifstream lf(labels_path);
        if (!lf) throw IoError("cannot open '" + labels_path + "'");
        if (!std::getline(lf, line) ||
            split_line(line) != std::vector<std::string>{"unit_id", "label"})
            throw DataError(labels_path + ": row 1: expected header 'unit_id,label'");
        std::size_t lrow = 1;
        while (std::getline(lf, line)) {
            ++lrow;
            if (line.empty()) continue;
            std::vector<std::string> fields = split_line(line);
            if (fields.size() != 2)
                throw DataError(labels_path + ": row " + std::to_string(lrow) +
                                ": expected 2 fields");
            auto it = units.find(fields[0]);
            if (it == units.end())
                throw DataError(labels_path + ": row " + std::to_string(lrow) +
                                ": unknown unit '" + fields[0] + "'");
            try {
                std::size_t used = 0;
                int label = std::stoi(fields[1], &used);
                if (used != fields[1].size() || label < 0) throw std::invalid_argument("label");
                it->second.label = label;
            } catch (const std::exception&) {
                throw DataError(labels_path + ": row " + std::to_string(lrow) +
                                ": bad label '" + fields[1] + "' (0-based integer required)");
            }
        }
    }

    std::vector<Signal> out;
    out.reserve(units.size());
    for (auto& [id, s] : units) {
        std::sort(s.obs.begin(), s.obs.end(),
                  [](const Observation& a, const Observation& b) { return a.x < b.x; });
        out.push_back(std::move(s));
    }
    return out;
}

} // namespace lanp
