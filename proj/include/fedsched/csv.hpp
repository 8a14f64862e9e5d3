#pragma once

#include <cstdio>
#include <fstream>
#include <string>
#include <vector>

#include "fedsched/errors.hpp"

namespace fedsched {

/// Deterministic CSV writer: doubles at full round-trip precision (%.17g),
/// one row per call, no locale surprises.
class CsvWriter {
public:
    CsvWriter(const std::string& path, const std::vector<std::string>& header)
        : out_(path) {
        if (!out_.good()) throw ConfigError("cannot open output file: " + path);
        for (std::size_t i = 0; i < header.size(); ++i) {
            if (i) out_ << ',';
            out_ << header[i];
        }
        out_ << '\n';
        columns_ = header.size();
    }

    CsvWriter& field(const std::string& v) {
        sep();
        out_ << v;
        return *this;
    }

    CsvWriter& field(long long v) {
        sep();
        out_ << v;
        return *this;
    }

    CsvWriter& field(int v) { return field(static_cast<long long>(v)); }

    CsvWriter& field(double v) {
        char buf[40];
        std::snprintf(buf, sizeof(buf), "%.17g", v);
        sep();
        out_ << buf;
        return *this;
    }

    void end_row() {
        require(in_row_ == columns_, "csv row width mismatch");
        out_ << '\n';
        in_row_ = 0;
    }

private:
    void sep() {
        if (in_row_) out_ << ',';
        ++in_row_;
    }

    std::ofstream out_;
    std::size_t columns_ = 0;
    std::size_t in_row_ = 0;
};

} // namespace fedsched
