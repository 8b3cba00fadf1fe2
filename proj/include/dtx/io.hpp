#pragma once

// CSV / JSON emission for experiment outputs. Every file carries a metadata
// block (library version, resolved config, optional timestamp).

#include <chrono>
#include <cmath>
#include <cstdio>
#include <ctime>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <variant>
#include <vector>

#include <nlohmann/json.hpp>

#include "dtx/errors.hpp"
#include "dtx/version.hpp"

namespace dtx {

/// 17 significant digits: enough to round-trip any double.
inline std::string format_double(double v) {
    if (std::isnan(v)) {
        return "nan";
    }
    if (std::isinf(v)) {
        return v > 0 ? "inf" : "-inf";
    }
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

inline std::string utc_timestamp() {
    const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&now, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

/// {version, config[, timestamp]}; nlohmann::json keeps object keys sorted, so dumps are stable.
inline nlohmann::json output_metadata(const nlohmann::json &config, bool with_timestamp) {
    nlohmann::json meta = {{"version", kVersion}, {"config", config}};
    if (with_timestamp) {
        meta["timestamp"] = utc_timestamp();
    }
    return meta;
}

using CsvCell = std::variant<double, long long, std::string>;

class CsvTable {
  public:
    explicit CsvTable(std::vector<std::string> columns) : columns_(std::move(columns)) {}

    void add_row(std::vector<CsvCell> row) {
        detail::require<parameter_error>(row.size() == columns_.size(), "CSV row has wrong number of cells");
        rows_.push_back(std::move(row));
    }

    const std::vector<std::string> &columns() const noexcept { return columns_; }
    const std::vector<std::vector<CsvCell>> &rows() const noexcept { return rows_; }

    /// Metadata as '# ' comment lines (one JSON line), then header and rows.
    std::string render(const nlohmann::json &meta) const {
        std::ostringstream os;
        os << "# " << meta.dump() << '\n';
        for (std::size_t i = 0; i < columns_.size(); ++i) {
            os << (i ? "," : "") << columns_[i];
        }
        os << '\n';
        for (const auto &row : rows_) {
            for (std::size_t i = 0; i < row.size(); ++i) {
                os << (i ? "," : "");
                std::visit(
                    [&os](const auto &v) {
                        using T = std::decay_t<decltype(v)>;
                        if constexpr (std::is_same_v<T, double>) {
                            os << format_double(v);
                        } else {
                            os << v;
                        }
                    },
                    row[i]);
            }
            os << '\n';
        }
        return os.str();
    }

  private:
    std::vector<std::string> columns_;
    std::vector<std::vector<CsvCell>> rows_;
};

/// Writes to `path`, or to stdout when path is empty or "-".
inline void write_output(const std::string &path, const std::string &content) {
    if (path.empty() || path == "-") {
        std::cout << content;
        std::cout.flush();
        return;
    }
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) {
        throw io_error("cannot open '" + path + "' for writing");
    }
    out << content;
    out.close();
    if (!out) {
        throw io_error("failed writing '" + path + "'");
    }
}

inline nlohmann::json read_json_file(const std::string &path) {
    std::ifstream in(path);
    if (!in) {
        throw io_error("cannot open '" + path + "'");
    }
    try {
        return nlohmann::json::parse(in);
    } catch (const nlohmann::json::exception &e) {
        throw parameter_error("malformed JSON in '" + path + "': " + e.what());
    }
}

/// Pretty JSON with a trailing newline.
inline std::string render_json(const nlohmann::json &j) { return j.dump(2) + "\n"; }

}  // namespace dtx
