#include <chrono>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <fstream>

#include <Eigen/Core>
#include <json.hpp>

#include "heatlab/errors.hpp"
#include "heatlab/experiment.hpp"

#ifndef HEATLAB_VERSION
#define HEATLAB_VERSION "unknown"
#endif

namespace heatlab {

namespace fs = std::filesystem;

namespace {

std::string format_number(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

std::string utc_timestamp() {
    const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&now, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

// Writes through a sibling temporary and renames, so readers never see a
// truncated file.
void write_atomically(const fs::path& target, const std::string& content) {
    fs::path tmp = target;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw IoError("cannot write " + tmp.string());
        out << content;
        out.flush();
        if (!out) {
            std::error_code ec;
            fs::remove(tmp, ec);
            throw IoError("short write to " + tmp.string());
        }
    }
    std::error_code ec;
    fs::rename(tmp, target, ec);
    if (ec) {
        fs::remove(tmp, ec);
        throw IoError("cannot rename into " + target.string());
    }
}

std::string csv_text(const Table& table) {
    std::string out;
    for (std::size_t i = 0; i < table.columns.size(); ++i) {
        if (i) out += ',';
        out += table.columns[i];
    }
    out += '\n';
    for (const auto& row : table.rows) {
        for (std::size_t i = 0; i < row.size(); ++i) {
            if (i) out += ',';
            out += format_number(row[i]);
        }
        out += '\n';
    }
    return out;
}

std::string manifest_text(const RunRecord& record) {
    using nlohmann::ordered_json;
    ordered_json m;
    m["experiment"] = std::string(to_string(record.config.experiment));
    m["seed"] = record.config.seed;
    ordered_json cfg = ordered_json::object();
    for (const auto& name : config_field_names()) cfg[name] = get_config_field(record.config, name);
    m["config"] = cfg;
    m["created_at"] = utc_timestamp();
    m["versions"] = {{"heatlab", HEATLAB_VERSION},
                     {"eigen", std::to_string(EIGEN_WORLD_VERSION) + "." + std::to_string(EIGEN_MAJOR_VERSION) +
                                   "." + std::to_string(EIGEN_MINOR_VERSION)},
                     {"nlohmann_json", std::to_string(NLOHMANN_JSON_VERSION_MAJOR) + "." +
                                           std::to_string(NLOHMANN_JSON_VERSION_MINOR) + "." +
                                           std::to_string(NLOHMANN_JSON_VERSION_PATCH)}};
    ordered_json summary = ordered_json::object();
    for (const auto& [k, v] : record.summary) summary[k] = v;  // NaN serializes as null
    m["summary"] = summary;
    m["columns"] = record.table.columns;
    m["rows"] = record.table.rows.size();
    m["wall_seconds"] = record.wall_seconds;
    m["events"] = record.events;
    return m.dump(2) + "\n";
}

}  // namespace

std::vector<std::string> emit_outputs(const RunRecord& record, const std::string& out_dir) {
    if (out_dir.empty()) throw IoError("no output directory given");
    const fs::path dir(out_dir);
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec || !fs::is_directory(dir)) throw IoError("cannot create output directory " + out_dir);

    std::vector<std::string> written;
    const std::string stem(to_string(record.config.experiment));
    try {
        for (const auto& fmt : record.config.formats) {
            if (fmt == "csv") {
                const fs::path p = dir / (stem + ".csv");
                write_atomically(p, csv_text(record.table));
                written.push_back(p.string());
            } else if (fmt == "json") {
                const fs::path p = dir / "manifest.json";
                write_atomically(p, manifest_text(record));
                written.push_back(p.string());
            } else {
                throw ParameterError("unknown output format '" + fmt + "'");
            }
        }
    } catch (...) {
        for (const auto& p : written) fs::remove(p, ec);
        throw;
    }
    return written;
}

}  // namespace heatlab
