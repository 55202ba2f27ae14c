#pragma once

// Config-driven batch runs behind the rfc-cert tool.

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "rfc/serialize.hpp"

namespace rfc::cli {

namespace fs = std::filesystem;

enum ExitCode : int { kPass = 0, kFail = 1, kConfigError = 2, kRuntimeError = 3 };

/// Bad or missing configuration. what() carries the file position or field path.
class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Read-only view of one JSON object in the config, remembering its path for
/// diagnostics.
class Section {
public:
    Section(const Json* j, std::string path);

    bool has(const std::string& key) const;
    Section sub(const std::string& key) const;
    const Json& raw(const std::string& key) const;
    std::string field(const std::string& key) const;

    double number(const std::string& key, std::optional<double> fallback = std::nullopt) const;
    double positive(const std::string& key, std::optional<double> fallback = std::nullopt) const;
    std::size_t count(const std::string& key, std::optional<std::size_t> fallback = std::nullopt) const;
    std::uint64_t u64(const std::string& key, std::optional<std::uint64_t> fallback = std::nullopt) const;
    bool flag(const std::string& key, bool fallback) const;
    std::string text(const std::string& key, std::optional<std::string> fallback = std::nullopt) const;
    std::vector<double> numbers(const std::string& key, std::optional<std::vector<double>> fallback = std::nullopt) const;
    /// Explicit array or {"from", "to", "count"} (uniform) or {"from", "to", "count", "log": true}.
    std::vector<double> grid(const std::string& key) const;

    const std::string& path() const noexcept { return path_; }

private:
    const Json* j_;
    std::string path_;
};

struct ExperimentConfig {
    fs::path config_path;
    fs::path base_dir;
    fs::path out_dir;
    Json doc;
    std::uint64_t seed = 0;
    unsigned jobs = 1;

    Section root() const { return Section(&doc, ""); }
    Section section(const std::string& key) const { return root().sub(key); }
    /// Relative paths resolve against the config file's directory.
    fs::path resolve(const std::string& p) const;
};

struct Overrides {
    std::optional<fs::path> out;
    std::optional<std::uint64_t> seed;
    std::optional<unsigned> jobs;
};

/// Parses and validates the top level. Throws ConfigError.
ExperimentConfig load_config(const fs::path& path, const Overrides& overrides = {});
ExperimentConfig config_from_string(const std::string& text, const fs::path& base_dir,
                                    const Overrides& overrides = {});

const std::vector<std::string>& subcommands();

/// Runs one subcommand, writing its artifacts into cfg.out_dir. Returns kPass
/// iff every check passes. Throws ConfigError for bad fields; other exceptions
/// are runtime errors.
int run(const std::string& subcommand, const ExperimentConfig& cfg, std::ostream& log);

/// Full CLI entry point: argument parsing, error mapping to exit codes.
int main_entry(int argc, char** argv);

// output helpers

/// Writes to a temporary sibling and renames it into place.
void write_atomic(const fs::path& path, const std::string& content);
std::string dump_json(const Json& j);

class CsvTable {
public:
    explicit CsvTable(std::vector<std::string> header);
    CsvTable& row();
    CsvTable& add(double v);
    CsvTable& add(std::size_t v);
    CsvTable& add(const std::string& v);
    CsvTable& add(bool v);
    std::string str() const;

private:
    std::vector<std::string> header_;
    std::vector<std::vector<std::string>> rows_;
};

std::string envelope_heatmap_svg(const Envelope& env, const std::string& title);

struct Curve {
    std::vector<double> t;
    std::vector<double> y;
    bool dashed = false;
    std::string colour = "#1f77b4";
};

std::string overlay_svg(const std::vector<Curve>& curves, const std::string& title, const std::string& y_label);

}  // namespace rfc::cli
