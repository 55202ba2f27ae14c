#include <algorithm>
#include <cmath>
#include <fstream>
#include <iterator>
#include <set>

#include "rfc/cli.hpp"
#include "rfc/errors.hpp"

namespace rfc::cli {

namespace {

const Json& empty_object() {
    static const Json e = Json::object();
    return e;
}

std::string kind_of(const Json& j) {
    if (j.is_null()) return "null";
    if (j.is_boolean()) return "a boolean";
    if (j.is_number()) return "a number";
    if (j.is_string()) return "a string";
    if (j.is_array()) return "an array";
    return "an object";
}

}  // namespace

Section::Section(const Json* j, std::string path) : j_(j ? j : &empty_object()), path_(std::move(path)) {
    if (!j_->is_object()) throw ConfigError("field '" + path_ + "': expected an object, got " + kind_of(*j_));
}

std::string Section::field(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }

bool Section::has(const std::string& key) const { return j_->contains(key) && !(*j_)[key].is_null(); }

Section Section::sub(const std::string& key) const { return Section(has(key) ? &(*j_)[key] : nullptr, field(key)); }

const Json& Section::raw(const std::string& key) const {
    if (!has(key)) throw ConfigError("field '" + field(key) + "': missing");
    return (*j_)[key];
}

double Section::number(const std::string& key, std::optional<double> fallback) const {
    if (!has(key)) {
        if (fallback) return *fallback;
        throw ConfigError("field '" + field(key) + "': missing");
    }
    const Json& v = (*j_)[key];
    try {
        const double x = number_from_json(v);
        if (std::isnan(x)) throw ConfigError("field '" + field(key) + "': NaN is not allowed");
        return x;
    } catch (const ContractError&) {
        throw ConfigError("field '" + field(key) + "': expected a number, got " + kind_of(v));
    }
}

double Section::positive(const std::string& key, std::optional<double> fallback) const {
    const double x = number(key, fallback);
    if (!(x > 0.0)) throw ConfigError("field '" + field(key) + "': must be positive");
    return x;
}

std::size_t Section::count(const std::string& key, std::optional<std::size_t> fallback) const {
    if (!has(key)) {
        if (fallback) return *fallback;
        throw ConfigError("field '" + field(key) + "': missing");
    }
    const Json& v = (*j_)[key];
    if (!v.is_number_integer() || v.get<long long>() < 0)
        throw ConfigError("field '" + field(key) + "': expected a non-negative integer");
    return v.get<std::size_t>();
}

std::uint64_t Section::u64(const std::string& key, std::optional<std::uint64_t> fallback) const {
    if (!has(key)) {
        if (fallback) return *fallback;
        throw ConfigError("field '" + field(key) + "': missing");
    }
    const Json& v = (*j_)[key];
    if (v.is_number_unsigned()) return v.get<std::uint64_t>();
    if (v.is_number_integer() && v.get<long long>() >= 0) return static_cast<std::uint64_t>(v.get<long long>());
    throw ConfigError("field '" + field(key) + "': expected an unsigned 64-bit integer");
}

bool Section::flag(const std::string& key, bool fallback) const {
    if (!has(key)) return fallback;
    const Json& v = (*j_)[key];
    if (!v.is_boolean()) throw ConfigError("field '" + field(key) + "': expected a boolean, got " + kind_of(v));
    return v.get<bool>();
}

std::string Section::text(const std::string& key, std::optional<std::string> fallback) const {
    if (!has(key)) {
        if (fallback) return *fallback;
        throw ConfigError("field '" + field(key) + "': missing");
    }
    const Json& v = (*j_)[key];
    if (!v.is_string()) throw ConfigError("field '" + field(key) + "': expected a string, got " + kind_of(v));
    return v.get<std::string>();
}

std::vector<double> Section::numbers(const std::string& key, std::optional<std::vector<double>> fallback) const {
    if (!has(key)) {
        if (fallback) return *fallback;
        throw ConfigError("field '" + field(key) + "': missing");
    }
    const Json& v = (*j_)[key];
    if (v.is_number()) return {v.get<double>()};
    if (!v.is_array()) throw ConfigError("field '" + field(key) + "': expected an array of numbers");
    std::vector<double> out;
    for (std::size_t i = 0; i < v.size(); ++i) {
        try {
            out.push_back(number_from_json(v[i]));
        } catch (const ContractError&) {
            throw ConfigError("field '" + field(key) + "[" + std::to_string(i) + "]': expected a number");
        }
    }
    return out;
}

std::vector<double> Section::grid(const std::string& key) const {
    const Json& v = raw(key);
    std::vector<double> g;
    if (v.is_object()) {
        const Section s = sub(key);
        const double a = s.number("from"), b = s.number("to");
        const std::size_t n = s.count("count");
        if (n < 1) throw ConfigError("field '" + s.field("count") + "': must be >= 1");
        const bool log = s.flag("log", false);
        if (log && !(a > 0.0)) throw ConfigError("field '" + s.field("from") + "': log grid needs from > 0");
        for (std::size_t i = 0; i < n; ++i) {
            const double f = n == 1 ? 0.0 : static_cast<double>(i) / static_cast<double>(n - 1);
            g.push_back(log ? a * std::pow(b / a, f) : a + (b - a) * f);
        }
        if (n > 1) g.back() = b;
    } else {
        g = numbers(key);
    }
    if (g.empty()) throw ConfigError("field '" + field(key) + "': grid is empty");
    for (std::size_t i = 0; i < g.size(); ++i) {
        if (!std::isfinite(g[i]) || g[i] < 0.0)
            throw ConfigError("field '" + field(key) + "': grid values must be finite and >= 0");
        if (i > 0 && !(g[i] > g[i - 1]))
            throw ConfigError("field '" + field(key) + "': grid must be strictly increasing");
    }
    return g;
}

fs::path ExperimentConfig::resolve(const std::string& p) const {
    const fs::path q(p);
    return q.is_absolute() ? q : base_dir / q;
}

namespace {

const std::set<std::string> kTopLevel = {"seed",     "jobs",       "output_dir", "model",        "family",
                                         "grids",    "tolerances", "xi",         "construction", "axioms",
                                         "simulate", "envelope",   "check_lyap", "rfc_bound",    "brs",
                                         "closure",  "diverge",    "description"};

std::string position(const std::string& text, std::size_t byte) {
    const std::size_t end = std::min(byte == 0 ? 0 : byte - 1, text.size());
    std::size_t line = 1, col = 1;
    for (std::size_t i = 0; i < end; ++i) {
        if (text[i] == '\n') {
            ++line;
            col = 1;
        } else {
            ++col;
        }
    }
    return "line " + std::to_string(line) + ", column " + std::to_string(col);
}

}  // namespace

ExperimentConfig config_from_string(const std::string& text, const fs::path& base_dir, const Overrides& ov) {
    ExperimentConfig cfg;
    cfg.base_dir = base_dir;
    try {
        cfg.doc = Json::parse(text);
    } catch (const Json::parse_error& e) {
        // nlohmann messages start with "[json.exception.parse_error.101] parse error at line ..."
        std::string msg = e.what();
        const auto p = msg.find("] ");
        if (p != std::string::npos) msg = msg.substr(p + 2);
        throw ConfigError("JSON syntax error at " + position(text, e.byte) + ": " + msg);
    }
    if (!cfg.doc.is_object()) throw ConfigError("config must be a JSON object");
    for (const auto& [key, value] : cfg.doc.items())
        if (!kTopLevel.count(key)) throw ConfigError("field '" + key + "': unknown top-level field");

    const Section root = cfg.root();
    if (ov.seed) {
        cfg.seed = *ov.seed;
    } else {
        if (!root.has("seed")) throw ConfigError("field 'seed': missing (a seed is mandatory)");
        cfg.seed = root.u64("seed");
    }
    cfg.jobs = ov.jobs ? *ov.jobs : static_cast<unsigned>(root.count("jobs", 1));
    if (cfg.jobs == 0) throw ConfigError("field 'jobs': must be >= 1");
    cfg.out_dir = ov.out ? *ov.out : cfg.resolve(root.text("output_dir", std::string("out")));

    // every tolerance given must be positive
    const Section tol = root.sub("tolerances");
    const Json tolerances = cfg.doc.value("tolerances", Json::object());
    for (const auto& [key, value] : tolerances.items()) tol.positive(key);
    return cfg;
}

ExperimentConfig load_config(const fs::path& path, const Overrides& ov) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("cannot read config file '" + path.string() + "'");
    const std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    fs::path base = fs::absolute(path).parent_path();
    auto cfg = config_from_string(text, base, ov);
    cfg.config_path = path;
    return cfg;
}

}  // namespace rfc::cli
