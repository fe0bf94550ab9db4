#pragma once

#include <cstdint>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace nbl {

struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Full run configuration; parseable from a flat key=value file with
/// [section] headers. Unknown keys are rejected.
struct RunConfig {
    // [domain]
    std::string preset = "disk";
    double a = 1.0, b = 1.0;       // ellipse semi-axes
    double star_amp = 0.15;        // star preset
    int star_lobes = 5;
    // [mesh]
    double h = 0.05;
    std::string grade = "";        // "s:factor,s:factor,..." or "auto"
    double growth = 0.45;
    // [solver]
    std::vector<double> p_list = {10, 20, 40};
    std::string peaks = "0";       // "s1,s2,..." or "auto"
    int m = 1;                      // peak count for --peaks auto
    std::string ansatz = "bubble"; // or "constant"
    double newton_tol = 1e-10;
    int newton_max_iter = 50;
    // [diagnostics]
    double beta_fraction = 0.1;
    double peak_threshold = 10.0;
    double pohozaev_delta = 0.3;
    // [output]
    std::string outdir = "out";
    uint64_t seed = 1234;

    static RunConfig from_file(const std::string& path);
    void set(const std::string& section, const std::string& key, const std::string& value);
};

namespace detail {

inline std::string trim(const std::string& s) {
    size_t a = s.find_first_not_of(" \t\r\n");
    size_t b = s.find_last_not_of(" \t\r\n");
    return a == std::string::npos ? "" : s.substr(a, b - a + 1);
}

inline std::vector<double> parse_list(const std::string& s) {
    std::vector<double> out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ',')) {
        item = trim(item);
        if (item.empty()) continue;
        out.push_back(std::stod(item));
    }
    return out;
}

} // namespace detail

inline void RunConfig::set(const std::string& section, const std::string& key,
                           const std::string& value) {
    auto bad = [&]() -> ConfigError {
        return ConfigError("unknown config key: [" + section + "] " + key);
    };
    try {
        if (section == "domain") {
            if (key == "preset") preset = value;
            else if (key == "a") a = std::stod(value);
            else if (key == "b") b = std::stod(value);
            else if (key == "star_amp") star_amp = std::stod(value);
            else if (key == "star_lobes") star_lobes = std::stoi(value);
            else throw bad();
        } else if (section == "mesh") {
            if (key == "h") h = std::stod(value);
            else if (key == "grade") grade = value;
            else if (key == "growth") growth = std::stod(value);
            else throw bad();
        } else if (section == "solver") {
            if (key == "p_list") p_list = detail::parse_list(value);
            else if (key == "peaks") peaks = value;
            else if (key == "m") m = std::stoi(value);
            else if (key == "ansatz") ansatz = value;
            else if (key == "newton_tol") newton_tol = std::stod(value);
            else if (key == "newton_max_iter") newton_max_iter = std::stoi(value);
            else throw bad();
        } else if (section == "diagnostics") {
            if (key == "beta_fraction") beta_fraction = std::stod(value);
            else if (key == "peak_threshold") peak_threshold = std::stod(value);
            else if (key == "pohozaev_delta") pohozaev_delta = std::stod(value);
            else throw bad();
        } else if (section == "output") {
            if (key == "outdir") outdir = value;
            else if (key == "seed") seed = std::stoull(value);
            else throw bad();
        } else {
            throw ConfigError("unknown config section: [" + section + "]");
        }
    } catch (const std::invalid_argument&) {
        throw ConfigError("bad value for [" + section + "] " + key + ": " + value);
    }
}

inline RunConfig RunConfig::from_file(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw ConfigError("cannot open config file " + path);
    RunConfig cfg;
    std::string line, section;
    int lineno = 0;
    while (std::getline(is, line)) {
        ++lineno;
        std::string t = detail::trim(line);
        if (t.empty() || t[0] == '#' || t[0] == ';') continue;
        if (t.front() == '[' && t.back() == ']') {
            section = detail::trim(t.substr(1, t.size() - 2));
            continue;
        }
        size_t eq = t.find('=');
        if (eq == std::string::npos)
            throw ConfigError("line " + std::to_string(lineno) + ": expected key=value");
        std::string key = detail::trim(t.substr(0, eq));
        std::string value = detail::trim(t.substr(eq + 1));
        if (section.empty())
            throw ConfigError("line " + std::to_string(lineno) + ": key outside a [section]");
        cfg.set(section, key, value);
    }
    return cfg;
}

} // namespace nbl
