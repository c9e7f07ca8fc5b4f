/*
 Copyright 2026 gpff contributors

 Licensed under the Apache License, Version 2.0 (the "License");
 you may not use this file except in compliance with the License.
 You may obtain a copy of the License at

      https://www.apache.org/licenses/LICENSE-2.0

 Unless required by applicable law or agreed to in writing, software
 distributed under the License is distributed on an "AS IS" BASIS,
 WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 See the License for the specific language governing permissions and
 limitations under the License.
*/
#include "gpff/config.hpp"

#include <cstdlib>
#include <fstream>
#include <sstream>

namespace gpff {

namespace {

std::string trim(const std::string& s) {
    const auto begin = s.find_first_not_of(" \t\r");
    if (begin == std::string::npos) return "";
    const auto end = s.find_last_not_of(" \t\r");
    return s.substr(begin, end - begin + 1);
}

double parse_double(const std::string& value, const std::string& where) {
    char* end = nullptr;
    const double v = std::strtod(value.c_str(), &end);
    if (end == value.c_str() || *end != '\0')
        throw ConfigError(where + ": expected a number, got '" + value + "'");
    return v;
}

}  // namespace

ConfigFile ConfigFile::load(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("cannot open config file: " + path);
    std::ostringstream buffer;
    buffer << in.rdbuf();
    return from_string(buffer.str(), path);
}

ConfigFile ConfigFile::from_string(const std::string& text, const std::string& name) {
    ConfigFile file;
    file.name_ = name;
    std::istringstream in(text);
    std::string line;
    std::string section;
    int line_number = 0;
    while (std::getline(in, line)) {
        ++line_number;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        line = trim(line);
        if (line.empty()) continue;
        if (line.front() == '[') {
            if (line.back() != ']')
                throw ConfigError(name + ":" + std::to_string(line_number) + ": malformed section header");
            section = trim(line.substr(1, line.size() - 2));
            continue;
        }
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw ConfigError(name + ":" + std::to_string(line_number) + ": expected key = value");
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        if (key.empty())
            throw ConfigError(name + ":" + std::to_string(line_number) + ": empty key");
        auto [it, inserted] = file.entries_.insert({{section, key}, Entry{value, line_number}});
        if (!inserted)
            throw ConfigError(name + ":" + std::to_string(line_number) + ": duplicate key '" + key +
                              "' in section [" + section + "]");
    }
    return file;
}

const ConfigFile::Entry* ConfigFile::find(const std::string& section, const std::string& key) const {
    const auto it = entries_.find({section, key});
    if (it == entries_.end()) return nullptr;
    it->second.consumed = true;
    return &it->second;
}

bool ConfigFile::has(const std::string& section, const std::string& key) const {
    return entries_.count({section, key}) > 0;
}

std::string ConfigFile::get_string(const std::string& section, const std::string& key,
                                   const std::string& fallback) {
    const Entry* e = find(section, key);
    return e ? e->value : fallback;
}

double ConfigFile::get_double(const std::string& section, const std::string& key, double fallback) {
    const Entry* e = find(section, key);
    if (!e) return fallback;
    return parse_double(e->value, name_ + ":" + std::to_string(e->line) + " [" + section + "] " + key);
}

int ConfigFile::get_int(const std::string& section, const std::string& key, int fallback) {
    const Entry* e = find(section, key);
    if (!e) return fallback;
    const double v = parse_double(e->value, name_ + ":" + std::to_string(e->line) + " [" + section +
                                                "] " + key);
    const int i = static_cast<int>(v);
    if (static_cast<double>(i) != v)
        throw ConfigError(name_ + ":" + std::to_string(e->line) + ": key '" + key +
                          "' must be an integer");
    return i;
}

std::uint64_t ConfigFile::get_seed(const std::string& section, const std::string& key,
                                   std::uint64_t fallback) {
    const Entry* e = find(section, key);
    if (!e) return fallback;
    char* end = nullptr;
    const unsigned long long v = std::strtoull(e->value.c_str(), &end, 10);
    if (end == e->value.c_str() || *end != '\0')
        throw ConfigError(name_ + ":" + std::to_string(e->line) + ": key '" + key +
                          "' must be a nonnegative integer seed");
    return v;
}

Matrix ConfigFile::get_position_rows(const std::string& section, const std::string& key) {
    const Entry* e = find(section, key);
    if (!e) return Matrix();
    const std::string where = name_ + ":" + std::to_string(e->line) + " [" + section + "] " + key;

    std::vector<std::vector<double>> rows;
    std::string row_text;
    std::stringstream splitter(e->value);
    std::string normalized = e->value;
    for (char& c : normalized)
        if (c == ';') c = ',';
    std::stringstream row_stream(normalized);
    while (std::getline(row_stream, row_text, ',')) {
        row_text = trim(row_text);
        if (row_text.empty()) continue;
        std::vector<double> row;
        std::stringstream comp(row_text);
        std::string token;
        while (comp >> token) row.push_back(parse_double(token, where));
        if (!rows.empty() && rows.front().size() != row.size())
            throw ConfigError(where + ": rows have inconsistent dimension");
        rows.push_back(std::move(row));
    }
    if (rows.empty()) throw ConfigError(where + ": no positions given");
    Matrix out(rows.size(), rows[0].size());
    for (size_t i = 0; i < rows.size(); ++i)
        for (size_t j = 0; j < rows[i].size(); ++j) out(i, j) = rows[i][j];
    return out;
}

Vector ConfigFile::get_vector(const std::string& section, const std::string& key) {
    const Entry* e = find(section, key);
    if (!e) return Vector();
    const std::string where = name_ + ":" + std::to_string(e->line) + " [" + section + "] " + key;
    std::vector<double> values;
    std::string normalized = e->value;
    for (char& c : normalized)
        if (c == ',' || c == ';') c = ' ';
    std::stringstream comp(normalized);
    std::string token;
    while (comp >> token) values.push_back(parse_double(token, where));
    if (values.empty()) throw ConfigError(where + ": no values given");
    return Eigen::Map<const Vector>(values.data(), values.size());
}

void ConfigFile::reject_unknown() const {
    std::string complaints;
    for (const auto& [id, entry] : entries_) {
        if (entry.consumed) continue;
        complaints += "\n  line " + std::to_string(entry.line) + ": unknown key '" + id.second +
                      "' in section [" + id.first + "]";
    }
    if (!complaints.empty())
        throw ConfigError(name_ + ": config rejected, unrecognized keys:" + complaints);
}

namespace {

std::vector<BasisDescriptor> parse_basis_list(const std::string& text, const std::string& where) {
    std::vector<BasisDescriptor> kinds;
    std::string normalized = text;
    for (char& c : normalized)
        if (c == ',' || c == ';') c = ' ';
    std::stringstream tokens(normalized);
    std::string token;
    while (tokens >> token) kinds.push_back(parse_basis_kind(token));
    if (kinds.empty()) throw ConfigError(where + ": empty basis list");
    return kinds;
}

}  // namespace

RunConfig parse_run_config(ConfigFile& file) {
    RunConfig run;
    ExperimentPlan& plan = run.plan;

    plan.seed = file.get_seed("", "seed", plan.seed);

    plan.plant_kind = file.get_string("plant", "kind", plan.plant_kind);
    plan.nominal_mass = file.get_double("plant", "nominal_mass", plan.nominal_mass);
    plan.damping = file.get_double("plant", "damping", plan.damping);
    plan.mass2 = file.get_double("plant", "mass2", plan.mass2);
    plan.flux_amplitude = file.get_double("plant", "flux_amplitude", plan.flux_amplitude);
    plan.magnet_pitch = file.get_double("plant", "magnet_pitch", plan.magnet_pitch);
    plan.sample_time = file.get_double("plant", "sample_time", plan.sample_time);
    plan.noise_std = file.get_double("plant", "noise_std", plan.noise_std);
    if (file.has("plant", "domain_min")) plan.domain_min = file.get_vector("plant", "domain_min");
    if (file.has("plant", "domain_max")) plan.domain_max = file.get_vector("plant", "domain_max");

    plan.bandwidth_hz = file.get_double("controller", "bandwidth_hz", plan.bandwidth_hz);
    plan.damping_ratio = file.get_double("controller", "damping_ratio", plan.damping_ratio);

    if (file.has("trajectory", "start")) plan.move_start = file.get_vector("trajectory", "start");
    if (file.has("trajectory", "end")) plan.move_end = file.get_vector("trajectory", "end");
    plan.duration = file.get_double("trajectory", "duration", plan.duration);
    plan.order = file.get_int("trajectory", "order", plan.order);

    plan.trials = file.get_int("ilc", "trials", plan.trials);
    plan.weights.error = file.get_double("ilc", "w_e", plan.weights.error);
    plan.weights.effort = file.get_double("ilc", "w_f", plan.weights.effort);
    plan.weights.effort_change = file.get_double("ilc", "w_df", plan.weights.effort_change);
    plan.trailing_fraction = file.get_double("ilc", "trailing_fraction", plan.trailing_fraction);
    plan.nominal = file.get_string("ilc", "nominal", plan.nominal);
    plan.eval_noise_std = file.get_double("ilc", "eval_noise_std", plan.eval_noise_std);

    // Basis: 'basis' applies to every axis; 'basis1', 'basis2', ... override one axis.
    std::vector<BasisDescriptor> shared;
    if (file.has("ilc", "basis"))
        shared = parse_basis_list(file.get_string("ilc", "basis", ""), file.name() + " [ilc] basis");

    plan.gp_mean = file.get_string("gp", "mean", plan.gp_mean);
    plan.gp.restarts = file.get_int("gp", "restarts", plan.gp.restarts);
    plan.gp.max_iterations = file.get_int("gp", "max_iterations", plan.gp.max_iterations);
    plan.gp.gradient_tol = file.get_double("gp", "gradient_tol", plan.gp.gradient_tol);
    plan.gp.seed = plan.seed;

    plan.training_positions = file.get_position_rows("positions", "training");
    plan.test_positions = file.get_position_rows("positions", "test");
    if (file.has("positions", "center")) plan.center_position = file.get_vector("positions", "center");
    plan.prediction_grid = file.get_int("positions", "prediction_grid", plan.prediction_grid);

    run.out_dir = file.get_string("output", "dir", run.out_dir);

    // Axis count comes from the plant; resolve per-axis basis overrides now.
    const int axes = plan.make_plant().axis_count();
    plan.basis.clear();
    for (int axis = 0; axis < axes; ++axis) {
        const std::string key = "basis" + std::to_string(axis + 1);
        if (file.has("ilc", key)) {
            plan.basis.push_back(parse_basis_list(file.get_string("ilc", key, ""),
                                                  file.name() + " [ilc] " + key));
        } else if (!shared.empty()) {
            plan.basis.push_back(shared);
        } else {
            plan.basis.push_back({BasisDescriptor::velocity(), BasisDescriptor::acceleration()});
        }
    }

    file.reject_unknown();
    if (plan.training_positions.rows() == 0)
        throw ConfigError(file.name() + ": [positions] training is required");
    if (plan.test_positions.rows() == 0)
        throw ConfigError(file.name() + ": [positions] test is required");
    plan.finalize();
    return run;
}

RunConfig load_run_config(const std::string& path) {
    ConfigFile file = ConfigFile::load(path);
    return parse_run_config(file);
}

}  // namespace gpff
