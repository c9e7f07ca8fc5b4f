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
#pragma once

#include <map>
#include <string>

#include "gpff/framework.hpp"
#include "gpff/types.hpp"

namespace gpff {

/// INI-style key-value file with [section] headers and '#' comments. Parsing
/// is strict: every key must be consumed by the schema or loading fails with
/// the offending line number.
class ConfigFile {
public:
    static ConfigFile load(const std::string& path);
    static ConfigFile from_string(const std::string& text, const std::string& name = "<inline>");

    bool has(const std::string& section, const std::string& key) const;

    std::string get_string(const std::string& section, const std::string& key,
                           const std::string& fallback);
    double get_double(const std::string& section, const std::string& key, double fallback);
    int get_int(const std::string& section, const std::string& key, int fallback);
    std::uint64_t get_seed(const std::string& section, const std::string& key,
                           std::uint64_t fallback);

    /// Whitespace-separated components; rows split on ',' or ';'.
    Matrix get_position_rows(const std::string& section, const std::string& key);
    Vector get_vector(const std::string& section, const std::string& key);

    /// Throws ConfigError listing any keys the schema never consumed.
    void reject_unknown() const;

    const std::string& name() const { return name_; }

private:
    struct Entry {
        std::string value;
        int line = 0;
        mutable bool consumed = false;
    };
    std::string name_;
    std::map<std::pair<std::string, std::string>, Entry> entries_;

    const Entry* find(const std::string& section, const std::string& key) const;
};

struct RunConfig {
    ExperimentPlan plan;
    std::string out_dir = "out";
};

/// Parses an experiment config; the schema is documented in the README.
RunConfig load_run_config(const std::string& path);
RunConfig parse_run_config(ConfigFile& file);

}  // namespace gpff
