#pragma once

// Run configuration: a flat table of dotted keys read from key=value text or
// JSON, overridable from the command line, plus content hashing and run
// manifests.

#include "latentflow/data.hpp"
#include "latentflow/invert.hpp"
#include "latentflow/ode.hpp"
#include "latentflow/train.hpp"

#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <vector>

namespace latentflow {

class Config {
public:
    /// Every known key with its default value.
    static Config defaults();

    /// key=value or key: value lines, '#' comments; a document starting with
    /// '{' is read as JSON and flattened to dotted keys. Unknown keys throw.
    static Config parse(std::string_view text);
    static Config load(const std::filesystem::path& path);

    bool has(const std::string& key) const { return values_.count(key) != 0; }
    void set(const std::string& key, const std::string& value);
    /// Applies every entry of `other` on top of this one.
    void merge(const Config& other);

    std::string get(const std::string& key) const;
    double get_double(const std::string& key) const;
    std::size_t get_size(const std::string& key) const;
    std::uint64_t get_u64(const std::string& key) const;
    bool get_bool(const std::string& key) const;
    std::vector<double> get_doubles(const std::string& key) const;
    std::vector<std::size_t> get_sizes(const std::string& key) const;

    const std::map<std::string, std::string>& entries() const { return values_; }
    /// Nested JSON object with typed leaves.
    std::string to_json() const;
    /// key=value text, one per line, sorted by key.
    std::string to_text() const;

    static bool known_key(const std::string& key);

private:
    std::map<std::string, std::string> values_;
};

std::vector<double> parse_double_list(const std::string& text);
std::vector<std::size_t> parse_size_list(const std::string& text);

DatasetSpec dataset_spec(const Config& cfg);
TrainConfig train_config(const Config& cfg);
InversionConfig inversion_config(const Config& cfg);
SolverConfig solver_config(const Config& cfg);
double guidance_scale(const Config& cfg);

/// Git blob object id: SHA-1 of "blob <size>\0" followed by the bytes, as hex.
std::string content_hash(std::string_view bytes);
std::string content_hash_file(const std::filesystem::path& path);

struct RunManifest {
    std::string command;
    Config config;
    std::uint64_t seed = 0;
    std::string input_hash;       // hash of the concatenated input hashes, empty when there are none
    std::string metrics_json = "{}";
    double wall_clock_s = 0.0;
    std::size_t nfe_total = 0;

    std::string to_json() const;
};

}  // namespace latentflow
