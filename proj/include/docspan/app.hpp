#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

namespace docspan::app {

/// Effective settings of one run. Loaded from the --config JSON file, then
/// overridden by command-line flags.
struct PipelineConfig {
    std::string separator = "<SEP>";
    std::uint64_t seed = 0;
    std::size_t workers = 1;
    std::size_t retries = 2;
    std::size_t timeout_ms = 60000;
    std::string format = "blank";  // blank | tsv

    // augment
    std::size_t budget = 1000;
    std::string budget_side = "source";  // source | max
    std::size_t upsample = 1;
    std::optional<std::size_t> max_units;
    std::string unit_mode = "est_subwords";  // chars | est_subwords

    // schedule
    std::string mode = "windows";  // windows | nonoverlap
    std::size_t pre = 200;
    std::size_t main = 500;
    std::size_t total = 900;
    std::size_t limit = 700;

    // strategy
    std::string cascade = "2/3,1/3,2/2,1/2,1/1";
    std::size_t max_repeats = 20;
    std::size_t max_wordlen = 49;

    std::string backend = "mock:identity";
    std::map<std::string, std::string> backend_for;

    // postprocess
    bool repetitions = false;
    bool quotes = false;
    std::size_t keep = 1;

    /// Named paths; command-line path flags of the same name win.
    std::map<std::string, std::string> paths;

    nlohmann::ordered_json to_json() const;
    /// Reads known keys; unknown keys are a ConfigError.
    void merge_json(const nlohmann::json& j);
    /// Numeric and enum invariants of every module.
    void validate() const;
};

/// Hex SHA-256 of the bytes.
std::string sha256_hex(std::string_view bytes);
std::string sha256_file(const std::string& path);

/// Entry point behind the docspan binary. Returns the process exit status:
/// 0 ok, 2 configuration error, 3 input error, 4 backend error.
int run_cli(const std::vector<std::string>& args, std::istream& in, std::ostream& out, std::ostream& err);

}  // namespace docspan::app
