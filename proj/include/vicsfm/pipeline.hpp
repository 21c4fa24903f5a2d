#pragma once

#include <cstdint>
#include <filesystem>
#include <initializer_list>
#include <iosfwd>
#include <map>
#include <string>
#include <vector>

namespace vicsfm {

/// Flat dotted-key configuration parsed from a TOML-style file ([stage]
/// tables, key = value lines, # comments, quoted or bare values). Every key
/// can be overridden from the command line under the same dotted name.
class PipelineConfig {
public:
    PipelineConfig() = default;
    static PipelineConfig from_file(const std::filesystem::path& path);
    static PipelineConfig from_string(const std::string& text);

    void set(const std::string& dotted_key, const std::string& value);
    bool has(const std::string& key) const;

    /// Typed getters fall back to the registered default of the key and
    /// throw std::invalid_argument on unknown keys or malformed values.
    std::string get_string(const std::string& key) const;
    double get_double(const std::string& key) const;
    long get_int(const std::string& key) const;
    bool get_bool(const std::string& key) const;
    std::uint64_t get_seed(const std::string& key) const;

    /// Canonical "key=value" listing (defaults filled in) of every known key
    /// under any of the prefixes; the cache key of a stage's configuration.
    std::string subset(std::initializer_list<const char*> prefixes) const;

    /// First problem found (unknown key, unparsable value), or empty.
    std::string validate() const;

    const std::map<std::string, std::string>& values() const { return values_; }

private:
    std::map<std::string, std::string> values_;
};

struct ConfigKey {
    const char* name;
    const char* def;
    const char* help;
};
/// Every key the pipeline understands, with default and help text.
const std::vector<ConfigKey>& known_config_keys();

struct StageStatus {
    std::string name;
    bool cached = false;
    std::vector<std::string> outputs;  // work-dir-relative paths
};

struct PipelineResult {
    int exit_code = 0;         // 0 success, 2 config error, 3 stage failure
    std::string failed_stage;  // set when exit_code == 3
    std::string message;       // failure description
    std::vector<StageStatus> stages;
    std::filesystem::path manifest_path;
};

/// Full-run stage names in execution order.
const std::vector<std::string>& pipeline_stage_names();

/// Runs the staged pipeline. A stage is skipped when its recorded input hash
/// matches and all outputs still hash correctly; the artifact manifest
/// (relative path -> content hash) is rewritten at the end of every
/// successful run and is byte-identical across reruns with the same config
/// and seeds. `only` restricts execution to one named stage, which then
/// expects its upstream artifacts in the work dir. A lock file serializes
/// access to the work dir; progress lines go to `log`.
PipelineResult run_pipeline(const PipelineConfig& cfg, std::ostream& log,
                            const std::string& only = "");

/// FNV-1a 64-bit content hash, hex encoded: the artifact identity used by
/// stage caching and the manifest.
std::string hash_file_hex(const std::filesystem::path& path);

}  // namespace vicsfm
