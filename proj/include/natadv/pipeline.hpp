#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

namespace natadv {

inline constexpr const char* kVersion = "0.1.0";

// Shipped defaults of every stage.
nlohmann::json default_config();

// "a.b.c=value"; the value is parsed as JSON and falls back to a string.
// Throws SchemaError for a malformed override or a path that does not exist
// in the defaults.
void apply_override(nlohmann::json& config, const std::string& assignment);

// defaults <- file <- overrides <- seed. Unknown keys in the file are a
// SchemaError naming their path.
nlohmann::json resolve_config(const std::optional<std::filesystem::path>& file,
                              const std::vector<std::string>& overrides, std::optional<std::uint64_t> seed);

// FNV-1a 64 of the canonical dump, as 16 hex digits.
std::string config_hash(const nlohmann::json& config);
std::string content_digest(const std::string& bytes);

// temp file + rename.
void write_atomic(const std::filesystem::path& path, const std::string& bytes);
std::string read_file(const std::filesystem::path& path);

struct CommandContext {
  nlohmann::json config;
  std::filesystem::path out;
  bool force = false;  // analyze: accept inputs produced under different config hashes
};

inline const std::vector<std::string> kCommands{"synth-data",  "preprocess", "calibrate-idm", "calibrate-mobil",
                                                "train-gail",  "train-adv",  "generate",      "analyze"};

// Runs one stage and writes its artifacts plus manifest_<command>.json into
// ctx.out. Returns a one-line summary. Throws MissingArtifactError when an
// upstream artifact is absent.
std::string run_command(const std::string& command, const CommandContext& ctx);

}  // namespace natadv
