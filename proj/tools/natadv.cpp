#include <CLI11.hpp>

#include <iostream>
#include <optional>

#include "natadv/error.hpp"
#include "natadv/pipeline.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Natural adversarial scenario generation pipeline"};
  app.require_subcommand(1);
  app.set_version_flag("--version", natadv::kVersion);

  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::string out = "out";
  std::vector<std::string> overrides;
  bool force = false;
  bool print_config = false;

  for (const auto& name : natadv::kCommands) {
    auto* sub = app.add_subcommand(name);
    sub->add_option("--config", config_path, "JSON run config (defaults <- file <- overrides)");
    sub->add_option("--seed", seed, "master seed");
    sub->add_option("--out", out, "artifact directory")->capture_default_str();
    sub->add_option("--override", overrides, "key.path=value (repeatable)");
    sub->add_flag("--print-config", print_config, "print the resolved config and exit");
    if (name == "analyze") sub->add_flag("--force", force, "accept inputs produced under another config hash");
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 2;
  }

  const std::string command = app.get_subcommands().front()->get_name();
  try {
    natadv::CommandContext ctx;
    ctx.config = natadv::resolve_config(config_path.empty() ? std::nullopt : std::optional<std::filesystem::path>(config_path),
                                        overrides, seed);
    if (print_config) {
      std::cout << ctx.config.dump(2) << '\n';
      return 0;
    }
    ctx.out = out;
    ctx.force = force;
    const std::string summary = natadv::run_command(command, ctx);
    std::cout << command << ": " << summary << '\n';
    return 0;
  } catch (const natadv::SchemaError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const natadv::Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  } catch (const std::filesystem::filesystem_error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
}
