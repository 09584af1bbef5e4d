// polaron: command-line runner for the polaron quench library.
//
//   polaron <verb> [--config FILE] [--key value ...]
//
// Exit status: 0 ok, 1 scientific failure, 2 usage error.

#include <exception>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "polaron/app/commands.hpp"
#include "polaron/app/config.hpp"

namespace {

using polaron::app::ConfigError;
using polaron::app::RunConfig;

// remaining tokens are config overrides: --key value or --key=value
void apply_overrides(RunConfig& cfg, const std::vector<std::string>& extras) {
  for (std::size_t i = 0; i < extras.size(); ++i) {
    const std::string& tok = extras[i];
    if (tok.rfind("--", 0) != 0) throw ConfigError("unexpected argument '" + tok + "'");
    std::string key = tok.substr(2);
    std::string value;
    if (const auto eq = key.find('='); eq != std::string::npos) {
      value = key.substr(eq + 1);
      key.erase(eq);
    } else {
      if (i + 1 >= extras.size()) throw ConfigError("missing value for --" + key);
      value = extras[++i];
    }
    for (char& c : key)
      if (c == '-') c = '_';
    polaron::app::set_value(cfg, key, value);
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Small-polaron formation after an interaction quench"};
  app.require_subcommand(1);

  std::string config_path;
  bool mutate = false;
  bool print_config = false;
  auto add_verb = [&](const std::string& name, const std::string& help) {
    auto* sub = app.add_subcommand(name, help);
    sub->add_option("-c,--config", config_path, "key = value config file");
    sub->add_flag("--print-config", print_config, "print the resolved config and exit");
    sub->allow_extras();
    return sub;
  };
  auto* ground = add_verb("ground", "per-K ground states, optional flux sweep and lambda_c");
  auto* quench = add_verb("quench", "evolve a bare Bloch state after the quench");
  auto* sweep = add_verb("sweep", "formation times over k0 and flux");
  auto* verify = add_verb("verify", "oracle suite and property batteries");
  auto* oracle = add_verb("oracle-check", "sector code against the dense real-space oracle");
  oracle->add_flag("--mutate-peierls", mutate, "flip the Peierls sign in the sector code");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? polaron::app::kOk : polaron::app::kUsage;
  }

  CLI::App* chosen = app.get_subcommands().front();
  RunConfig cfg;
  try {
    if (!config_path.empty()) polaron::app::apply_file(cfg, config_path);
    apply_overrides(cfg, chosen->remaining());
    cfg.validate();
  } catch (const std::exception& e) {
    std::cerr << "polaron: " << e.what() << '\n';
    return polaron::app::kUsage;
  }
  if (print_config) {
    std::cout << polaron::app::to_text(cfg);
    return polaron::app::kOk;
  }

  try {
    if (chosen == ground) return polaron::app::cmd_ground(cfg);
    if (chosen == quench) return polaron::app::cmd_quench(cfg);
    if (chosen == sweep) return polaron::app::cmd_sweep(cfg);
    if (chosen == verify) return polaron::app::cmd_verify(cfg);
    return polaron::app::cmd_oracle_check(cfg, mutate);
  } catch (const polaron::InvalidArgument& e) {
    std::cerr << "polaron: " << e.what() << '\n';
    return polaron::app::kUsage;
  } catch (const std::exception& e) {
    std::cerr << "polaron: " << e.what() << '\n';
    return polaron::app::kScientificFailure;
  }
}
