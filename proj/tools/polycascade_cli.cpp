// polycascade: batch front-end for tree bounds, beta_c brackets, cascade
// simulation, overlap series and concentration checks.
//
// Exit codes: 0 success, 1 usage, 2 numeric failure, 3 budget refusal.

#include <CLI11.hpp>

#include <chrono>
#include <iostream>
#include <string>
#include <vector>

#include "polycascade/study.hpp"

using namespace polycascade;

namespace {

struct Overrides {
  std::string config_path;
  std::vector<std::pair<std::string, std::string>> settings;
  std::vector<std::string> raw;  // --set key=value
};

void add_common(CLI::App* cmd, Overrides& o) {
  cmd->add_option("--config", o.config_path, "key = value configuration file");
  auto flag = [&](const char* name, const char* key, const char* help) {
    cmd->add_option_function<std::string>(name, [&o, key](const std::string& v) { o.settings.emplace_back(key, v); }, help);
  };
  flag("--beta", "beta", "inverse temperature (comma list for a grid)");
  flag("--m-list", "m_list", "tree horizons, e.g. 1,2,4,8");
  flag("--n-list", "n_list", "lower-bound horizons, e.g. 4,8,16");
  flag("--replicas", "replicas", "environment replicas per job");
  flag("--seed", "seed", "top-level seed");
  flag("--out", "out", "output directory");
  flag("--theta-min", "theta_min", "left end of the theta search domain");
  flag("--workers", "workers", "worker threads (results do not depend on it)");
  cmd->add_option("--set", o.raw, "any configuration key as key=value (repeatable)");
}

int run(const std::string& command, const Overrides& o) {
  StudyConfig config;
  if (!o.config_path.empty()) config = load_config(o.config_path, config);
  // Command-line overrides win over the file, in the order given.
  for (const auto& kv : o.raw) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) throw UsageError("--set expects key=value, got '" + kv + "'");
    apply_setting(config, detail::trim(kv.substr(0, eq)), detail::trim(kv.substr(eq + 1)));
  }
  for (const auto& [key, value] : o.settings) apply_setting(config, key, value);

  const auto start = std::chrono::steady_clock::now();
  const OutputFiles files = run_command(command, config);
  const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  write_outputs(config.out, files, command, config, seconds);
  std::cout << command << ": wrote";
  for (const auto& [name, bytes] : files) std::cout << ' ' << name;
  std::cout << " meta.json to " << config.out << '\n';
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Cascade bounds for directed polymers in random environment"};
  app.require_subcommand(1);
  Overrides o;
  for (const char* name : {"bound", "beta-c", "cascade", "overlap", "concentration"}) {
    add_common(app.add_subcommand(name, std::string("run the ") + name + " study"), o);
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 1;
  }

  const std::string command = app.get_subcommands().front()->get_name();
  try {
    return run(command, o);
  } catch (const BudgetError& e) {
    std::cerr << "budget refusal: " << e.what() << '\n';
    return 3;
  } catch (const NumericError& e) {
    std::cerr << "numeric failure: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
}
