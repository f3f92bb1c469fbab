#include <CLI11.hpp>

#include <fstream>
#include <iostream>
#include <sstream>

#include "delaykit/config.hpp"
#include "delaykit/errors.hpp"
#include "delaykit/runner.hpp"

int main(int argc, char** argv) {
  CLI::App app{"delaykit - delay-time distributions of scattered wave packets"};
  app.require_subcommand(1);

  std::string config_path, out_dir;
  unsigned threads = 0;
  bool strict = false;

  CLI::App* run =
      app.add_subcommand("run", "execute a task described by a JSON config");
  run->add_option("config", config_path, "path to the run configuration (JSON)")
      ->required();
  run->add_option("--out", out_dir,
                  "output directory (default: auto-named task-<stamp>-<hash>)");
  run->add_option(
      "--threads", threads,
      "worker threads (default: DELAYKIT_THREADS env var, else all cores)");
  run->add_flag("--strict", strict, "treat unknown config keys as errors");

  std::string vpath;
  bool vstrict = false;
  CLI::App* val =
      app.add_subcommand("validate", "check a config without running it");
  val->add_option("config", vpath, "path to the run configuration (JSON)")
      ->required();
  val->add_flag("--strict", vstrict, "treat unknown config keys as errors");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*val) {
      const delaykit::RunConfig cfg = delaykit::parse_config(vpath, vstrict);
      for (const auto& w : cfg.warnings) std::cerr << "warning: " << w << '\n';
      std::cout << "OK: task '" << cfg.task << "'\n";
      return 0;
    }
    std::ifstream in(config_path);
    if (!in)
      throw delaykit::SchemaError("cannot open config file " + config_path);
    std::stringstream raw;
    raw << in.rdbuf();
    delaykit::RunConfig cfg = delaykit::parse_config(config_path, strict);
    for (const auto& w : cfg.warnings) std::cerr << "warning: " << w << '\n';
    const delaykit::RunResult res =
        delaykit::run_task(std::move(cfg), raw.str(), out_dir, threads);
    std::cout << "wrote " << res.out_dir << '\n';
    return 0;
  } catch (const delaykit::Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return e.exit_code();
  } catch (const std::exception& e) {
    std::cerr << "unexpected error: " << e.what() << '\n';
    return 1;
  }
}
