#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "cli/commands.hpp"

using namespace svarproj;

int main(int argc, char** argv) {
  CLI::App app{"Projection inference for set-identified SVARs"};
  app.set_version_flag("--version", std::string(kVersion));
  app.require_subcommand(1);

  std::string config;
  int threads = 1;
  app.add_option("--threads", threads, "Worker threads")->check(CLI::PositiveNumber);

  struct Command {
    const char* name;
    const char* help;
    int (*run)(const cli::Context&);
  };
  const Command commands[] = {
      {"estimate", "Reduced-form estimate and summary", cli::cmd_estimate},
      {"project", "Projection region at the baseline radius", cli::cmd_project},
      {"calibrate", "Radius calibrated to robust credibility", cli::cmd_calibrate},
      {"coverage", "Frequentist radius table", cli::cmd_coverage},
      {"run", "Every step the method flags ask for", cli::cmd_run},
  };
  for (const auto& c : commands) {
    auto* sub = app.add_subcommand(c.name, c.help);
    sub->add_option("config", config, "JSON config file")->required();
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? 0 : cli::kInputError;
  }

  try {
    auto ctx = cli::load_context(config, threads);
    for (const auto& c : commands)
      if (app.got_subcommand(c.name)) return c.run(ctx);
  } catch (const Error& e) {
    std::cerr << "svarproj: " << e.what() << "\n";
    return cli::exit_code_for(e.code());
  } catch (const std::exception& e) {
    std::cerr << "svarproj: " << e.what() << "\n";
    return cli::kNumericFailure;
  }
  return cli::kOk;
}
