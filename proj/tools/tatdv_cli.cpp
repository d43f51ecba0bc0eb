// Command-line front end; links the C API only.
#include <cstdio>
#include <string>

#include <CLI11.hpp>

#include "tatdv.h"

namespace {

int exit_code(tatdv_status s) {
  switch (s) {
    case TATDV_OK:
      return 0;
    case TATDV_ERROR_CONFIG:
    case TATDV_ERROR_INVALID_ARGUMENT:
      return 1;
    default:
      return 2;
  }
}

int report(tatdv_status s) {
  if (s != TATDV_OK) std::fprintf(stderr, "error: %s\n", tatdv_last_error());
  return exit_code(s);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Couple survey + time-use diary measurement pipeline"};
  app.set_version_flag("--version", std::string(tatdv_version()));
  app.require_subcommand(1);

  std::string config_path, spec_path, out_dir, output_override;

  CLI::App* run = app.add_subcommand("run", "Execute the full pipeline");
  run->add_option("--config", config_path, "Pipeline config JSON")->required();
  run->add_option("--output-dir", output_override,
                  "Override the configured output directory");

  CLI::App* sim = app.add_subcommand("simulate", "Generate a synthetic couple dataset");
  sim->add_option("--spec", spec_path, "Generator spec JSON (defaults apply when omitted)");
  sim->add_option("--out", out_dir, "Output directory")->required();

  CLI::App* chk = app.add_subcommand("check", "Validate a config without running");
  chk->add_option("--config", config_path, "Pipeline config JSON")->required();

  CLI11_PARSE(app, argc, argv);

  if (run->parsed()) {
    tatdv_pipeline* p = nullptr;
    tatdv_status s = tatdv_pipeline_create(config_path.c_str(), &p);
    if (s == TATDV_OK && !output_override.empty())
      s = tatdv_pipeline_set_output_dir(p, output_override.c_str());
    if (s == TATDV_OK) s = tatdv_pipeline_run(p);
    tatdv_pipeline_destroy(p);
    return report(s);
  }
  if (sim->parsed()) {
    tatdv_status s =
        tatdv_simulate(spec_path.empty() ? nullptr : spec_path.c_str(), out_dir.c_str());
    return report(s);
  }
  tatdv_pipeline* p = nullptr;
  tatdv_status s = tatdv_pipeline_create(config_path.c_str(), &p);
  if (s == TATDV_OK) s = tatdv_pipeline_check(p);
  tatdv_pipeline_destroy(p);
  if (s == TATDV_OK) std::printf("config ok\n");
  return report(s);
}
