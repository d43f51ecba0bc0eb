#include "tatdv.h"

#include <exception>
#include <string>

#include "tatdv/error.hpp"
#include "tatdv/pipeline.hpp"
#include "tatdv/synth.hpp"

struct tatdv_pipeline {
  tatdv::Pipeline impl;
};

namespace {

thread_local std::string g_last_error;

tatdv_status status_of(tatdv::errc c) {
  switch (c) {
    case tatdv::errc::config: return TATDV_ERROR_CONFIG;
    case tatdv::errc::stage: return TATDV_ERROR_STAGE;
    case tatdv::errc::io: return TATDV_ERROR_IO;
    case tatdv::errc::invalid_argument: return TATDV_ERROR_INVALID_ARGUMENT;
    case tatdv::errc::internal: return TATDV_ERROR_INTERNAL;
  }
  return TATDV_ERROR_INTERNAL;
}

template <typename Fn>
tatdv_status guarded(Fn&& fn) {
  try {
    fn();
    g_last_error.clear();
    return TATDV_OK;
  } catch (const tatdv::Error& e) {
    g_last_error = e.what();
    return status_of(e.code);
  } catch (const std::exception& e) {
    g_last_error = std::string("InternalError: ") + e.what();
    return TATDV_ERROR_INTERNAL;
  } catch (...) {
    g_last_error = "InternalError: unknown exception";
    return TATDV_ERROR_INTERNAL;
  }
}

}  // namespace

extern "C" {

const char* tatdv_version(void) { return "1.0.0"; }

const char* tatdv_last_error(void) { return g_last_error.c_str(); }

tatdv_status tatdv_pipeline_create(const char* config_path, tatdv_pipeline** out) {
  if (!out || !config_path) {
    g_last_error = "InvalidArgument: null pointer";
    return TATDV_ERROR_INVALID_ARGUMENT;
  }
  *out = nullptr;
  return guarded([&] {
    auto cfg = tatdv::PipelineConfig::from_json_file(config_path);
    *out = new tatdv_pipeline{tatdv::Pipeline(std::move(cfg))};
  });
}

tatdv_status tatdv_pipeline_create_from_string(const char* config_json, tatdv_pipeline** out) {
  if (!out || !config_json) {
    g_last_error = "InvalidArgument: null pointer";
    return TATDV_ERROR_INVALID_ARGUMENT;
  }
  *out = nullptr;
  return guarded([&] {
    auto cfg = tatdv::PipelineConfig::from_json_string(config_json);
    *out = new tatdv_pipeline{tatdv::Pipeline(std::move(cfg))};
  });
}

tatdv_status tatdv_pipeline_check(tatdv_pipeline* p) {
  if (!p) {
    g_last_error = "InvalidArgument: null pipeline";
    return TATDV_ERROR_INVALID_ARGUMENT;
  }
  return guarded([&] { p->impl.check(); });
}

tatdv_status tatdv_pipeline_run(tatdv_pipeline* p) {
  if (!p) {
    g_last_error = "InvalidArgument: null pipeline";
    return TATDV_ERROR_INVALID_ARGUMENT;
  }
  return guarded([&] { p->impl.run(); });
}

tatdv_status tatdv_pipeline_set_output_dir(tatdv_pipeline* p, const char* dir) {
  if (!p || !dir) {
    g_last_error = "InvalidArgument: null pointer";
    return TATDV_ERROR_INVALID_ARGUMENT;
  }
  return guarded([&] { p->impl.set_output_dir(dir); });
}

void tatdv_pipeline_destroy(tatdv_pipeline* p) { delete p; }

tatdv_status tatdv_simulate(const char* spec_path, const char* out_dir) {
  if (!out_dir) {
    g_last_error = "InvalidArgument: null output directory";
    return TATDV_ERROR_INVALID_ARGUMENT;
  }
  return guarded([&] {
    tatdv::GeneratorSpec spec =
        spec_path ? tatdv::GeneratorSpec::from_json_file(spec_path) : tatdv::GeneratorSpec{};
    tatdv::simulate_couple_dataset(spec, out_dir);
  });
}

}  // extern "C"
