#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "tatdv/types.hpp"

namespace tatdv {

struct RegressionSpec {
  std::string name;
  std::string outcome;
  std::vector<std::string> predictors;  // intercept is implicit
  std::string se = "cluster";           // classical | robust | cluster
  std::vector<std::string> subgroup_splits;
};

struct ProbitSpec {
  bool enabled = true;
  std::string outcome = "way_out";
  std::string binarize = "median";  // median | threshold
  double threshold = 0.0;           // used when binarize = threshold
  std::string focal = "info_treated";
  std::vector<std::string> controls;
};

// Versioned JSON document; see README for the schema. All randomness in a
// run flows from the seeds recorded here.
struct PipelineConfig {
  int schema_version = 1;
  std::string survey_path, diary_path, taxonomy_path;
  std::string output_dir;
  ItemRegistry items;

  std::size_t pa_replications = 1000;
  double pa_percentile = 95.0;
  uint64_t pa_seed = 12345;

  std::vector<bool> composite_reverse = {false, false, true};

  std::vector<RegressionSpec> regressions;  // default suite when absent
  ProbitSpec probit;

  static PipelineConfig from_json_file(const std::string& path);
  static PipelineConfig from_json_string(const std::string& text);
  static std::vector<RegressionSpec> default_regressions();
};

// Stage sequence: ingest -> derive -> factor -> sem -> composite ->
// validate. Each stage writes its report before the next stage starts;
// a stage error leaves the completed reports in place plus an
// error_manifest.json naming the failed stage.
class Pipeline {
 public:
  explicit Pipeline(PipelineConfig config);

  // Highest precedence wins: TATDV_OUTPUT_DIR env var, then this
  // override, then the config value.
  void set_output_dir(const std::string& dir);
  std::string resolved_output_dir() const;

  void check() const;  // config errors only, no input parsing beyond existence
  void run();          // check() + all stages

  const PipelineConfig& config() const { return cfg_; }

 private:
  PipelineConfig cfg_;
  std::optional<std::string> output_override_;
};

}  // namespace tatdv
