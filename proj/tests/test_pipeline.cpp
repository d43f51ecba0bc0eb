#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <json.hpp>
#include <string>
#include <vector>

#include "tatdv.h"
#include "tatdv/error.hpp"
#include "tatdv/pipeline.hpp"
#include "tatdv/synth.hpp"
#include "tatdv/types.hpp"

using namespace tatdv;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

const char* kReports[] = {"ingest.json",  "derive.json",    "derived_respondents.csv",
                          "derived_couples.csv", "parallel_analysis.json", "sem.json",
                          "sem.csv",      "composite.json", "composite.csv",
                          "validate.json", "regressions.csv"};

// One 300-couple dataset shared by the run-level cases.
const fs::path& shared_data() {
  static fs::path dir = [] {
    fs::path d = fs::temp_directory_path() / "tatdv_pipe_data";
    fs::remove_all(d);
    GeneratorSpec spec;
    spec.n_couples = 300;
    simulate_couple_dataset(spec, d.string());
    return d;
  }();
  return dir;
}

std::string config_json(const fs::path& data, const fs::path& out,
                        const std::string& extra = "") {
  std::string s = "{\"schema_version\":1,\"inputs\":{";
  s += "\"survey\":\"" + (data / "survey.csv").string() + "\",";
  s += "\"diary\":\"" + (data / "diary.csv").string() + "\",";
  s += "\"taxonomy\":\"" + (data / "taxonomy.csv").string() + "\"},";
  s += "\"output_dir\":\"" + out.string() + "\",";
  s += "\"parallel_analysis\":{\"replications\":150,\"seed\":4242}";
  if (!extra.empty()) s += "," + extra;
  s += "}";
  return s;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  REQUIRE(in.good());
  return std::string(std::istreambuf_iterator<char>(in), {});
}

json load(const fs::path& p) { return json::parse(slurp(p)); }

fs::path fresh_dir(const char* tag) {
  fs::path d = fs::temp_directory_path() / (std::string("tatdv_") + tag);
  fs::remove_all(d);
  fs::create_directories(d);
  return d;
}

}  // namespace

TEST_CASE("pipeline config parsing and defaults") {
  PipelineConfig c = PipelineConfig::from_json_string("{}");
  CHECK(c.schema_version == 1);
  CHECK(c.pa_replications == 1000);
  CHECK(c.pa_percentile == 95.0);
  CHECK(c.pa_seed == 12345);
  CHECK(c.composite_reverse == std::vector<bool>{false, false, true});
  REQUIRE(c.regressions.size() == 2);
  CHECK(c.regressions[0].name == "leisure_with_partner_children_on_index");
  CHECK(c.regressions[0].se == "cluster");
  CHECK(c.regressions[0].subgroup_splits.size() == 5);
  CHECK(c.regressions[1].outcome == "leisure_with_partner");
  CHECK(c.probit.enabled);
  CHECK(c.probit.outcome == "way_out");
  CHECK(c.probit.binarize == "median");
  CHECK(c.probit.focal == "info_treated");

  PipelineConfig d = PipelineConfig::from_json_string(R"({
    "inputs": {"survey": "a.csv", "diary": "b.csv", "taxonomy": "t.csv"},
    "output_dir": "out",
    "items": {"way_out": "knows_exit"},
    "parallel_analysis": {"replications": 250, "percentile": 99, "seed": 7},
    "composite": {"reverse": [true, false, true]},
    "regressions": [{"name": "r1", "outcome": "index", "predictors": ["education_years"],
                     "se": "robust"}],
    "probit": {"enabled": false}
  })");
  CHECK(d.survey_path == "a.csv");
  CHECK(d.items.way_out == "knows_exit");
  CHECK(d.items.bargaining == "bargaining");
  CHECK(d.pa_replications == 250);
  CHECK(d.composite_reverse == std::vector<bool>{true, false, true});
  REQUIRE(d.regressions.size() == 1);
  CHECK(d.regressions[0].se == "robust");
  CHECK(d.regressions[0].subgroup_splits.empty());
  CHECK_FALSE(d.probit.enabled);

  CHECK_THROWS_WITH_AS(PipelineConfig::from_json_string("{"),
                       doctest::Contains("ConfigInvalid: malformed JSON"), Error);
  CHECK_THROWS_WITH_AS(PipelineConfig::from_json_string(R"({"outputs": "x"})"),
                       doctest::Contains("unknown key 'outputs'"), Error);
  CHECK_THROWS_WITH_AS(
      PipelineConfig::from_json_string(R"({"parallel_analysis": {"reps": 5}})"),
      doctest::Contains("unknown key 'reps'"), Error);
  CHECK_THROWS_WITH_AS(
      PipelineConfig::from_json_string(R"({"items": {"vignette": ["a", "b"]}})"),
      doctest::Contains("must list 4"), Error);
  CHECK_THROWS_WITH_AS(
      PipelineConfig::from_json_string(R"({"regressions": [{"outcome": "index"}]})"),
      doctest::Contains("ConfigInvalid"), Error);
}

TEST_CASE("config validation rejects structural problems") {
  const fs::path& data = shared_data();
  fs::path out = fresh_dir("pipe_check");
  PipelineConfig base = PipelineConfig::from_json_string(config_json(data, out));
  CHECK_NOTHROW(Pipeline(base).check());

  auto reject = [&](auto mutate, const char* msg) {
    PipelineConfig c = base;
    mutate(c);
    CHECK_THROWS_WITH_AS(Pipeline(c).check(), doctest::Contains(msg), Error);
  };
  reject([](PipelineConfig& c) { c.schema_version = 2; }, "unsupported schema_version");
  reject([](PipelineConfig& c) { c.survey_path.clear(); }, "inputs.survey not set");
  reject([](PipelineConfig& c) { c.diary_path = "/nonexistent/diary.csv"; },
         "missing input file");
  reject([](PipelineConfig& c) { c.output_dir.clear(); }, "output_dir not set");
  reject([](PipelineConfig& c) { c.pa_replications = 99; }, "replications must be >= 100");
  reject([](PipelineConfig& c) { c.pa_percentile = 50.0; }, "percentile must lie in (50, 100)");
  reject([](PipelineConfig& c) { c.pa_percentile = 100.0; }, "percentile must lie in (50, 100)");
  reject([](PipelineConfig& c) { c.composite_reverse = {true, false}; },
         "one flag per factor");
  reject([](PipelineConfig& c) { c.regressions[0].name.clear(); },
         "regression without a name");
  reject([](PipelineConfig& c) { c.regressions[1].name = c.regressions[0].name; },
         "duplicate regression name");
  reject([](PipelineConfig& c) { c.regressions[0].se = "bootstrap"; },
         "se must be classical, robust or cluster");
  reject([](PipelineConfig& c) { c.regressions[0].predictors.clear(); }, "needs predictors");
  reject([](PipelineConfig& c) { c.regressions[0].outcome = "happiness"; },
         "references unknown variable 'happiness'");
  reject([](PipelineConfig& c) { c.regressions[0].subgroup_splits.push_back("zodiac"); },
         "references unknown variable 'zodiac'");
  reject([](PipelineConfig& c) { c.probit.binarize = "quartile"; },
         "binarize must be median or threshold");
  reject([](PipelineConfig& c) { c.probit.focal = "treated_maybe"; },
         "references unknown variable 'treated_maybe'");
  reject([](PipelineConfig& c) { c.probit.controls.push_back("shoe_size"); },
         "references unknown variable 'shoe_size'");
}

TEST_CASE("a full run writes the complete report bundle") {
  const fs::path& data = shared_data();
  fs::path out = fresh_dir("pipe_run");
  Pipeline p(PipelineConfig::from_json_string(config_json(data, out)));
  p.run();

  for (const char* f : kReports) {
    CAPTURE(f);
    CHECK(fs::exists(out / f));
  }
  CHECK_FALSE(fs::exists(out / "error_manifest.json"));

  json ingest = load(out / "ingest.json");
  CHECK(ingest.at("stage") == "ingest");
  CHECK(ingest.at("couples_matched") == 300);
  CHECK(ingest.at("respondents_matched") == 600);
  CHECK(ingest.at("respondents_excluded") == 0);
  CHECK(ingest.at("exclusions").empty());
  CHECK(ingest.at("diary_days") == 1200);

  json derive = load(out / "derive.json");
  CHECK(derive.at("respondents") == 600);
  CHECK(derive.at("couples") == 300);
  CHECK(derive.at("indicators").size() == 11);
  CHECK(derive.at("indicators")[0].at("name") == "seriousness");
  CHECK(derive.at("indicators")[0].at("n_defined") == 600);
  CHECK(derive.at("asymmetry").at("with_partner").at("n_defined") == 300);
  // male-inflated partner leisure reports
  CHECK(derive.at("asymmetry").at("with_partner").at("mean").get<double>() < -0.05);

  json pa = load(out / "parallel_analysis.json");
  CHECK(pa.at("replications") == 150);
  CHECK(pa.at("seed") == 4242);
  CHECK(pa.at("observed").size() == 11);
  CHECK(pa.at("thresholds").size() == 11);
  CHECK(pa.at("n_retained").get<int>() >= 1);
  CHECK(pa.at("rows_used").get<int>() + pa.at("rows_dropped").get<int>() == 600);

  json sem = load(out / "sem.json");
  REQUIRE(sem.at("loadings").size() == 11);
  for (const auto& l : sem.at("loadings"))
    for (const char* key : {"indicator", "latent", "unstd", "std", "se", "se_naive", "z", "p"}) {
      CAPTURE(key);
      CHECK(l.contains(key));
    }
  CHECK(sem.at("loadings")[0].at("latent") == "justification_of_violence");
  CHECK(sem.at("latent_covariances").size() == 3);
  CHECK(sem.at("residual_variances").size() == 11);
  CHECK(sem.at("heywood_warning") == false);
  CHECK(sem.at("final_gradient_norm").get<double>() < 1e-6);
  CHECK(sem.at("fit").at("srmr").get<double>() < 0.10);
  CHECK(sem.at("fit").at("cd").get<double>() > 0.5);
  CHECK(sem.at("fit").at("rows").size() == 11);

  json comp = load(out / "composite.json");
  CHECK(comp.at("phi").size() == 3);
  CHECK(comp.at("phi")[0].get<double>() > 0.0);
  CHECK(comp.at("explained_variance").get<double>() > 0.4);
  CHECK(comp.at("low_explained_warning") == false);
  CHECK(comp.at("n_scored").get<int>() + comp.at("n_skipped").get<int>() == 600);
  CHECK(comp.at("reliability").at("k") == 3);
  CHECK(comp.at("distribution").at("grid").size() == 512);

  json val = load(out / "validate.json");
  REQUIRE(val.at("regressions").size() == 2);
  const json& r0 = val.at("regressions")[0];
  CHECK(r0.at("ok") == true);
  CHECK(r0.at("se") == "cluster");
  CHECK(r0.at("coefficients").size() == 2);
  CHECK(r0.at("subgroups").size() == 10);  // five splits, two groups each
  CHECK(val.at("probit").at("ok") == true);
  CHECK(val.at("probit").at("ame").contains("estimate"));

  // csv surfaces carry the documented headers
  CHECK(slurp(out / "sem.csv").rfind("observed_variable,latent_factor,unstd_coeff,std_coeff,"
                                     "std_err,z,p\n", 0) == 0);
  CHECK(slurp(out / "regressions.csv")
            .rfind("table,split,group,term,estimate,std_err,z,p,stars,n,n_clusters,r2\n", 0) == 0);
  std::string ccsv = slurp(out / "composite.csv");
  CHECK(ccsv.rfind("respondent_id,index\n", 0) == 0);
  CHECK(std::count(ccsv.begin(), ccsv.end(), '\n') == 601);
}

TEST_CASE("reports are byte-identical across reruns") {
  const fs::path& data = shared_data();
  fs::path out1 = fresh_dir("pipe_det1"), out2 = fresh_dir("pipe_det2");
  Pipeline(PipelineConfig::from_json_string(config_json(data, out1))).run();
  Pipeline(PipelineConfig::from_json_string(config_json(data, out2))).run();
  for (const char* f : kReports) {
    CAPTURE(f);
    CHECK(slurp(out1 / f) == slurp(out2 / f));
  }
}

TEST_CASE("output directory precedence") {
  const fs::path& data = shared_data();
  fs::path cfg_dir = fresh_dir("pipe_cfgout");
  fs::path override_dir = fresh_dir("pipe_override");
  fs::path env_dir = fresh_dir("pipe_envout");

  Pipeline p(PipelineConfig::from_json_string(config_json(data, cfg_dir)));
  CHECK(p.resolved_output_dir() == cfg_dir.string());
  p.set_output_dir(override_dir.string());
  CHECK(p.resolved_output_dir() == override_dir.string());
  setenv("TATDV_OUTPUT_DIR", env_dir.string().c_str(), 1);
  CHECK(p.resolved_output_dir() == env_dir.string());
  p.run();
  unsetenv("TATDV_OUTPUT_DIR");
  CHECK(fs::exists(env_dir / "validate.json"));
  CHECK_FALSE(fs::exists(override_dir / "validate.json"));
  CHECK_FALSE(fs::exists(cfg_dir / "validate.json"));
  CHECK(p.resolved_output_dir() == override_dir.string());
}

TEST_CASE("a stage failure leaves partial reports and an error manifest") {
  fs::path data = fresh_dir("pipe_badsurvey");
  for (const char* f : {"survey.csv", "diary.csv", "taxonomy.csv"})
    fs::copy_file(shared_data() / f, data / f);
  {
    // push one survey score out of range; parsing stops in ingest
    std::string s = slurp(data / "survey.csv");
    std::string::size_type nl = s.find('\n');
    REQUIRE(nl != std::string::npos);
    std::string::size_type cell = s.find(',', nl + 1);
    for (int i = 0; i < 8; ++i) cell = s.find(',', cell + 1);
    std::string::size_type end = s.find(',', cell + 1);
    s.replace(cell + 1, end - cell - 1, "250");
    std::ofstream(data / "survey.csv", std::ios::binary) << s;
  }
  fs::path out = fresh_dir("pipe_manifest");
  Pipeline p(PipelineConfig::from_json_string(config_json(data, out)));
  CHECK_THROWS_WITH_AS(p.run(), doctest::Contains("StageFailed: ingest"), Error);
  json manifest = load(out / "error_manifest.json");
  CHECK(manifest.at("failed_stage") == "ingest");
  CHECK(manifest.at("completed_stages").empty());
  CHECK(manifest.at("error").get<std::string>().find("OutOfRangeScore") != std::string::npos);
  CHECK_FALSE(fs::exists(out / "sem.json"));
}

TEST_CASE("empty regression suite and disabled probit still produce reports") {
  const fs::path& data = shared_data();
  fs::path out = fresh_dir("pipe_noregs");
  std::string cfg =
      config_json(data, out, R"("regressions": [], "probit": {"enabled": false})");
  Pipeline(PipelineConfig::from_json_string(cfg)).run();
  CHECK(slurp(out / "regressions.csv") ==
        "table,split,group,term,estimate,std_err,z,p,stars,n,n_clusters,r2\n");
  json val = load(out / "validate.json");
  CHECK(val.at("regressions").empty());
  CHECK(val.at("probit").is_null());
}

TEST_CASE("c api lifecycle") {
  CHECK(std::string(tatdv_version()) == "1.0.0");

  tatdv_pipeline* p = nullptr;
  CHECK(tatdv_pipeline_create(nullptr, &p) == TATDV_ERROR_INVALID_ARGUMENT);
  CHECK(tatdv_pipeline_create("x.json", nullptr) == TATDV_ERROR_INVALID_ARGUMENT);
  CHECK(tatdv_pipeline_check(nullptr) == TATDV_ERROR_INVALID_ARGUMENT);
  CHECK(tatdv_pipeline_run(nullptr) == TATDV_ERROR_INVALID_ARGUMENT);
  CHECK(tatdv_pipeline_set_output_dir(nullptr, "x") == TATDV_ERROR_INVALID_ARGUMENT);
  CHECK(std::string(tatdv_last_error()).find("InvalidArgument") != std::string::npos);
  tatdv_pipeline_destroy(nullptr);

  CHECK(tatdv_pipeline_create("/nonexistent/config.json", &p) == TATDV_ERROR_CONFIG);
  CHECK(p == nullptr);
  CHECK(std::string(tatdv_last_error()).find("cannot read config file") != std::string::npos);

  CHECK(tatdv_pipeline_create_from_string("{oops", &p) == TATDV_ERROR_CONFIG);
  CHECK(p == nullptr);
  CHECK(std::string(tatdv_last_error()).find("malformed JSON") != std::string::npos);

  // simulate then drive a full run through the C surface
  fs::path data = fresh_dir("capi_data");
  fs::path spec_file = data / "spec.json";
  std::ofstream(spec_file) << R"({"n_couples": 120})";
  CHECK(tatdv_simulate(nullptr, (data / "defaults").string().c_str()) == TATDV_OK);
  CHECK(fs::exists(data / "defaults" / "truth.json"));
  CHECK(tatdv_simulate("/nonexistent/spec.json", data.string().c_str()) == TATDV_ERROR_IO);
  CHECK(tatdv_simulate(spec_file.string().c_str(), data.string().c_str()) == TATDV_OK);
  CHECK(std::string(tatdv_last_error()).empty());

  fs::path out = fresh_dir("capi_out");
  fs::path cfg_file = data / "config.json";
  std::ofstream(cfg_file) << config_json(data, out);
  REQUIRE(tatdv_pipeline_create(cfg_file.string().c_str(), &p) == TATDV_OK);
  REQUIRE(p != nullptr);
  CHECK(tatdv_pipeline_check(p) == TATDV_OK);
  fs::path out2 = fresh_dir("capi_out2");
  CHECK(tatdv_pipeline_set_output_dir(p, out2.string().c_str()) == TATDV_OK);
  CHECK(tatdv_pipeline_run(p) == TATDV_OK);
  CHECK(fs::exists(out2 / "validate.json"));
  CHECK_FALSE(fs::exists(out / "validate.json"));
  tatdv_pipeline_destroy(p);

  // config errors surface through status + last_error, not exceptions
  tatdv_pipeline* bad = nullptr;
  std::string bad_cfg = config_json(data, out);
  bad_cfg.insert(bad_cfg.size() - 1, R"(,"probit": {"binarize": "mode"})");
  REQUIRE(tatdv_pipeline_create_from_string(bad_cfg.c_str(), &bad) == TATDV_OK);
  CHECK(tatdv_pipeline_check(bad) == TATDV_ERROR_CONFIG);
  CHECK(std::string(tatdv_last_error()).find("binarize") != std::string::npos);
  tatdv_pipeline_destroy(bad);
}
