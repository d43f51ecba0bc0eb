#include "tatdv/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <limits>
#include <map>
#include <json.hpp>
#include <set>

#include "tatdv/composite.hpp"
#include "tatdv/csv.hpp"
#include "tatdv/derive.hpp"
#include "tatdv/error.hpp"
#include "tatdv/factor.hpp"
#include "tatdv/ingest.hpp"
#include "tatdv/sem.hpp"
#include "tatdv/stats.hpp"
#include "tatdv/validate.hpp"

namespace tatdv {

using nlohmann::json;

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

const std::vector<std::string>& frame_variables() {
  static const std::vector<std::string> vars = [] {
    std::vector<std::string> v = indicator_names();
    for (const char* s :
         {"index", "is_female", "education_years", "employed", "info_treated",
          "vignette_physical", "gender_norms_index", "parenthood_norms", "bargaining_power",
          "charity", "center_knowledge", "way_out", "weight", "leisure_with_partner",
          "leisure_with_partner_children", "asymmetry_with_partner",
          "asymmetry_with_partner_children"})
      v.push_back(s);
    return v;
  }();
  return vars;
}

bool known_variable(const std::string& name) {
  const auto& v = frame_variables();
  return std::find(v.begin(), v.end(), name) != v.end();
}

void require_keys(const json& j, const char* where, std::initializer_list<const char*> allowed) {
  for (const auto& [key, _] : j.items()) {
    bool ok = false;
    for (const char* a : allowed)
      if (key == a) ok = true;
    if (!ok) fail(errc::config, std::string("ConfigInvalid: unknown key '") + key + "' in " + where);
  }
}

template <std::size_t N>
void read_names(const json& j, const char* key, std::array<std::string, N>& out) {
  if (!j.contains(key)) return;
  const auto& a = j.at(key);
  if (!a.is_array() || a.size() != N)
    fail(errc::config, std::string("ConfigInvalid: items.") + key + " must list " +
                           std::to_string(N) + " keys");
  for (std::size_t i = 0; i < N; ++i) out[i] = a.at(i).get<std::string>();
}

}  // namespace

std::vector<RegressionSpec> PipelineConfig::default_regressions() {
  RegressionSpec children;
  children.name = "leisure_with_partner_children_on_index";
  children.outcome = "leisure_with_partner_children";
  children.predictors = {"index"};
  children.subgroup_splits = {"gender_norms_index", "parenthood_norms", "bargaining_power",
                              "charity", "center_knowledge"};
  RegressionSpec partner;
  partner.name = "leisure_with_partner_on_index";
  partner.outcome = "leisure_with_partner";
  partner.predictors = {"index"};
  return {children, partner};
}

PipelineConfig PipelineConfig::from_json_string(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    fail(errc::config, std::string("ConfigInvalid: malformed JSON: ") + e.what());
  }
  PipelineConfig c;
  c.regressions = default_regressions();
  try {
    require_keys(j, "config",
                 {"schema_version", "inputs", "output_dir", "items", "parallel_analysis",
                  "composite", "regressions", "probit"});
    if (j.contains("schema_version")) c.schema_version = j.at("schema_version").get<int>();
    if (j.contains("inputs")) {
      const auto& in = j.at("inputs");
      require_keys(in, "inputs", {"survey", "diary", "taxonomy"});
      if (in.contains("survey")) c.survey_path = in.at("survey").get<std::string>();
      if (in.contains("diary")) c.diary_path = in.at("diary").get<std::string>();
      if (in.contains("taxonomy")) c.taxonomy_path = in.at("taxonomy").get<std::string>();
    }
    if (j.contains("output_dir")) c.output_dir = j.at("output_dir").get<std::string>();
    if (j.contains("items")) {
      const auto& it = j.at("items");
      require_keys(it, "items",
                   {"vignette", "masculinity", "norms", "parenthood", "bargaining", "charity",
                    "center_knowledge", "way_out"});
      read_names(it, "vignette", c.items.vignette);
      read_names(it, "masculinity", c.items.masculinity);
      read_names(it, "norms", c.items.norms);
      if (it.contains("parenthood")) c.items.parenthood = it.at("parenthood").get<std::string>();
      if (it.contains("bargaining")) c.items.bargaining = it.at("bargaining").get<std::string>();
      if (it.contains("charity")) c.items.charity = it.at("charity").get<std::string>();
      if (it.contains("center_knowledge"))
        c.items.center_knowledge = it.at("center_knowledge").get<std::string>();
      if (it.contains("way_out")) c.items.way_out = it.at("way_out").get<std::string>();
    }
    if (j.contains("parallel_analysis")) {
      const auto& pa = j.at("parallel_analysis");
      require_keys(pa, "parallel_analysis", {"replications", "percentile", "seed"});
      if (pa.contains("replications")) c.pa_replications = pa.at("replications").get<std::size_t>();
      if (pa.contains("percentile")) c.pa_percentile = pa.at("percentile").get<double>();
      if (pa.contains("seed")) c.pa_seed = pa.at("seed").get<uint64_t>();
    }
    if (j.contains("composite")) {
      const auto& co = j.at("composite");
      require_keys(co, "composite", {"reverse"});
      if (co.contains("reverse")) c.composite_reverse = co.at("reverse").get<std::vector<bool>>();
    }
    if (j.contains("regressions")) {
      c.regressions.clear();
      for (const auto& r : j.at("regressions")) {
        require_keys(r, "regressions[]",
                     {"name", "outcome", "predictors", "se", "subgroup_splits"});
        RegressionSpec spec;
        spec.name = r.at("name").get<std::string>();
        spec.outcome = r.at("outcome").get<std::string>();
        spec.predictors = r.at("predictors").get<std::vector<std::string>>();
        if (r.contains("se")) spec.se = r.at("se").get<std::string>();
        if (r.contains("subgroup_splits"))
          spec.subgroup_splits = r.at("subgroup_splits").get<std::vector<std::string>>();
        c.regressions.push_back(std::move(spec));
      }
    }
    if (j.contains("probit")) {
      const auto& p = j.at("probit");
      require_keys(p, "probit",
                   {"enabled", "outcome", "binarize", "threshold", "focal", "controls"});
      if (p.contains("enabled")) c.probit.enabled = p.at("enabled").get<bool>();
      if (p.contains("outcome")) c.probit.outcome = p.at("outcome").get<std::string>();
      if (p.contains("binarize")) c.probit.binarize = p.at("binarize").get<std::string>();
      if (p.contains("threshold")) c.probit.threshold = p.at("threshold").get<double>();
      if (p.contains("focal")) c.probit.focal = p.at("focal").get<std::string>();
      if (p.contains("controls"))
        c.probit.controls = p.at("controls").get<std::vector<std::string>>();
    }
  } catch (const json::exception& e) {
    fail(errc::config, std::string("ConfigInvalid: ") + e.what());
  }
  return c;
}

PipelineConfig PipelineConfig::from_json_file(const std::string& path) {
  std::string text;
  try {
    text = read_file(path);
  } catch (const Error&) {
    fail(errc::config, "ConfigInvalid: cannot read config file: " + path);
  }
  return from_json_string(text);
}

Pipeline::Pipeline(PipelineConfig config) : cfg_(std::move(config)) {}

void Pipeline::set_output_dir(const std::string& dir) { output_override_ = dir; }

std::string Pipeline::resolved_output_dir() const {
  if (const char* env = std::getenv("TATDV_OUTPUT_DIR"); env && *env) return env;
  if (output_override_) return *output_override_;
  return cfg_.output_dir;
}

void Pipeline::check() const {
  namespace fs = std::filesystem;
  if (cfg_.schema_version != 1)
    fail(errc::config, "ConfigInvalid: unsupported schema_version " +
                           std::to_string(cfg_.schema_version));
  struct {
    const char* label;
    const std::string& path;
  } inputs[] = {{"survey", cfg_.survey_path},
                {"diary", cfg_.diary_path},
                {"taxonomy", cfg_.taxonomy_path}};
  for (const auto& in : inputs) {
    if (in.path.empty())
      fail(errc::config, std::string("ConfigInvalid: inputs.") + in.label + " not set");
    if (!fs::exists(in.path))
      fail(errc::config, std::string("ConfigInvalid: missing input file: ") + in.path);
  }
  if (resolved_output_dir().empty()) fail(errc::config, "ConfigInvalid: output_dir not set");
  if (cfg_.pa_replications < 100)
    fail(errc::config, "ConfigInvalid: parallel_analysis.replications must be >= 100");
  if (!(cfg_.pa_percentile > 50.0 && cfg_.pa_percentile < 100.0))
    fail(errc::config, "ConfigInvalid: parallel_analysis.percentile must lie in (50, 100)");
  if (cfg_.composite_reverse.size() != 3)
    fail(errc::config, "ConfigInvalid: composite.reverse must have one flag per factor (3)");

  std::set<std::string> seen;
  for (const auto& r : cfg_.regressions) {
    if (r.name.empty()) fail(errc::config, "ConfigInvalid: regression without a name");
    if (!seen.insert(r.name).second)
      fail(errc::config, "ConfigInvalid: duplicate regression name '" + r.name + "'");
    if (r.se != "classical" && r.se != "robust" && r.se != "cluster")
      fail(errc::config, "ConfigInvalid: regression '" + r.name + "' se must be classical, "
                         "robust or cluster");
    if (r.predictors.empty())
      fail(errc::config, "ConfigInvalid: regression '" + r.name + "' needs predictors");
    auto check_var = [&](const std::string& v, const char* role) {
      if (!known_variable(v))
        fail(errc::config, "ConfigInvalid: regression '" + r.name + "' " + role +
                               " references unknown variable '" + v + "'");
    };
    check_var(r.outcome, "outcome");
    for (const auto& p : r.predictors) check_var(p, "predictor");
    for (const auto& s : r.subgroup_splits) check_var(s, "subgroup split");
  }
  if (cfg_.probit.enabled) {
    if (cfg_.probit.binarize != "median" && cfg_.probit.binarize != "threshold")
      fail(errc::config, "ConfigInvalid: probit.binarize must be median or threshold");
    auto check_var = [&](const std::string& v, const char* role) {
      if (!known_variable(v))
        fail(errc::config, std::string("ConfigInvalid: probit ") + role +
                               " references unknown variable '" + v + "'");
    };
    check_var(cfg_.probit.outcome, "outcome");
    check_var(cfg_.probit.focal, "focal");
    for (const auto& ctl : cfg_.probit.controls) check_var(ctl, "control");
  }
}

namespace {

std::string csv_cell(double v, int decimals) {
  return std::isfinite(v) ? format_fixed(v, decimals) : std::string();
}

json ols_to_json(const OlsResult& fit) {
  json coeffs = json::array();
  for (std::size_t i = 0; i < fit.names.size(); ++i) {
    double z = fit.se[static_cast<Eigen::Index>(i)] > 0.0
                   ? fit.beta[static_cast<Eigen::Index>(i)] / fit.se[static_cast<Eigen::Index>(i)]
                   : 0.0;
    double p = two_sided_p(z);
    coeffs.push_back({{"term", fit.names[i]},
                      {"estimate", fit.beta[static_cast<Eigen::Index>(i)]},
                      {"se", fit.se[static_cast<Eigen::Index>(i)]},
                      {"z", z},
                      {"p", p},
                      {"stars", significance_stars(p)}});
  }
  json out;
  out["coefficients"] = coeffs;
  out["n"] = fit.n;
  out["r2"] = fit.r2;
  out["se_kind"] = to_string(fit.se_kind);
  if (fit.se_kind == SeKind::cluster) out["n_clusters"] = fit.n_clusters;
  return out;
}

void ols_to_csv(std::string& csv, const std::string& table, const std::string& split,
                const std::string& group, const OlsResult& fit) {
  for (std::size_t i = 0; i < fit.names.size(); ++i) {
    double se = fit.se[static_cast<Eigen::Index>(i)];
    double b = fit.beta[static_cast<Eigen::Index>(i)];
    double z = se > 0.0 ? b / se : 0.0;
    double p = two_sided_p(z);
    csv += table + "," + split + "," + group + "," + fit.names[i] + "," + csv_cell(b, 4) + "," +
           csv_cell(se, 4) + "," + csv_cell(z, 4) + "," + csv_cell(p, 4) + "," +
           significance_stars(p) + "," + std::to_string(fit.n) + "," +
           (fit.se_kind == SeKind::cluster ? std::to_string(fit.n_clusters) : std::string()) +
           "," + csv_cell(fit.r2, 4) + "\n";
  }
}

struct Frame {
  std::map<std::string, Eigen::VectorXd> cols;
  std::vector<int> couple_of;

  const Eigen::VectorXd& at(const std::string& name) const {
    auto it = cols.find(name);
    if (it == cols.end()) fail(errc::internal, "frame variable missing: " + name);
    return it->second;
  }
};

Frame build_frame(const DeriveResult& dr, const Eigen::VectorXd& index) {
  const Eigen::Index n = static_cast<Eigen::Index>(dr.respondents.size());
  Frame f;
  for (const auto& name : frame_variables()) f.cols[name] = Eigen::VectorXd::Constant(n, kNaN);
  const auto& ind = indicator_names();
  for (Eigen::Index i = 0; i < n; ++i) {
    const DerivedRespondent& r = dr.respondents[static_cast<std::size_t>(i)];
    for (std::size_t k = 0; k < ind.size(); ++k) f.cols[ind[k]][i] = dr.indicators(i, k);
    f.cols["is_female"][i] = r.gender == Gender::female ? 1.0 : 0.0;
    f.cols["education_years"][i] = r.education_years;
    f.cols["employed"][i] = r.employed ? 1.0 : 0.0;
    f.cols["info_treated"][i] = r.info_treated ? 1.0 : 0.0;
    f.cols["vignette_physical"][i] = r.vignette_arm == VignetteArm::physical ? 1.0 : 0.0;
    f.cols["gender_norms_index"][i] = r.gender_norms_index;
    f.cols["parenthood_norms"][i] = r.parenthood_norms;
    f.cols["bargaining_power"][i] = r.bargaining_power;
    f.cols["charity"][i] = r.charity;
    f.cols["center_knowledge"][i] = r.center_knowledge;
    f.cols["way_out"][i] = r.way_out;
    if (r.weight) f.cols["weight"][i] = *r.weight;
    f.cols["leisure_with_partner"][i] = r.leisure_with_partner;
    f.cols["leisure_with_partner_children"][i] = r.leisure_with_partner_children;
    const DerivedCouple& c = dr.couples[static_cast<std::size_t>(i / 2)];
    if (c.asymmetry_with_partner.defined)
      f.cols["asymmetry_with_partner"][i] = c.asymmetry_with_partner.value;
    if (c.asymmetry_with_partner_children.defined)
      f.cols["asymmetry_with_partner_children"][i] = c.asymmetry_with_partner_children.value;
    f.couple_of.push_back(static_cast<int>(i / 2));
  }
  f.cols["index"] = index;
  return f;
}

struct Design {
  Eigen::VectorXd y;
  Eigen::MatrixXd X;
  std::vector<std::string> names;
  std::vector<int> clusters;
  std::vector<Eigen::Index> rows;  // frame rows kept
};

Design assemble(const Frame& f, const std::string& outcome,
                const std::vector<std::string>& predictors,
                const std::string* split_var = nullptr) {
  const Eigen::VectorXd& y = f.at(outcome);
  std::vector<const Eigen::VectorXd*> xs;
  for (const auto& p : predictors) xs.push_back(&f.at(p));
  const Eigen::VectorXd* sv = split_var ? &f.at(*split_var) : nullptr;

  Design d;
  for (Eigen::Index i = 0; i < y.size(); ++i) {
    bool ok = std::isfinite(y[i]) && (!sv || std::isfinite((*sv)[i]));
    for (const auto* x : xs) ok = ok && std::isfinite((*x)[i]);
    if (ok) d.rows.push_back(i);
  }
  const Eigen::Index m = static_cast<Eigen::Index>(d.rows.size());
  d.y.resize(m);
  d.X.resize(m, static_cast<Eigen::Index>(predictors.size()) + 1);
  d.names.push_back("intercept");
  for (const auto& p : predictors) d.names.push_back(p);
  for (Eigen::Index r = 0; r < m; ++r) {
    Eigen::Index i = d.rows[static_cast<std::size_t>(r)];
    d.y[r] = y[i];
    d.X(r, 0) = 1.0;
    for (std::size_t k = 0; k < xs.size(); ++k)
      d.X(r, static_cast<Eigen::Index>(k) + 1) = (*xs[k])[i];
    d.clusters.push_back(f.couple_of[static_cast<std::size_t>(i)]);
  }
  return d;
}

SeKind parse_se_kind(const std::string& s) {
  if (s == "classical") return SeKind::classical;
  if (s == "robust") return SeKind::robust;
  return SeKind::cluster;
}

}  // namespace

void Pipeline::run() {
  namespace fs = std::filesystem;
  check();
  const std::string out = resolved_output_dir();
  {
    std::error_code ec;
    fs::create_directories(out, ec);
    if (ec) fail(errc::stage, "StageFailed: ingest: cannot create output dir " + out);
  }
  auto emit = [&](const std::string& name, const json& j) {
    write_file(out + "/" + name, j.dump(2) + "\n");
  };

  std::vector<std::string> completed;
  std::string stage = "ingest";
  try {
    // ingest
    Taxonomy tax = parse_taxonomy(cfg_.taxonomy_path);
    std::vector<SurveyResponse> surveys = parse_survey(cfg_.survey_path, cfg_.items);
    std::vector<DiaryDay> diaries = parse_diary(cfg_.diary_path, tax);
    MatchResult match = match_couples(surveys, diaries);
    {
      json j;
      j["stage"] = "ingest";
      j["surveys"] = surveys.size();
      j["diary_days"] = diaries.size();
      j["taxonomy_codes"] = tax.groups.size();
      j["couples_matched"] = match.couples.size();
      j["respondents_matched"] = 2 * match.couples.size();
      j["respondents_excluded"] = match.excluded_respondents;
      json ex = json::array();
      for (const auto& e : match.exclusions)
        ex.push_back({{"couple_id", e.couple_id},
                      {"respondent_ids", e.respondent_ids},
                      {"reason", e.reason}});
      j["exclusions"] = ex;
      emit("ingest.json", j);
    }
    completed.push_back("ingest");

    // derive
    stage = "derive";
    DeriveResult dr = derive_dataset(match.couples, tax, cfg_.items);
    {
      json j;
      j["stage"] = "derive";
      j["respondents"] = dr.respondents.size();
      j["couples"] = dr.couples.size();
      j["couples_with_undefined_gap"] = dr.couples_with_undefined_gap;
      json ind = json::array();
      const auto& names = indicator_names();
      for (std::size_t k = 0; k < names.size(); ++k) {
        std::vector<double> vals;
        for (Eigen::Index i = 0; i < dr.indicators.rows(); ++i)
          if (std::isfinite(dr.indicators(i, static_cast<Eigen::Index>(k))))
            vals.push_back(dr.indicators(i, static_cast<Eigen::Index>(k)));
        json row;
        row["name"] = names[k];
        row["n_defined"] = vals.size();
        row["mean"] = vals.empty() ? 0.0 : mean(vals);
        row["sd"] = vals.size() > 1 ? std::sqrt(variance(vals)) : 0.0;
        ind.push_back(row);
      }
      j["indicators"] = ind;
      auto asym_summary = [&](bool children) {
        std::vector<double> vals;
        for (const auto& c : dr.couples) {
          const Ratio& r = children ? c.asymmetry_with_partner_children : c.asymmetry_with_partner;
          if (r.defined) vals.push_back(r.value);
        }
        json s;
        s["n_defined"] = vals.size();
        s["mean"] = vals.empty() ? 0.0 : mean(vals);
        return s;
      };
      j["asymmetry"] = {{"with_partner", asym_summary(false)},
                        {"with_partner_children", asym_summary(true)}};
      emit("derive.json", j);

      std::string csv =
          "respondent_id,couple_id,gender,education_years,employed,vignette_arm,info_treated,"
          "weight,seriousness,victim_blaming,perpetrator_accountability,justification,"
          "emotional_strength,drinking,minimization_of_harassment,physical_strength,"
          "emotional_toughness,gender_norms_index,parenthood_norms,bargaining_power,charity,"
          "center_knowledge,way_out,leisure_with_partner,leisure_with_partner_children\n";
      for (const auto& r : dr.respondents) {
        csv += r.respondent_id + "," + r.couple_id + "," + to_string(r.gender) + "," +
               format_fixed(r.education_years, 4) + "," + (r.employed ? "1" : "0") + "," +
               to_string(r.vignette_arm) + "," + (r.info_treated ? "1" : "0") + "," +
               (r.weight ? format_fixed(*r.weight, 4) : std::string());
        for (double v : {r.seriousness, r.victim_blaming, r.perpetrator_accountability,
                         r.justification, r.emotional_strength, r.drinking,
                         r.minimization_of_harassment, r.physical_strength,
                         r.emotional_toughness, r.gender_norms_index, r.parenthood_norms})
          csv += "," + format_fixed(v, 4);
        csv += "," + std::to_string(r.bargaining_power);
        for (double v : {r.charity, r.center_knowledge, r.way_out})
          csv += "," + format_fixed(v, 4);
        csv += "," + format_fixed(r.leisure_with_partner, 2) + "," +
               format_fixed(r.leisure_with_partner_children, 2) + "\n";
      }
      write_file(out + "/derived_respondents.csv", csv);

      std::string ccsv =
          "couple_id,gap_chores,gap_chores_defined,gap_childcare,gap_childcare_defined,"
          "asymmetry_with_partner,asymmetry_with_partner_defined,"
          "asymmetry_with_partner_children,asymmetry_with_partner_children_defined\n";
      for (const auto& c : dr.couples) {
        auto cell = [](const Ratio& r) {
          return (r.defined ? format_fixed(r.value, 4) : std::string()) + "," +
                 (r.defined ? "1" : "0");
        };
        ccsv += c.couple_id + "," + cell(c.gap_chores) + "," + cell(c.gap_childcare) + "," +
                cell(c.asymmetry_with_partner) + "," + cell(c.asymmetry_with_partner_children) +
                "\n";
      }
      write_file(out + "/derived_couples.csv", ccsv);
    }
    completed.push_back("derive");

    // factor retention
    stage = "factor";
    ParallelAnalysisResult pa =
        parallel_analysis(dr.indicators, cfg_.pa_replications, cfg_.pa_percentile, cfg_.pa_seed);
    {
      json j;
      j["stage"] = "factor";
      j["observed"] = pa.observed;
      j["thresholds"] = pa.thresholds;
      j["n_retained"] = pa.n_retained;
      j["replications"] = pa.replications;
      j["percentile"] = pa.percentile;
      j["seed"] = pa.seed;
      j["rows_used"] = pa.n;
      j["rows_dropped"] = pa.dropped;
      j["variables"] = indicator_names();
      emit("parallel_analysis.json", j);
    }
    completed.push_back("factor");

    // sem
    stage = "sem";
    SemSpec spec = SemSpec::default_spec();
    SemEstimate est = fit_ml(spec, dr.indicators);
    FitStats fstats = fit_statistics(est);
    FactorScores scores = factor_scores(est, dr.indicators);
    {
      json j;
      j["stage"] = "sem";
      j["rows_used"] = est.n;
      j["rows_dropped"] = est.dropped;
      j["iterations"] = est.iterations;
      j["final_gradient_norm"] = est.grad_inf;
      j["f_min"] = est.f_min;
      j["latents"] = spec.latent_names;
      bool any_heywood = false;
      for (bool h : est.heywood) any_heywood = any_heywood || h;
      j["heywood"] = est.heywood;
      j["heywood_warning"] = any_heywood;
      json loadings = json::array();
      for (std::size_t k = 0; k < spec.n_indicators(); ++k) {
        Eigen::Index ik = static_cast<Eigen::Index>(k);
        double z = est.se_lambda[ik] > 0.0 ? est.lambda[ik] / est.se_lambda[ik] : 0.0;
        double p = two_sided_p(z);
        loadings.push_back({{"indicator", spec.indicator_names[k]},
                            {"latent", spec.latent_names[static_cast<std::size_t>(
                                           spec.loading_of[k])]},
                            {"unstd", est.lambda[ik]},
                            {"std", est.std_loadings[ik]},
                            {"se", est.se_lambda[ik]},
                            {"z", z},
                            {"p", p},
                            {"se_naive", est.se_lambda_naive[ik]}});
      }
      j["loadings"] = loadings;
      json resid = json::array();
      for (std::size_t k = 0; k < spec.n_indicators(); ++k) {
        Eigen::Index ik = static_cast<Eigen::Index>(k);
        double z = est.se_eps[ik] > 0.0 ? est.eps[ik] / est.se_eps[ik] : 0.0;
        resid.push_back({{"indicator", spec.indicator_names[k]},
                         {"estimate", est.eps[ik]},
                         {"se", est.se_eps[ik]},
                         {"z", z},
                         {"p", two_sided_p(z)},
                         {"se_naive", est.se_eps_naive[ik]}});
      }
      j["residual_variances"] = resid;
      json psis = json::array();
      std::size_t t = 0;
      for (std::size_t a = 0; a < spec.n_latents(); ++a)
        for (std::size_t b = a + 1; b < spec.n_latents(); ++b, ++t) {
          Eigen::Index it = static_cast<Eigen::Index>(t);
          double z = est.se_psi[it] > 0.0
                         ? est.psi(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(b)) /
                               est.se_psi[it]
                         : 0.0;
          psis.push_back({{"row", spec.latent_names[a]},
                          {"col", spec.latent_names[b]},
                          {"estimate",
                           est.psi(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(b))},
                          {"se", est.se_psi[it]},
                          {"z", z},
                          {"p", two_sided_p(z)},
                          {"se_naive", est.se_psi_naive[it]}});
        }
      j["latent_covariances"] = psis;
      json fit;
      fit["srmr"] = fstats.srmr;
      fit["srmr_includes_diagonal"] = true;
      fit["cd"] = fstats.cd;
      json rows = json::array();
      for (const auto& r : fstats.rows)
        rows.push_back({{"indicator", r.indicator},
                        {"fitted", r.fitted},
                        {"predicted", r.predicted},
                        {"residual", r.residual},
                        {"r2", r.r2},
                        {"mc", r.mc},
                        {"mc2", r.mc2}});
      fit["rows"] = rows;
      j["fit"] = fit;
      j["scores_skipped"] = scores.skipped;
      emit("sem.json", j);

      std::string csv = "observed_variable,latent_factor,unstd_coeff,std_coeff,std_err,z,p\n";
      for (std::size_t k = 0; k < spec.n_indicators(); ++k) {
        Eigen::Index ik = static_cast<Eigen::Index>(k);
        double z = est.se_lambda[ik] > 0.0 ? est.lambda[ik] / est.se_lambda[ik] : 0.0;
        csv += spec.indicator_names[k] + "," +
               spec.latent_names[static_cast<std::size_t>(spec.loading_of[k])] + "," +
               format_fixed(est.lambda[ik], 4) + "," + format_fixed(est.std_loadings[ik], 4) +
               "," + format_fixed(est.se_lambda[ik], 4) + "," + format_fixed(z, 4) + "," +
               format_fixed(two_sided_p(z), 4) + "\n";
      }
      write_file(out + "/sem.csv", csv);
    }
    completed.push_back("sem");

    // composite
    stage = "composite";
    CompositeResult comp = build_composite(scores.scores, cfg_.composite_reverse);
    std::vector<double> complete_index;
    for (Eigen::Index i = 0; i < comp.index.size(); ++i)
      if (std::isfinite(comp.index[i])) complete_index.push_back(comp.index[i]);
    {
      Eigen::MatrixXd z(static_cast<Eigen::Index>(complete_index.size()), scores.scores.cols());
      Eigen::Index r = 0;
      for (Eigen::Index i = 0; i < scores.scores.rows(); ++i) {
        if (!std::isfinite(comp.index[i])) continue;
        for (Eigen::Index c = 0; c < scores.scores.cols(); ++c) {
          double v = (scores.scores(i, c) - comp.model.means[c]) / comp.model.sds[c];
          z(r, c) = comp.model.reverse[static_cast<std::size_t>(c)] ? -v : v;
        }
        ++r;
      }
      ReliabilityReport alpha = cronbach_alpha(z);

      json j;
      j["stage"] = "composite";
      j["phi"] = std::vector<double>(comp.model.phi.data(),
                                     comp.model.phi.data() + comp.model.phi.size());
      j["eigenvalues"] = std::vector<double>(
          comp.model.eigenvalues.data(),
          comp.model.eigenvalues.data() + comp.model.eigenvalues.size());
      j["explained_variance"] = comp.model.explained;
      j["low_explained_warning"] = comp.model.low_explained_warning;
      j["reverse"] = cfg_.composite_reverse;
      j["standardizers"] = {
          {"mean", std::vector<double>(comp.model.means.data(),
                                       comp.model.means.data() + comp.model.means.size())},
          {"sd", std::vector<double>(comp.model.sds.data(),
                                     comp.model.sds.data() + comp.model.sds.size())}};
      j["n_scored"] = complete_index.size();
      j["n_skipped"] = comp.skipped;
      j["reliability"] = {{"k", alpha.k},
                          {"avg_interitem_covariance", alpha.cbar},
                          {"avg_item_variance", alpha.vbar},
                          {"alpha", alpha.alpha}};
      if (complete_index.size() >= 30) {
        DistributionSummary dist = index_distribution(complete_index);
        j["distribution"] = {{"mean", dist.mean},         {"sd", dist.sd},
                             {"skewness", dist.skewness}, {"bandwidth", dist.bandwidth},
                             {"grid", dist.grid[0]},      {"density", dist.grid[1]}};
      } else {
        j["distribution"] = nullptr;
      }
      emit("composite.json", j);

      std::string csv = "respondent_id,index\n";
      for (std::size_t i = 0; i < dr.respondents.size(); ++i)
        csv += dr.respondents[i].respondent_id + "," +
               csv_cell(comp.index[static_cast<Eigen::Index>(i)], 4) + "\n";
      write_file(out + "/composite.csv", csv);
    }
    completed.push_back("composite");

    // validate
    stage = "validate";
    {
      Frame frame = build_frame(dr, comp.index);
      json jregs = json::array();
      std::string csv = "table,split,group,term,estimate,std_err,z,p,stars,n,n_clusters,r2\n";
      for (const auto& rspec : cfg_.regressions) {
        json jr;
        jr["name"] = rspec.name;
        jr["outcome"] = rspec.outcome;
        jr["predictors"] = rspec.predictors;
        jr["se"] = rspec.se;
        SeKind kind = parse_se_kind(rspec.se);
        Design d = assemble(frame, rspec.outcome, rspec.predictors);
        try {
          OlsResult fit = ols_fit(d.y, d.X, d.names, kind,
                                  kind == SeKind::cluster ? &d.clusters : nullptr);
          jr.update(ols_to_json(fit));
          jr["ok"] = true;
          ols_to_csv(csv, rspec.name, "", "", fit);
        } catch (const Error& e) {
          jr["ok"] = false;
          jr["failure"] = e.what();
        }
        json jsub = json::array();
        for (const auto& split_name : rspec.subgroup_splits) {
          Design ds = assemble(frame, rspec.outcome, rspec.predictors, &split_name);
          std::vector<double> split_vals;
          const Eigen::VectorXd& sv = frame.at(split_name);
          for (Eigen::Index i : ds.rows) split_vals.push_back(sv[i]);
          json base;
          base["split"] = split_name;
          try {
            SplitResult sr = subgroup_split(split_vals);
            base["threshold"] = sr.threshold;
            base["boolean"] = sr.boolean_passthrough;
            auto subs = subgroup_regressions(ds.y, ds.X, ds.names, ds.clusters,
                                             {{split_name, sr.above}});
            for (const auto& s : subs) {
              json je = base;
              je["group"] = s.group;
              je["n"] = s.n;
              je["ok"] = s.ok;
              if (s.ok) {
                je.update(ols_to_json(s.fit));
                ols_to_csv(csv, rspec.name, split_name, s.group, s.fit);
              } else {
                je["failure"] = s.failure;
              }
              jsub.push_back(je);
            }
          } catch (const Error& e) {
            json je = base;
            je["ok"] = false;
            je["failure"] = e.what();
            jsub.push_back(je);
          }
        }
        jr["subgroups"] = jsub;
        jregs.push_back(jr);
      }

      json j;
      j["stage"] = "validate";
      j["regressions"] = jregs;
      if (cfg_.probit.enabled) {
        json jp;
        jp["outcome"] = cfg_.probit.outcome;
        jp["focal"] = cfg_.probit.focal;
        jp["controls"] = cfg_.probit.controls;
        jp["binarize"] = cfg_.probit.binarize;
        std::vector<std::string> preds = {cfg_.probit.focal};
        for (const auto& c : cfg_.probit.controls) preds.push_back(c);
        Design d = assemble(frame, cfg_.probit.outcome, preds);
        try {
          double thr = cfg_.probit.threshold;
          if (cfg_.probit.binarize == "median") {
            std::vector<double> vals(d.y.data(), d.y.data() + d.y.size());
            thr = median(vals);
          }
          jp["threshold_used"] = thr;
          Eigen::VectorXd yb(d.y.size());
          for (Eigen::Index i = 0; i < d.y.size(); ++i) yb[i] = d.y[i] > thr ? 1.0 : 0.0;
          ProbitFit fit = probit_fit(yb, d.X, d.names);
          bool binary_focal = true;
          for (Eigen::Index i = 0; i < d.X.rows(); ++i)
            binary_focal = binary_focal && (d.X(i, 1) == 0.0 || d.X(i, 1) == 1.0);
          AmeResult ame = probit_ame(fit, d.X, 1, binary_focal);
          json coeffs = json::array();
          for (std::size_t i = 0; i < fit.names.size(); ++i) {
            Eigen::Index ii = static_cast<Eigen::Index>(i);
            double z = fit.se[ii] > 0.0 ? fit.beta[ii] / fit.se[ii] : 0.0;
            double p = two_sided_p(z);
            coeffs.push_back({{"term", fit.names[i]},
                              {"estimate", fit.beta[ii]},
                              {"se", fit.se[ii]},
                              {"z", z},
                              {"p", p},
                              {"stars", significance_stars(p)}});
            csv += "probit:" + cfg_.probit.outcome + ",,," + fit.names[i] + "," +
                   csv_cell(fit.beta[ii], 4) + "," + csv_cell(fit.se[ii], 4) + "," +
                   csv_cell(z, 4) + "," + csv_cell(p, 4) + "," + significance_stars(p) + "," +
                   std::to_string(fit.n) + ",,\n";
          }
          jp["coefficients"] = coeffs;
          jp["loglik"] = fit.loglik;
          jp["iterations"] = fit.iterations;
          jp["n"] = fit.n;
          double amez = ame.se > 0.0 ? ame.estimate / ame.se : 0.0;
          double amep = two_sided_p(amez);
          jp["ame"] = {{"focal", ame.focal},       {"estimate", ame.estimate},
                       {"se", ame.se},             {"ci_low", ame.ci_low},
                       {"ci_high", ame.ci_high},   {"binary_focal", binary_focal},
                       {"p", amep},                {"stars", significance_stars(amep)}};
          jp["ok"] = true;
          csv += "probit:" + cfg_.probit.outcome + ",,,ame:" + ame.focal + "," +
                 csv_cell(ame.estimate, 4) + "," + csv_cell(ame.se, 4) + "," +
                 csv_cell(amez, 4) + "," + csv_cell(amep, 4) + "," +
                 significance_stars(amep) + "," + std::to_string(fit.n) + ",,\n";
        } catch (const Error& e) {
          jp["ok"] = false;
          jp["failure"] = e.what();
        }
        j["probit"] = jp;
      } else {
        j["probit"] = nullptr;
      }
      emit("validate.json", j);
      write_file(out + "/regressions.csv", csv);
    }
    completed.push_back("validate");
  } catch (const Error& e) {
    json manifest;
    manifest["failed_stage"] = stage;
    manifest["error"] = e.what();
    manifest["completed_stages"] = completed;
    try {
      emit("error_manifest.json", manifest);
    } catch (const Error&) {
    }
    fail(errc::stage, "StageFailed: " + stage + ": " + e.what());
  }
}

}  // namespace tatdv
