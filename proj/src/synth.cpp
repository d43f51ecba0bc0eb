#include "tatdv/synth.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>
#include <algorithm>
#include <cmath>
#include <filesystem>
#include <json.hpp>

#include "tatdv/csv.hpp"
#include "tatdv/error.hpp"
#include "tatdv/stats.hpp"

namespace tatdv {

using nlohmann::json;

Eigen::Matrix3d GeneratorSpec::psi() const {
  Eigen::Matrix3d p;
  // latent order: justification, masculinity, gap
  p << 1.0, psi_masc_just, psi_just_gap,
       psi_masc_just, 1.0, psi_masc_gap,
       psi_just_gap, psi_masc_gap, 1.0;
  return p;
}

namespace {

constexpr int kLatentOf[11] = {0, 0, 0, 0, 1, 1, 1, 1, 1, 2, 2};

const std::vector<std::pair<std::string, ActivityGroup>>& default_codes() {
  static const std::vector<std::pair<std::string, ActivityGroup>> codes = {
      {"meal_preparation", ActivityGroup::chores},
      {"dish_washing", ActivityGroup::chores},
      {"cleaning", ActivityGroup::chores},
      {"laundry", ActivityGroup::chores},
      {"grocery_shopping", ActivityGroup::chores},
      {"child_physical_care", ActivityGroup::childcare},
      {"child_play", ActivityGroup::childcare},
      {"child_homework_help", ActivityGroup::childcare},
      {"child_transport", ActivityGroup::childcare},
      {"watching_tv", ActivityGroup::leisure},
      {"reading", ActivityGroup::leisure},
      {"social_media", ActivityGroup::leisure},
      {"sports", ActivityGroup::leisure},
      {"socializing", ActivityGroup::leisure},
      {"hobby", ActivityGroup::leisure},
      {"sleep", ActivityGroup::leisure},
      {"personal_care", ActivityGroup::leisure},
      {"paid_work", ActivityGroup::other},
      {"commuting", ActivityGroup::other},
      {"study", ActivityGroup::other},
      {"errands", ActivityGroup::other},
      {"other_activity", ActivityGroup::other}};
  return codes;
}

std::vector<std::string> codes_in(ActivityGroup g) {
  std::vector<std::string> out;
  for (const auto& [code, grp] : default_codes())
    if (grp == g) out.push_back(code);
  return out;
}

Eigen::MatrixXd loading_matrix(const GeneratorSpec& spec) {
  Eigen::MatrixXd L = Eigen::MatrixXd::Zero(11, 3);
  for (int k = 0; k < 11; ++k) L(k, kLatentOf[k]) = spec.lambda[k];
  return L;
}

double clamp01_100(double v) { return std::min(100.0, std::max(0.0, v)); }

}  // namespace

PopulationComposite population_composite(const GeneratorSpec& spec) {
  Eigen::MatrixXd L = loading_matrix(spec);
  Eigen::Matrix3d psi = spec.psi();
  Eigen::LLT<Eigen::Matrix3d> llt(psi);
  if (llt.info() != Eigen::Success) fail(errc::invalid_argument, "NonPDPsi");
  Eigen::MatrixXd sigma = L * psi * L.transpose();
  for (int k = 0; k < 11; ++k) {
    if (spec.eps[k] <= 0.0) fail(errc::invalid_argument, "NonPositiveResidual");
    sigma(k, k) += spec.eps[k];
  }
  PopulationComposite pc;
  pc.score_coef = psi * L.transpose() * sigma.llt().solve(Eigen::MatrixXd::Identity(11, 11));
  Eigen::Matrix3d vs = pc.score_coef * sigma * pc.score_coef.transpose();
  pc.score_sd = vs.diagonal().cwiseSqrt();
  Eigen::Vector3d flip(1.0, 1.0, -1.0);
  Eigen::Matrix3d corr;
  for (int a = 0; a < 3; ++a)
    for (int b = 0; b < 3; ++b)
      corr(a, b) = flip[a] * flip[b] * vs(a, b) / (pc.score_sd[a] * pc.score_sd[b]);
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> es(corr);
  pc.lead_eigenvalue = es.eigenvalues()[2];
  pc.phi = es.eigenvectors().col(2);
  if (pc.phi[0] < 0.0) pc.phi = -pc.phi;
  return pc;
}

double PopulationComposite::composite_of(const Eigen::VectorXd& x,
                                         const std::array<double, 11>& means) const {
  Eigen::VectorXd d(11);
  for (int k = 0; k < 11; ++k) d[k] = x[k] - means[k];
  Eigen::Vector3d z = (score_coef * d).array() / score_sd.array();
  z[2] = -z[2];
  return phi.dot(z);
}

IndicatorSim simulate_indicators(const GeneratorSpec& spec, std::size_t n_respondents) {
  Eigen::Matrix3d psi = spec.psi();
  Eigen::LLT<Eigen::Matrix3d> llt(psi);
  if (llt.info() != Eigen::Success) fail(errc::invalid_argument, "NonPDPsi");
  Eigen::Matrix3d chol = llt.matrixL();

  IndicatorSim sim;
  sim.indicators.resize(static_cast<Eigen::Index>(n_respondents), 11);
  sim.latents.resize(static_cast<Eigen::Index>(n_respondents), 3);
  std::array<std::size_t, 11> clipped{};
  for (std::size_t i = 0; i < n_respondents; ++i) {
    Rng rng(derive_seed(spec.seed, i));
    Eigen::Vector3d z(rng.normal(), rng.normal(), rng.normal());
    Eigen::Vector3d xi = chol * z;
    sim.latents.row(static_cast<Eigen::Index>(i)) = xi.transpose();
    for (int k = 0; k < 11; ++k) {
      double v = spec.means[k] + spec.lambda[k] * xi[kLatentOf[k]] +
                 std::sqrt(spec.eps[k]) * rng.normal();
      if (spec.clip_survey && k < 9) {
        double c = clamp01_100(v);
        if (c != v) ++clipped[k];
        v = c;
      }
      sim.indicators(static_cast<Eigen::Index>(i), k) = v;
    }
  }
  std::size_t total = 0;
  for (int k = 0; k < 11; ++k) {
    sim.clip_fraction_by[k] =
        static_cast<double>(clipped[k]) / static_cast<double>(std::max<std::size_t>(n_respondents, 1));
    total += clipped[k];
  }
  sim.clip_fraction =
      static_cast<double>(total) / static_cast<double>(std::max<std::size_t>(9 * n_respondents, 1));
  return sim;
}

std::pair<int, int> split_weekly_hours(double hours) {
  if (hours < 0.0 || hours > 168.0 + 1e-9)
    fail(errc::invalid_argument, "InfeasibleTarget: " + std::to_string(hours) + " weekly hours");
  double sixths = 6.0 * hours;
  int base = static_cast<int>(std::floor(sixths / 7.0));
  int best_wd = 0, best_we = 0;
  double best_err = 1e300;
  for (int wd = std::max(0, base - 1); wd <= std::min(144, base + 2); ++wd) {
    int we = static_cast<int>(std::lround((sixths - 5.0 * wd) / 2.0));
    we = std::min(144, std::max(0, we));
    double err = std::fabs(sixths - 5.0 * wd - 2.0 * we);
    if (err < best_err) {
      best_err = err;
      best_wd = wd;
      best_we = we;
    }
  }
  return {best_wd, best_we};
}

namespace {

struct DayCounts {
  int chores = 0, childcare = 0, leisure_pc = 0, leisure_p = 0;
  int total() const { return chores + childcare + leisure_pc + leisure_p; }
};

DiaryDay build_day(const std::string& respondent_id, DayKind kind, const DayCounts& c) {
  if (c.total() > kSlotsPerDay)
    fail(errc::stage, "InfeasibleTarget: " + std::to_string(c.total()) +
                          " slots needed in one day for respondent " + respondent_id);
  static const std::vector<std::string> chores_codes = codes_in(ActivityGroup::chores);
  static const std::vector<std::string> child_codes = codes_in(ActivityGroup::childcare);
  static const std::vector<std::string> leisure_codes = codes_in(ActivityGroup::leisure);
  static const std::vector<std::string> other_codes = codes_in(ActivityGroup::other);

  DiaryDay day;
  day.respondent_id = respondent_id;
  day.day_kind = kind;
  day.slots.resize(kSlotsPerDay);
  int idx = 0;
  for (int i = 0; i < c.chores; ++i, ++idx)
    day.slots[idx].primary = chores_codes[i % chores_codes.size()];
  for (int i = 0; i < c.childcare; ++i, ++idx) {
    day.slots[idx].primary = child_codes[i % child_codes.size()];
    day.slots[idx].with_children = true;
  }
  for (int i = 0; i < c.leisure_pc; ++i, ++idx) {
    Slot& s = day.slots[idx];
    s.primary = leisure_codes[i % leisure_codes.size()];
    s.with_partner = true;
    s.with_children = true;
    if (i % 3 == 2) s.secondary = leisure_codes[(i + 1) % leisure_codes.size()];
  }
  for (int i = 0; i < c.leisure_p; ++i, ++idx) {
    Slot& s = day.slots[idx];
    s.primary = leisure_codes[(i + 2) % leisure_codes.size()];
    s.with_partner = true;
  }
  for (int i = 0; idx < kSlotsPerDay; ++i, ++idx)
    day.slots[idx].primary = other_codes[i % other_codes.size()];
  return day;
}

double realized_hours(int wd, int we) { return (5.0 * wd + 2.0 * we) / 6.0; }

std::string zero_pad(std::size_t v, int width) {
  std::string s = std::to_string(v);
  while (static_cast<int>(s.size()) < width) s.insert(s.begin(), '0');
  return s;
}

}  // namespace

CoupleBundle simulate_couple_bundle(const GeneratorSpec& spec) {
  CoupleBundle b;
  b.spec = spec;
  for (const auto& [code, grp] : default_codes()) b.taxonomy.groups[code] = grp;
  b.population = population_composite(spec);

  Eigen::Matrix3d psi = spec.psi();
  // (J, M) given G: mean loads on the gap column, covariance is the
  // Schur complement.
  Eigen::Vector2d mu_w(psi(0, 2), psi(1, 2));
  Eigen::Matrix2d cond = psi.topLeftCorner<2, 2>() - mu_w * mu_w.transpose();
  Eigen::LLT<Eigen::Matrix2d> cllt(cond);
  if (cllt.info() != Eigen::Success) fail(errc::invalid_argument, "NonPDPsi");
  Eigen::Matrix2d cchol = cllt.matrixL();

  const int id_width = static_cast<int>(std::to_string(std::max<std::size_t>(spec.n_couples, 1)).size());
  const ItemRegistry reg;
  std::array<std::size_t, 11> clipped{};
  std::size_t gap_clamped = 0;

  const double alpha = inv_norm_cdf(std::min(0.999999, std::max(1e-6, spec.control_rate)));
  const double treated_rate =
      std::min(0.999999, std::max(1e-6, spec.control_rate + spec.treatment_ame));
  const double tau = inv_norm_cdf(treated_rate) - alpha;

  for (std::size_t c = 0; c < spec.n_couples; ++c) {
    Rng rng(derive_seed(spec.seed, c));
    const std::string couple_id = "c" + zero_pad(c + 1, id_width);
    double g_c = rng.normal();

    // Couple-shared gap indicators, realized through the diaries.
    double raw_gap[2];
    for (int d = 0; d < 2; ++d)
      raw_gap[d] = spec.means[9 + d] + spec.lambda[9 + d] * g_c +
                   std::sqrt(spec.eps[9 + d]) * rng.normal();
    double gap[2];
    for (int d = 0; d < 2; ++d) {
      gap[d] = std::max(raw_gap[d], -1.0);
      if (gap[d] != raw_gap[d]) ++gap_clamped;
    }
    double male_dom[2] = {rng.uniform_in(spec.male_chores_lo, spec.male_chores_hi),
                          rng.uniform_in(spec.male_childcare_lo, spec.male_childcare_hi)};
    int dom_wd[2][2], dom_we[2][2];  // [domain][female=0/male=1]
    double gap_realized[2];
    for (int d = 0; d < 2; ++d) {
      double m = male_dom[d];
      if (gap[d] > 0.0) m = std::min(m, spec.domain_cap / (1.0 + gap[d]));
      double f = m * (1.0 + gap[d]);
      auto [mwd, mwe] = split_weekly_hours(m);
      auto [fwd, fwe] = split_weekly_hours(f);
      dom_wd[d][0] = fwd;
      dom_we[d][0] = fwe;
      dom_wd[d][1] = mwd;
      dom_we[d][1] = mwe;
      double mq = realized_hours(mwd, mwe), fq = realized_hours(fwd, fwe);
      gap_realized[d] = mq > 0.0 ? (fq - mq) / mq : 0.0;
    }

    for (int member = 0; member < 2; ++member) {
      const bool is_male = member == 1;
      Eigen::Vector2d zw(rng.normal(), rng.normal());
      Eigen::Vector2d jm = mu_w * g_c + cchol * zw;

      Eigen::VectorXd x(11);
      double xi[3] = {jm[0], jm[1], g_c};
      for (int k = 0; k < 9; ++k) {
        double v = spec.means[k] + spec.lambda[k] * xi[kLatentOf[k]] +
                   std::sqrt(spec.eps[k]) * rng.normal();
        double cv = clamp01_100(v);
        if (cv != v) ++clipped[k];
        x[k] = cv;
      }
      x[9] = gap_realized[0];
      x[10] = gap_realized[1];

      SurveyResponse s;
      s.respondent_id = couple_id + (is_male ? "m" : "f");
      s.couple_id = couple_id;
      s.gender = is_male ? Gender::male : Gender::female;
      s.items[reg.vignette[0]] = x[0];
      s.items[reg.vignette[1]] = x[1];
      s.items[reg.vignette[2]] = x[2];
      s.items[reg.vignette[3]] = x[3];
      s.items[reg.masculinity[0]] = x[7];  // physical strength
      s.items[reg.masculinity[1]] = x[4];  // emotional strength
      s.items[reg.masculinity[2]] = x[8];  // emotional toughness
      s.items[reg.masculinity[3]] = x[6];  // minimization
      s.items[reg.masculinity[4]] = x[5];  // drinking
      for (const auto& key : reg.norms)
        s.items[key] = clamp01_100(50.0 + 10.0 * jm[1] + 12.0 * rng.normal());
      s.items[reg.parenthood] = clamp01_100(50.0 + 8.0 * jm[0] + 15.0 * rng.normal());
      s.items[reg.bargaining] = rng.uniform() < 0.7 ? 1.0 : 0.0;
      s.items[reg.charity] = clamp01_100(50.0 + 20.0 * rng.normal());
      s.items[reg.center_knowledge] = clamp01_100(50.0 + 20.0 * rng.normal());
      bool treated = rng.uniform() < spec.treated_share;
      s.info_treated = treated;
      s.items[reg.way_out] =
          clamp01_100(50.0 + 25.0 * (alpha + (treated ? tau : 0.0) + rng.normal()));
      s.education_years = std::floor(rng.uniform_in(8.0, 19.0));
      s.employed = rng.uniform() < 0.65;
      s.vignette_arm = rng.uniform() < 0.5 ? VignetteArm::physical : VignetteArm::psychological;

      RespondentTruth t;
      t.respondent_id = s.respondent_id;
      t.latent_just = xi[0];
      t.latent_masc = xi[1];
      t.latent_gap = xi[2];
      t.composite = b.population.composite_of(x, spec.means);

      double lpc = spec.leisure_children_const + spec.leisure_children_slope * t.composite +
                   spec.leisure_resid_sd * rng.normal();
      double lp = spec.leisure_partner_const + spec.leisure_partner_slope * t.composite +
                  spec.leisure_resid_sd * rng.normal();
      lpc = std::min(spec.leisure_cap, std::max(0.0, lpc));
      double lp_only = std::min(spec.leisure_cap - lpc, std::max(0.0, lp - lpc));
      double inflate = 1.0 + (is_male ? 0.5 : -0.5) * spec.male_report_inflation;
      lpc = std::min(spec.leisure_cap, lpc * inflate);
      lp_only = std::min(spec.leisure_cap - lpc, lp_only * inflate);
      t.leisure_children_target = lpc;
      t.leisure_partner_target = lpc + lp_only;

      auto [lpc_wd, lpc_we] = split_weekly_hours(lpc);
      auto [lpo_wd, lpo_we] = split_weekly_hours(lp_only);
      DayCounts wd{dom_wd[0][member], dom_wd[1][member], lpc_wd, lpo_wd};
      DayCounts we{dom_we[0][member], dom_we[1][member], lpc_we, lpo_we};
      b.diaries.push_back(build_day(s.respondent_id, DayKind::weekday, wd));
      b.diaries.push_back(build_day(s.respondent_id, DayKind::weekend, we));
      b.surveys.push_back(std::move(s));
      b.truth.push_back(std::move(t));
    }
  }

  std::size_t n_resp = 2 * spec.n_couples;
  std::size_t total_clipped = 0;
  for (int k = 0; k < 11; ++k) {
    b.clip_fraction_by[k] =
        static_cast<double>(clipped[k]) / static_cast<double>(std::max<std::size_t>(n_resp, 1));
    total_clipped += clipped[k];
  }
  b.clip_fraction = static_cast<double>(total_clipped) /
                    static_cast<double>(std::max<std::size_t>(9 * n_resp, 1));
  b.gap_clamp_fraction = static_cast<double>(gap_clamped) /
                         static_cast<double>(std::max<std::size_t>(2 * spec.n_couples, 1));
  return b;
}

namespace {

json spec_to_json(const GeneratorSpec& s) {
  json j;
  j["n_couples"] = s.n_couples;
  j["seed"] = s.seed;
  j["psi"] = {{"masc_just", s.psi_masc_just},
              {"masc_gap", s.psi_masc_gap},
              {"just_gap", s.psi_just_gap}};
  j["lambda"] = s.lambda;
  j["eps"] = s.eps;
  j["means"] = s.means;
  j["clip_survey"] = s.clip_survey;
  j["diary"] = {{"male_chores", {s.male_chores_lo, s.male_chores_hi}},
                {"male_childcare", {s.male_childcare_lo, s.male_childcare_hi}},
                {"domain_cap", s.domain_cap},
                {"leisure_cap", s.leisure_cap},
                {"male_report_inflation", s.male_report_inflation}};
  j["regression"] = {{"leisure_children_const", s.leisure_children_const},
                     {"leisure_children_slope", s.leisure_children_slope},
                     {"leisure_partner_const", s.leisure_partner_const},
                     {"leisure_partner_slope", s.leisure_partner_slope},
                     {"leisure_resid_sd", s.leisure_resid_sd}};
  j["treatment"] = {{"ame", s.treatment_ame},
                    {"control_rate", s.control_rate},
                    {"treated_share", s.treated_share}};
  return j;
}

template <typename T>
void read_if(const json& j, const char* key, T& out) {
  if (j.contains(key)) out = j.at(key).get<T>();
}

}  // namespace

GeneratorSpec GeneratorSpec::from_json_string(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    fail(errc::config, std::string("MalformedSpec: ") + e.what());
  }
  GeneratorSpec s;
  try {
    read_if(j, "n_couples", s.n_couples);
    read_if(j, "seed", s.seed);
    if (j.contains("psi")) {
      const auto& p = j.at("psi");
      read_if(p, "masc_just", s.psi_masc_just);
      read_if(p, "masc_gap", s.psi_masc_gap);
      read_if(p, "just_gap", s.psi_just_gap);
    }
    read_if(j, "lambda", s.lambda);
    read_if(j, "eps", s.eps);
    read_if(j, "means", s.means);
    read_if(j, "clip_survey", s.clip_survey);
    if (j.contains("diary")) {
      const auto& d = j.at("diary");
      if (d.contains("male_chores")) {
        s.male_chores_lo = d.at("male_chores").at(0).get<double>();
        s.male_chores_hi = d.at("male_chores").at(1).get<double>();
      }
      if (d.contains("male_childcare")) {
        s.male_childcare_lo = d.at("male_childcare").at(0).get<double>();
        s.male_childcare_hi = d.at("male_childcare").at(1).get<double>();
      }
      read_if(d, "domain_cap", s.domain_cap);
      read_if(d, "leisure_cap", s.leisure_cap);
      read_if(d, "male_report_inflation", s.male_report_inflation);
    }
    if (j.contains("regression")) {
      const auto& r = j.at("regression");
      read_if(r, "leisure_children_const", s.leisure_children_const);
      read_if(r, "leisure_children_slope", s.leisure_children_slope);
      read_if(r, "leisure_partner_const", s.leisure_partner_const);
      read_if(r, "leisure_partner_slope", s.leisure_partner_slope);
      read_if(r, "leisure_resid_sd", s.leisure_resid_sd);
    }
    if (j.contains("treatment")) {
      const auto& t = j.at("treatment");
      read_if(t, "ame", s.treatment_ame);
      read_if(t, "control_rate", s.control_rate);
      read_if(t, "treated_share", s.treated_share);
    }
  } catch (const json::exception& e) {
    fail(errc::config, std::string("MalformedSpec: ") + e.what());
  }
  return s;
}

GeneratorSpec GeneratorSpec::from_json_file(const std::string& path) {
  return from_json_string(read_file(path));
}

void write_couple_dataset(const CoupleBundle& b, const std::string& out_dir) {
  namespace fs = std::filesystem;
  std::error_code ec;
  fs::create_directories(out_dir, ec);
  if (ec) fail(errc::io, "CannotWrite: " + out_dir);

  const ItemRegistry reg;
  std::string survey = "respondent_id,couple_id,gender,education_years,employed,vignette_arm,"
                       "info_treated,weight";
  for (const auto& key : reg.all()) survey += "," + key;
  survey += "\n";
  for (const auto& s : b.surveys) {
    survey += s.respondent_id + "," + s.couple_id + "," + to_string(s.gender) + "," +
              format_exact(s.education_years) + "," + (s.employed ? "1" : "0") + "," +
              to_string(s.vignette_arm) + "," + (s.info_treated ? "1" : "0") + ",";
    if (s.weight) survey += format_exact(*s.weight);
    for (const auto& key : reg.all()) survey += "," + format_exact(s.items.at(key));
    survey += "\n";
  }
  write_file(out_dir + "/survey.csv", survey);

  std::string diary =
      "respondent_id,day_kind,slot_index,primary_code,secondary_code,with_partner,with_children\n";
  for (const auto& day : b.diaries) {
    for (int i = 0; i < kSlotsPerDay; ++i) {
      const Slot& s = day.slots[i];
      diary += day.respondent_id;
      diary += ',';
      diary += to_string(day.day_kind);
      diary += ',';
      diary += std::to_string(i);
      diary += ',';
      diary += s.primary;
      diary += ',';
      diary += s.secondary;
      diary += s.with_partner ? ",1," : ",0,";
      diary += s.with_children ? "1\n" : "0\n";
    }
  }
  write_file(out_dir + "/diary.csv", diary);

  std::string tax = "code,group\n";
  for (const auto& [code, grp] : b.taxonomy.groups) tax += code + "," + to_string(grp) + "\n";
  write_file(out_dir + "/taxonomy.csv", tax);

  json truth;
  truth["spec"] = spec_to_json(b.spec);
  truth["population"] = {
      {"phi", {b.population.phi[0], b.population.phi[1], b.population.phi[2]}},
      {"score_sd",
       {b.population.score_sd[0], b.population.score_sd[1], b.population.score_sd[2]}},
      {"lead_eigenvalue", b.population.lead_eigenvalue}};
  truth["clip_fraction"] = b.clip_fraction;
  json by = json::object();
  static const char* kIndicatorKeys[11] = {
      "seriousness", "victim_blaming", "perpetrator_accountability", "justification",
      "emotional_strength", "drinking", "minimization_of_harassment", "physical_strength",
      "emotional_toughness", "gap_chores", "gap_childcare"};
  for (int k = 0; k < 11; ++k) by[kIndicatorKeys[k]] = b.clip_fraction_by[k];
  truth["clip_fraction_by"] = by;
  truth["clip_warning"] = b.clip_fraction >= 0.05;
  truth["gap_clamp_fraction"] = b.gap_clamp_fraction;
  json resp = json::array();
  for (const auto& t : b.truth)
    resp.push_back({{"respondent_id", t.respondent_id},
                    {"latent_just", t.latent_just},
                    {"latent_masc", t.latent_masc},
                    {"latent_gap", t.latent_gap},
                    {"composite", t.composite},
                    {"leisure_children_target", t.leisure_children_target},
                    {"leisure_partner_target", t.leisure_partner_target}});
  truth["respondents"] = resp;
  write_file(out_dir + "/truth.json", truth.dump(2) + "\n");
}

void simulate_couple_dataset(const GeneratorSpec& spec, const std::string& out_dir) {
  write_couple_dataset(simulate_couple_bundle(spec), out_dir);
}

}  // namespace tatdv
