#include "tatdv/derive.hpp"

#include <cmath>
#include <limits>

#include "tatdv/error.hpp"
#include "tatdv/stats.hpp"

namespace tatdv {

double weekly_hours(const DiaryDay& weekday, const DiaryDay& weekend, const SlotFilter& filter) {
  if (weekday.respondent_id != weekend.respondent_id)
    fail(errc::invalid_argument, "MismatchedRespondent: " + weekday.respondent_id + " vs " +
                                     weekend.respondent_id);
  if (weekday.day_kind != DayKind::weekday || weekend.day_kind != DayKind::weekend)
    fail(errc::invalid_argument, "MismatchedRespondent: day kinds swapped");
  int wd = 0, we = 0;
  for (const Slot& s : weekday.slots) wd += filter(s) ? 1 : 0;
  for (const Slot& s : weekend.slots) we += filter(s) ? 1 : 0;
  return (5.0 * wd + 2.0 * we) / 6.0;
}

double domain_weekly_hours(const Member& m, const Taxonomy& tax, ActivityGroup group) {
  return weekly_hours(m.weekday, m.weekend,
                      [&](const Slot& s) { return tax.group_of(s.primary) == group; });
}

double leisure_with_partner(const Member& m, const Taxonomy& tax) {
  return weekly_hours(m.weekday, m.weekend, [&](const Slot& s) {
    return tax.group_of(s.primary) == ActivityGroup::leisure && s.with_partner;
  });
}

double leisure_with_partner_children(const Member& m, const Taxonomy& tax) {
  return weekly_hours(m.weekday, m.weekend, [&](const Slot& s) {
    return tax.group_of(s.primary) == ActivityGroup::leisure && s.with_partner && s.with_children;
  });
}

Ratio gender_gap(const CoupleRecord& c, const Taxonomy& tax, ActivityGroup domain) {
  double f = domain_weekly_hours(c.female, tax, domain);
  double m = domain_weekly_hours(c.male, tax, domain);
  if (m == 0.0) return {0.0, false};
  return {(f - m) / m, true};
}

Ratio couple_leisure_asymmetry(const CoupleRecord& c, const Taxonomy& tax, LeisureScope scope) {
  auto hours = scope == LeisureScope::with_partner ? leisure_with_partner
                                                   : leisure_with_partner_children;
  double f = hours(c.female, tax);
  double m = hours(c.male, tax);
  if (f == 0.0 && m == 0.0) return {0.0, false};
  return {(f - m) / ((f + m) / 2.0), true};
}

double gender_norms_index(const SurveyResponse& r, const ItemRegistry& reg) {
  double sum = 0.0;
  for (const auto& key : reg.norms) {
    auto it = r.items.find(key);
    if (it == r.items.end())
      fail(errc::stage, "MissingItem: " + key + " for respondent " + r.respondent_id);
    sum += it->second;
  }
  return sum / static_cast<double>(reg.norms.size());
}

const std::vector<std::string>& indicator_names() {
  static const std::vector<std::string> names = {
      "seriousness",       "victim_blaming", "perpetrator_accountability",
      "justification",     "emotional_strength", "drinking",
      "minimization_of_harassment", "physical_strength", "emotional_toughness",
      "gap_chores",        "gap_childcare"};
  return names;
}

namespace {

double item(const SurveyResponse& r, const std::string& key) {
  auto it = r.items.find(key);
  if (it == r.items.end())
    fail(errc::stage, "MissingItem: " + key + " for respondent " + r.respondent_id);
  return it->second;
}

DerivedRespondent derive_member(const Member& m, const std::string& couple_id,
                                const Taxonomy& tax, const ItemRegistry& reg) {
  const SurveyResponse& s = m.survey;
  DerivedRespondent d;
  d.respondent_id = s.respondent_id;
  d.couple_id = couple_id;
  d.gender = s.gender;
  d.education_years = s.education_years;
  d.employed = s.employed;
  d.vignette_arm = s.vignette_arm;
  d.info_treated = s.info_treated;
  d.weight = s.weight;
  d.seriousness = item(s, reg.vignette[0]);
  d.victim_blaming = item(s, reg.vignette[1]);
  d.perpetrator_accountability = item(s, reg.vignette[2]);
  d.justification = item(s, reg.vignette[3]);
  d.physical_strength = item(s, reg.masculinity[0]);
  d.emotional_strength = item(s, reg.masculinity[1]);
  d.emotional_toughness = item(s, reg.masculinity[2]);
  d.minimization_of_harassment = item(s, reg.masculinity[3]);
  d.drinking = item(s, reg.masculinity[4]);
  d.gender_norms_index = gender_norms_index(s, reg);
  d.parenthood_norms = item(s, reg.parenthood);
  d.bargaining_power = static_cast<int>(item(s, reg.bargaining));
  d.charity = item(s, reg.charity);
  d.center_knowledge = item(s, reg.center_knowledge);
  d.way_out = item(s, reg.way_out);
  d.leisure_with_partner = leisure_with_partner(m, tax);
  d.leisure_with_partner_children = leisure_with_partner_children(m, tax);
  return d;
}

}  // namespace

DeriveResult derive_dataset(const std::vector<CoupleRecord>& couples, const Taxonomy& tax,
                            const ItemRegistry& reg) {
  DeriveResult res;
  const double nan = std::numeric_limits<double>::quiet_NaN();
  res.indicators.resize(static_cast<Eigen::Index>(couples.size() * 2), 11);
  Eigen::Index row = 0;
  for (const auto& c : couples) {
    DerivedCouple dc;
    dc.couple_id = c.couple_id;
    dc.gap_chores = gender_gap(c, tax, ActivityGroup::chores);
    dc.gap_childcare = gender_gap(c, tax, ActivityGroup::childcare);
    dc.asymmetry_with_partner = couple_leisure_asymmetry(c, tax, LeisureScope::with_partner);
    dc.asymmetry_with_partner_children =
        couple_leisure_asymmetry(c, tax, LeisureScope::with_partner_and_children);
    if (!dc.gap_chores.defined || !dc.gap_childcare.defined) ++res.couples_with_undefined_gap;
    res.couples.push_back(dc);

    for (const Member* mem : {&c.female, &c.male}) {
      DerivedRespondent d = derive_member(*mem, c.couple_id, tax, reg);
      res.indicators(row, 0) = d.seriousness;
      res.indicators(row, 1) = d.victim_blaming;
      res.indicators(row, 2) = d.perpetrator_accountability;
      res.indicators(row, 3) = d.justification;
      res.indicators(row, 4) = d.emotional_strength;
      res.indicators(row, 5) = d.drinking;
      res.indicators(row, 6) = d.minimization_of_harassment;
      res.indicators(row, 7) = d.physical_strength;
      res.indicators(row, 8) = d.emotional_toughness;
      res.indicators(row, 9) = dc.gap_chores.defined ? dc.gap_chores.value : nan;
      res.indicators(row, 10) = dc.gap_childcare.defined ? dc.gap_childcare.value : nan;
      ++row;
      res.respondents.push_back(std::move(d));
    }
  }
  return res;
}

SplitResult subgroup_split(const std::vector<double>& values) {
  if (values.empty()) fail(errc::invalid_argument, "subgroup_split: empty input");
  bool all_binary = true, constant = true;
  for (double v : values) {
    if (v != 0.0 && v != 1.0) all_binary = false;
    if (v != values.front()) constant = false;
  }
  if (constant) fail(errc::stage, "ConstantVariable: median split impossible");
  SplitResult r;
  if (all_binary) {
    r.boolean_passthrough = true;
    r.threshold = 0.5;
    for (double v : values) r.above.push_back(v == 1.0);
    return r;
  }
  r.threshold = median(values);
  for (double v : values) r.above.push_back(v > r.threshold);
  return r;
}

SplitResult subgroup_split_threshold(const std::vector<double>& values, double threshold) {
  SplitResult r;
  r.threshold = threshold;
  for (double v : values) r.above.push_back(v > threshold);
  return r;
}

}  // namespace tatdv
