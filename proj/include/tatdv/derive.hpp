#pragma once

#include <Eigen/Core>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "tatdv/types.hpp"

namespace tatdv {

using SlotFilter = std::function<bool(const Slot&)>;

// 5 x weekday hours + 2 x weekend hours, slots at 1/6 h each.
double weekly_hours(const DiaryDay& weekday, const DiaryDay& weekend, const SlotFilter& filter);

double domain_weekly_hours(const Member& m, const Taxonomy& tax, ActivityGroup group);
double leisure_with_partner(const Member& m, const Taxonomy& tax);
double leisure_with_partner_children(const Member& m, const Taxonomy& tax);

struct Ratio {
  double value = 0.0;
  bool defined = false;
};

// (female - male)/male weekly hours in a chores/childcare domain;
// undefined when male time is zero.
Ratio gender_gap(const CoupleRecord& c, const Taxonomy& tax, ActivityGroup domain);

// (female - male)/((female + male)/2) for a leisure scope; undefined when
// both reports are zero.
enum class LeisureScope { with_partner, with_partner_and_children };
Ratio couple_leisure_asymmetry(const CoupleRecord& c, const Taxonomy& tax, LeisureScope scope);

double gender_norms_index(const SurveyResponse& r, const ItemRegistry& reg);

struct DerivedRespondent {
  std::string respondent_id;
  std::string couple_id;
  Gender gender = Gender::female;
  double education_years = 0.0;
  bool employed = false;
  VignetteArm vignette_arm = VignetteArm::physical;
  bool info_treated = false;
  std::optional<double> weight;

  double seriousness = 0, victim_blaming = 0, perpetrator_accountability = 0, justification = 0;
  double physical_strength = 0, emotional_strength = 0, emotional_toughness = 0,
         minimization_of_harassment = 0, drinking = 0;
  double gender_norms_index = 0, parenthood_norms = 0;
  int bargaining_power = 0;
  double charity = 0, center_knowledge = 0, way_out = 0;
  double leisure_with_partner = 0, leisure_with_partner_children = 0;
};

struct DerivedCouple {
  std::string couple_id;
  Ratio gap_chores, gap_childcare;
  Ratio asymmetry_with_partner, asymmetry_with_partner_children;
};

// Row layout of the indicator matrix: one row per respondent (couple
// order, female first), columns in the measurement-model order below.
// Undefined gap indicators become NaN; downstream consumers drop those
// rows listwise.
const std::vector<std::string>& indicator_names();

struct DeriveResult {
  std::vector<DerivedRespondent> respondents;
  std::vector<DerivedCouple> couples;
  Eigen::MatrixXd indicators;
  std::size_t couples_with_undefined_gap = 0;
};

DeriveResult derive_dataset(const std::vector<CoupleRecord>& couples, const Taxonomy& tax,
                            const ItemRegistry& reg);

struct SplitResult {
  std::vector<bool> above;  // strict > sample median (or boolean passthrough)
  double threshold = 0.0;
  bool boolean_passthrough = false;
};

SplitResult subgroup_split(const std::vector<double>& values);
SplitResult subgroup_split_threshold(const std::vector<double>& values, double threshold);

}  // namespace tatdv
