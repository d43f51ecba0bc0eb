#pragma once

#include <array>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace tatdv {

enum class ActivityGroup { chores, childcare, leisure, other };

const char* to_string(ActivityGroup g);
ActivityGroup activity_group_from_string(const std::string& s);

// code -> group; every code appearing in diary data must be present.
struct Taxonomy {
  std::map<std::string, ActivityGroup> groups;

  bool contains(const std::string& code) const { return groups.count(code) != 0; }
  ActivityGroup group_of(const std::string& code) const;
};

enum class DayKind { weekday, weekend };

const char* to_string(DayKind k);

struct Slot {
  std::string primary;
  std::string secondary;  // empty when absent
  bool with_partner = false;
  bool with_children = false;
};

inline constexpr int kSlotsPerDay = 144;  // 24 h at 10-minute resolution

struct DiaryDay {
  std::string respondent_id;
  DayKind day_kind = DayKind::weekday;
  std::vector<Slot> slots;  // exactly kSlotsPerDay after validation
};

enum class Gender { female, male };
enum class VignetteArm { physical, psychological };

const char* to_string(Gender g);
const char* to_string(VignetteArm a);

struct SurveyResponse {
  std::string respondent_id;
  std::string couple_id;
  Gender gender = Gender::female;
  double education_years = 0.0;
  bool employed = false;
  VignetteArm vignette_arm = VignetteArm::physical;
  bool info_treated = false;
  std::optional<double> weight;
  std::map<std::string, double> items;  // item key -> score in [0,100]
};

// Item keys, grouped by questionnaire block. The defaults cover the four
// vignette items, five masculinity items, ten gender-norm statements and
// the single-purpose items; a config may rename any of them.
struct ItemRegistry {
  std::array<std::string, 4> vignette = {
      "vig_seriousness", "vig_victim_blaming",
      "vig_perpetrator_accountability", "vig_justification"};
  std::array<std::string, 5> masculinity = {
      "masc_physical_strength", "masc_emotional_strength",
      "masc_emotional_toughness", "masc_minimization_of_harassment",
      "masc_drinking"};
  std::array<std::string, 10> norms = {
      "norm_breadwinner",      "norm_homemaker",
      "norm_child_suffers",    "norm_family_life_suffers",
      "norm_job_independence", "norm_both_contribute",
      "norm_men_less_capable", "norm_career_women",
      "norm_men_priority_jobs", "norm_university_boys"};
  std::string parenthood = "parenthood_norms";
  std::string bargaining = "bargaining";  // binary: decides alone/jointly = 1
  std::string charity = "charity";
  std::string center_knowledge = "center_knowledge";
  std::string way_out = "way_out";

  std::vector<std::string> all() const;
  bool is_registered(const std::string& key) const;
  bool is_binary(const std::string& key) const { return key == bargaining; }
};

struct Member {
  SurveyResponse survey;
  DiaryDay weekday;
  DiaryDay weekend;
};

struct CoupleRecord {
  std::string couple_id;
  Member female;
  Member male;
};

struct Exclusion {
  std::string couple_id;
  std::vector<std::string> respondent_ids;
  std::string reason;  // not_two_members | same_gender | incomplete_diary | duplicate_diary
};

struct MatchResult {
  std::vector<CoupleRecord> couples;
  std::vector<Exclusion> exclusions;
  std::size_t excluded_respondents = 0;
};

}  // namespace tatdv
