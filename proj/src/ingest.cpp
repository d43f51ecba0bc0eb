#include "tatdv/ingest.hpp"

#include <algorithm>
#include <charconv>
#include <map>
#include <set>

#include "tatdv/csv.hpp"
#include "tatdv/error.hpp"

namespace tatdv {

namespace {

double parse_number(const std::string& s, const std::string& what) {
  double v = 0.0;
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || p != s.data() + s.size())
    fail(errc::io, "MalformedNumber: " + what + " = '" + s + "'");
  return v;
}

long parse_int(const std::string& s, const std::string& what) {
  long v = 0;
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || p != s.data() + s.size())
    fail(errc::io, "MalformedNumber: " + what + " = '" + s + "'");
  return v;
}

bool parse_bool01(const std::string& s, const std::string& what) {
  if (s == "0") return false;
  if (s == "1") return true;
  fail(errc::io, "MalformedBoolean: " + what + " = '" + s + "' (want 0 or 1)");
}

int required_column(const CsvTable& t, const std::string& name) {
  int c = t.column(name);
  if (c < 0) fail(errc::io, "MissingRequiredField: column '" + name + "'");
  return c;
}

}  // namespace

Taxonomy parse_taxonomy_csv(const std::string& content) {
  CsvTable t = parse_csv(content);
  int c_code = required_column(t, "code");
  int c_group = required_column(t, "group");
  Taxonomy tax;
  for (const auto& row : t.rows) {
    const std::string& code = row[c_code];
    if (code.empty()) fail(errc::io, "MissingRequiredField: empty activity code");
    if (tax.groups.count(code)) fail(errc::io, "DuplicateCode: " + code);
    tax.groups[code] = activity_group_from_string(row[c_group]);
  }
  return tax;
}

Taxonomy parse_taxonomy(const std::string& path) { return parse_taxonomy_csv(read_file(path)); }

std::vector<DiaryDay> parse_diary_csv(const std::string& content, const Taxonomy& taxonomy) {
  CsvTable t = parse_csv(content);
  int c_resp = required_column(t, "respondent_id");
  int c_kind = required_column(t, "day_kind");
  int c_slot = required_column(t, "slot_index");
  int c_prim = required_column(t, "primary_code");
  int c_sec = required_column(t, "secondary_code");
  int c_wp = required_column(t, "with_partner");
  int c_wc = required_column(t, "with_children");

  // Group rows by (respondent, kind), preserving first-appearance order.
  std::map<std::pair<std::string, std::string>, std::vector<const std::vector<std::string>*>>
      groups;
  std::vector<std::pair<std::string, std::string>> order;
  for (const auto& row : t.rows) {
    auto key = std::make_pair(row[c_resp], row[c_kind]);
    auto [it, inserted] = groups.try_emplace(key);
    if (inserted) order.push_back(key);
    it->second.push_back(&row);
  }

  std::vector<DiaryDay> days;
  days.reserve(order.size());
  for (const auto& key : order) {
    const auto& [resp, kind_s] = key;
    DiaryDay day;
    day.respondent_id = resp;
    if (kind_s == "weekday")
      day.day_kind = DayKind::weekday;
    else if (kind_s == "weekend")
      day.day_kind = DayKind::weekend;
    else
      fail(errc::io, "MalformedDayKind: '" + kind_s + "' for respondent " + resp);

    day.slots.assign(kSlotsPerDay, Slot{});
    std::vector<bool> seen(kSlotsPerDay, false);
    for (const auto* row : groups[key]) {
      long idx = parse_int((*row)[c_slot], "slot_index");
      if (idx < 0 || idx >= kSlotsPerDay)
        fail(errc::io, "MalformedRow: slot_index " + std::to_string(idx) + " out of 0..143");
      if (seen[idx])
        fail(errc::io, "DuplicateSlot: respondent " + resp + " " + kind_s + " slot " +
                           std::to_string(idx));
      seen[idx] = true;
      Slot& s = day.slots[idx];
      s.primary = (*row)[c_prim];
      if (s.primary.empty()) fail(errc::io, "MissingRequiredField: empty primary_code");
      taxonomy.group_of(s.primary);  // UnknownActivity on miss
      s.secondary = (*row)[c_sec];
      if (!s.secondary.empty()) taxonomy.group_of(s.secondary);
      s.with_partner = parse_bool01((*row)[c_wp], "with_partner");
      s.with_children = parse_bool01((*row)[c_wc], "with_children");
    }
    for (int i = 0; i < kSlotsPerDay; ++i)
      if (!seen[i])
        fail(errc::io, "MissingSlot: respondent " + resp + " " + kind_s + " lacks slot " +
                           std::to_string(i));
    days.push_back(std::move(day));
  }
  return days;
}

std::vector<DiaryDay> parse_diary(const std::string& path, const Taxonomy& taxonomy) {
  return parse_diary_csv(read_file(path), taxonomy);
}

std::vector<SurveyResponse> parse_survey_csv(const std::string& content,
                                             const ItemRegistry& registry) {
  CsvTable t = parse_csv(content);
  int c_resp = required_column(t, "respondent_id");
  int c_couple = required_column(t, "couple_id");
  int c_gender = required_column(t, "gender");
  int c_edu = required_column(t, "education_years");
  int c_emp = required_column(t, "employed");
  int c_arm = required_column(t, "vignette_arm");
  int c_info = required_column(t, "info_treated");
  int c_weight = required_column(t, "weight");

  static const std::set<std::string> fixed = {
      "respondent_id", "couple_id", "gender",       "education_years",
      "employed",      "vignette_arm", "info_treated", "weight"};
  std::vector<std::pair<int, std::string>> item_cols;
  for (std::size_t i = 0; i < t.header.size(); ++i) {
    if (fixed.count(t.header[i])) continue;
    if (!registry.is_registered(t.header[i]))
      fail(errc::io, "UnknownItem: column '" + t.header[i] + "'");
    item_cols.emplace_back(static_cast<int>(i), t.header[i]);
  }

  std::vector<SurveyResponse> out;
  out.reserve(t.rows.size());
  for (const auto& row : t.rows) {
    SurveyResponse r;
    r.respondent_id = row[c_resp];
    r.couple_id = row[c_couple];
    if (r.respondent_id.empty()) fail(errc::io, "MissingRequiredField: respondent_id");
    if (r.couple_id.empty()) fail(errc::io, "MissingRequiredField: couple_id");
    const std::string& g = row[c_gender];
    if (g == "female")
      r.gender = Gender::female;
    else if (g == "male")
      r.gender = Gender::male;
    else
      fail(errc::io, "MalformedGender: '" + g + "'");
    r.education_years = parse_number(row[c_edu], "education_years");
    if (r.education_years < 0) fail(errc::io, "MalformedNumber: negative education_years");
    r.employed = parse_bool01(row[c_emp], "employed");
    const std::string& arm = row[c_arm];
    if (arm == "physical")
      r.vignette_arm = VignetteArm::physical;
    else if (arm == "psychological")
      r.vignette_arm = VignetteArm::psychological;
    else
      fail(errc::io, "MalformedVignetteArm: '" + arm + "'");
    r.info_treated = parse_bool01(row[c_info], "info_treated");
    if (!row[c_weight].empty()) {
      double w = parse_number(row[c_weight], "weight");
      if (w <= 0) fail(errc::io, "MalformedNumber: weight must be positive");
      r.weight = w;
    }
    for (const auto& [col, key] : item_cols) {
      const std::string& cell = row[col];
      if (cell.empty())
        fail(errc::io, "MissingRequiredField: item '" + key + "' for respondent " +
                           r.respondent_id);
      double v = parse_number(cell, key);
      if (v < 0.0 || v > 100.0)
        fail(errc::io, "OutOfRangeScore: " + key + " = " + cell + " for respondent " +
                           r.respondent_id);
      if (registry.is_binary(key) && v != 0.0 && v != 1.0)
        fail(errc::io, "OutOfRangeScore: " + key + " must be 0 or 1, got " + cell);
      r.items[key] = v;
    }
    out.push_back(std::move(r));
  }
  return out;
}

std::vector<SurveyResponse> parse_survey(const std::string& path, const ItemRegistry& registry) {
  return parse_survey_csv(read_file(path), registry);
}

MatchResult match_couples(const std::vector<SurveyResponse>& surveys,
                          const std::vector<DiaryDay>& diaries) {
  struct DiarySet {
    const DiaryDay* weekday = nullptr;
    const DiaryDay* weekend = nullptr;
    bool duplicate = false;
  };
  std::map<std::string, DiarySet> by_resp;
  for (const auto& d : diaries) {
    auto& set = by_resp[d.respondent_id];
    const DiaryDay*& slot = d.day_kind == DayKind::weekday ? set.weekday : set.weekend;
    if (slot) set.duplicate = true;
    slot = &d;
  }

  std::map<std::string, std::vector<const SurveyResponse*>> by_couple;
  std::vector<std::string> couple_order;
  for (const auto& s : surveys) {
    auto [it, inserted] = by_couple.try_emplace(s.couple_id);
    if (inserted) couple_order.push_back(s.couple_id);
    it->second.push_back(&s);
  }

  MatchResult res;
  for (const auto& cid : couple_order) {
    const auto& members = by_couple[cid];
    std::vector<std::string> ids;
    for (const auto* m : members) ids.push_back(m->respondent_id);
    auto exclude = [&](const std::string& reason) {
      res.exclusions.push_back({cid, ids, reason});
      res.excluded_respondents += members.size();
    };
    if (members.size() != 2) {
      exclude("not_two_members");
      continue;
    }
    if (members[0]->gender == members[1]->gender) {
      exclude("same_gender");
      continue;
    }
    bool dup = false, incomplete = false;
    for (const auto* m : members) {
      auto it = by_resp.find(m->respondent_id);
      if (it == by_resp.end() || !it->second.weekday || !it->second.weekend)
        incomplete = true;
      else if (it->second.duplicate)
        dup = true;
    }
    if (dup) {
      exclude("duplicate_diary");
      continue;
    }
    if (incomplete) {
      exclude("incomplete_diary");
      continue;
    }
    CoupleRecord c;
    c.couple_id = cid;
    for (const auto* m : members) {
      Member mem;
      mem.survey = *m;
      mem.weekday = *by_resp[m->respondent_id].weekday;
      mem.weekend = *by_resp[m->respondent_id].weekend;
      (m->gender == Gender::female ? c.female : c.male) = std::move(mem);
    }
    res.couples.push_back(std::move(c));
  }
  return res;
}

}  // namespace tatdv
