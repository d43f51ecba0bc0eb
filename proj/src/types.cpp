#include "tatdv/types.hpp"

#include "tatdv/error.hpp"

namespace tatdv {

const char* to_string(ActivityGroup g) {
  switch (g) {
    case ActivityGroup::chores: return "chores";
    case ActivityGroup::childcare: return "childcare";
    case ActivityGroup::leisure: return "leisure";
    case ActivityGroup::other: return "other";
  }
  return "other";
}

ActivityGroup activity_group_from_string(const std::string& s) {
  if (s == "chores") return ActivityGroup::chores;
  if (s == "childcare") return ActivityGroup::childcare;
  if (s == "leisure") return ActivityGroup::leisure;
  if (s == "other") return ActivityGroup::other;
  fail(errc::io, "UnknownGroup: " + s);
}

ActivityGroup Taxonomy::group_of(const std::string& code) const {
  auto it = groups.find(code);
  if (it == groups.end()) fail(errc::io, "UnknownActivity: " + code);
  return it->second;
}

const char* to_string(DayKind k) { return k == DayKind::weekday ? "weekday" : "weekend"; }
const char* to_string(Gender g) { return g == Gender::female ? "female" : "male"; }
const char* to_string(VignetteArm a) {
  return a == VignetteArm::physical ? "physical" : "psychological";
}

std::vector<std::string> ItemRegistry::all() const {
  std::vector<std::string> keys;
  keys.insert(keys.end(), vignette.begin(), vignette.end());
  keys.insert(keys.end(), masculinity.begin(), masculinity.end());
  keys.insert(keys.end(), norms.begin(), norms.end());
  keys.push_back(parenthood);
  keys.push_back(bargaining);
  keys.push_back(charity);
  keys.push_back(center_knowledge);
  keys.push_back(way_out);
  return keys;
}

bool ItemRegistry::is_registered(const std::string& key) const {
  for (const auto& k : all())
    if (k == key) return true;
  return false;
}

}  // namespace tatdv
