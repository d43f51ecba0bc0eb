#pragma once

#include <string>
#include <vector>

#include "tatdv/types.hpp"

namespace tatdv {

Taxonomy parse_taxonomy(const std::string& path);
Taxonomy parse_taxonomy_csv(const std::string& content);

// One DiaryDay per (respondent_id, day_kind) group; each must cover slot
// indices 0..143 exactly once. Throws MissingSlot / DuplicateSlot /
// UnknownActivity / MalformedRow.
std::vector<DiaryDay> parse_diary(const std::string& path, const Taxonomy& taxonomy);
std::vector<DiaryDay> parse_diary_csv(const std::string& content, const Taxonomy& taxonomy);

// Column order is free; the eight fixed columns are required, every other
// column must be a registered item key. Throws OutOfRangeScore /
// UnknownItem / MissingRequiredField.
std::vector<SurveyResponse> parse_survey(const std::string& path, const ItemRegistry& registry);
std::vector<SurveyResponse> parse_survey_csv(const std::string& content,
                                             const ItemRegistry& registry);

// Groups surveys by couple_id and keeps couples with exactly one female
// and one male member, both holding one weekday and one weekend diary.
// Everything else lands in the exclusion report; never throws.
MatchResult match_couples(const std::vector<SurveyResponse>& surveys,
                          const std::vector<DiaryDay>& diaries);

}  // namespace tatdv
