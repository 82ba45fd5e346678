#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "json.hpp"
#include "salesopt/bandit.hpp"
#include "salesopt/domain.hpp"
#include "salesopt/evalharness.hpp"
#include "salesopt/forecast.hpp"
#include "salesopt/optimizer.hpp"
#include "salesopt/uplift.hpp"

namespace salesopt {

using Json = nlohmann::json;

// Field names follow the C++ member names. Enums are written with to_string().

void to_json(Json& j, const Account& v);
void from_json(const Json& j, Account& v);
void to_json(Json& j, const Rep& v);
void from_json(const Json& j, Rep& v);
void to_json(Json& j, const ScoredAccount& v);
void from_json(const Json& j, ScoredAccount& v);
void to_json(Json& j, const AssignmentMatrix& v);
void from_json(const Json& j, AssignmentMatrix& v);
void to_json(Json& j, const Recommendation& v);
void from_json(const Json& j, Recommendation& v);
void to_json(Json& j, const FeedbackEvent& v);
/// `reward` may be omitted; it is derived from `feedback` and checked when present.
void from_json(const Json& j, FeedbackEvent& v);
void to_json(Json& j, const AlertHistory& v);
void from_json(const Json& j, AlertHistory& v);
void to_json(Json& j, const BanditContext& v);
void from_json(const Json& j, BanditContext& v);
void to_json(Json& j, const PanelObservation& v);
void from_json(const Json& j, PanelObservation& v);

void to_json(Json& j, const BaseRegressor& v);
void to_json(Json& j, const PropensityModel& v);
void to_json(Json& j, const UpliftModel& v);
void to_json(Json& j, const Forecaster& v);
void to_json(Json& j, const DecileRow& v);
void to_json(Json& j, const MatchedPair& v);
void to_json(Json& j, const TraceRow& v);
void to_json(Json& j, const DidResult& v);
void to_json(Json& j, const CemResult& v);
void to_json(Json& j, const PlaceboResult& v);
void to_json(Json& j, const PrecisionMetrics& v);
void to_json(Json& j, const VariantReport& v);
void to_json(Json& j, const AblationReport& v);

Json policy_to_json(const BanditPolicy& p);

/// One compact JSON value per line.
void write_jsonl(const std::filesystem::path& path, const std::vector<Json>& records);
std::vector<Json> read_jsonl(const std::filesystem::path& path);

template <typename T>
std::vector<Json> to_records(const std::vector<T>& items) {
  std::vector<Json> out;
  out.reserve(items.size());
  for (const auto& i : items) out.emplace_back(i);
  return out;
}

}  // namespace salesopt
