#pragma once

#include <cstdint>
#include <optional>
#include <string>

#include <json.hpp>

#include "dance/aggregation.hpp"
#include "dance/dnct.hpp"
#include "dance/estimation.hpp"
#include "dance/sem.hpp"
#include "dance/study.hpp"

namespace dance {

using Json = nlohmann::ordered_json;

Json to_json(const TetradResult& r);
Json to_json(const FindNcReport& report);
Json to_json(const AteEstimate& est);
Json to_json(const AggregateResult& agg);
Json to_json(const GraphSpec& spec);
Json to_json(const PairFrequencyTable& table);

/// Throws InvalidGraph on malformed input (including invariant violations).
GraphSpec graph_spec_from_json(const Json& j);

struct BuiltinSelector {
  std::string name;
  Strength strength = Strength::Weak;
  Family family = Family::Gaussian;
};

/// Simulation manifest: the graph, realized coefficients, true ATE and the
/// trek-oracle DNCTs.
Json simulation_manifest(const SemModel& model, std::size_t n, std::uint64_t seed,
                         const std::optional<BuiltinSelector>& builtin);

StudyConfig study_config_from_json(const Json& j);

/// Pretty-printed with a trailing newline.
std::string dump(const Json& j);

}  // namespace dance
