#pragma once

// JSON forms shared by transcripts and the wire protocol.

#include <json.hpp>

#include "regalloc/env.hpp"
#include "regalloc/generator.hpp"

namespace regalloc {

using Json = nlohmann::json;

void to_json(Json& j, const LiveRange& r);
void from_json(const Json& j, LiveRange& r);
void to_json(Json& j, const NodeInfo& n);
void from_json(const Json& j, NodeInfo& n);
void to_json(Json& j, const Observation& o);
void from_json(const Json& j, Observation& o);
void to_json(Json& j, const GraphUpdate& u);
void from_json(const Json& j, GraphUpdate& u);
void to_json(Json& j, const StepInfo& s);
void from_json(const Json& j, StepInfo& s);
void to_json(Json& j, const EnvConfig& c);
void from_json(const Json& j, EnvConfig& c);
void to_json(Json& j, const GenParams& p);
void from_json(const Json& j, GenParams& p);

Agent parse_agent(std::string_view s);
Phase parse_phase(std::string_view s);
Annotation parse_annotation(std::string_view s);

}  // namespace regalloc
