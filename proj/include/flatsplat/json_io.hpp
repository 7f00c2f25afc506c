#pragma once

// JSON conversions shared by the dataset and checkpoint formats. Doubles are
// written in shortest round-trip form, so load(save(x)) is exact.

#include <filesystem>
#include <string>

#include <nlohmann/json.hpp>

#include "flatsplat/errors.hpp"

#include "flatsplat/anchors.hpp"
#include "flatsplat/classifier.hpp"
#include "flatsplat/dataset.hpp"
#include "flatsplat/observation.hpp"
#include "flatsplat/scene.hpp"

namespace flatsplat {

using nlohmann::json;

json to_json(const Vec2& v);
Vec2 vec2_from_json(const json& j);
json to_json(const Color& c);
Color color_from_json(const json& j);

json to_json(const GaussianPrimitive& g);
GaussianPrimitive primitive_from_json(const json& j);
json to_json(const CameraPose& c);
CameraPose camera_from_json(const json& j);
json to_json(const ViewRecord& v);
ViewRecord view_from_json(const json& j);
json to_json(const SceneConfig& c);
SceneConfig scene_config_from_json(const json& j);
json to_json(const ObservationStats& s);
ObservationStats stats_from_json(const json& j);
json to_json(const ThresholdAnchors& a);
ThresholdAnchors anchors_from_json(const json& j);
json to_json(const Mlp& mlp);
Mlp mlp_from_json(const json& j);

// Reads and parses; IoError when unreadable, SchemaError when malformed or
// when schema_version differs from kSchemaVersion.
json read_document(const std::filesystem::path& path, const std::string& kind);
json parse_document(const std::string& text, const std::string& kind);

// Writes via a temporary file and rename, so readers never see a partial file.
void write_text_atomic(const std::filesystem::path& path, const std::string& text);

// Runs fn and rethrows json access errors as SchemaError.
template <typename Fn>
auto with_schema_errors(Fn&& fn) -> decltype(fn()) {
  try {
    return fn();
  } catch (const json::exception& e) {
    throw SchemaError(std::string("malformed document: ") + e.what());
  }
}

}  // namespace flatsplat
