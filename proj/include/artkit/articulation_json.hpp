#pragma once

#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "artkit/articulation.hpp"
#include "artkit/geometry/analytic_sdf.hpp"

namespace artkit::artic {

// Interchange record: the tree plus optional per-part geometry sources
// (analytic recipe for corpus parts, latent z for generated ones) and the
// text conditions the object was built or generated with.
struct ArticObject {
  ArticTree tree;
  std::vector<std::optional<geom::PartSdf>> part_sdfs;  // parallel to nodes
  std::string category;
  std::vector<std::string> texts;
  bool truncated = false;
  uint64_t seed = 0;

  void resize_sdfs() { part_sdfs.resize(tree.nodes.size()); }
};

inline constexpr const char* kFormatTag = "artic/1";

namespace detail {

inline nlohmann::json sdf_to_json(const geom::PartSdf& sdf) {
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& p : sdf.prims) {
    nlohmann::json jp;
    jp["kind"] = geom::SdfPrim::kind_name(p.kind);
    jp["center"] = {p.center.x(), p.center.y(), p.center.z()};
    jp["half"] = {p.half.x(), p.half.y(), p.half.z()};
    if (p.kind == geom::SdfPrim::Kind::kRoundedBox) jp["round"] = p.round;
    if (p.kind == geom::SdfPrim::Kind::kCylinder) jp["axis"] = p.axis;
    arr.push_back(jp);
  }
  return arr;
}

inline geom::PartSdf sdf_from_json(const nlohmann::json& arr,
                                   const std::string& where) {
  geom::PartSdf sdf;
  if (!arr.is_array())
    throw std::invalid_argument(where + ".sdf: expected an array");
  for (size_t k = 0; k < arr.size(); ++k) {
    const auto& jp = arr[k];
    geom::SdfPrim p;
    p.kind = geom::SdfPrim::kind_from_name(jp.at("kind").get<std::string>());
    auto c = jp.at("center");
    auto h = jp.at("half");
    if (c.size() != 3 || h.size() != 3)
      throw std::invalid_argument(where + ".sdf[" + std::to_string(k) +
                                  "]: center/half must have 3 numbers");
    p.center = geom::Vec3(c[0].get<double>(), c[1].get<double>(),
                          c[2].get<double>());
    p.half = geom::Vec3(h[0].get<double>(), h[1].get<double>(),
                        h[2].get<double>());
    p.round = jp.value("round", 0.0);
    p.axis = jp.value("axis", 1);
    sdf.prims.push_back(p);
  }
  return sdf;
}

template <size_t N>
std::array<double, N> fixed_array(const nlohmann::json& j,
                                  const std::string& where) {
  if (!j.is_array() || j.size() != N)
    throw std::invalid_argument(where + ": expected " + std::to_string(N) +
                                " numbers");
  std::array<double, N> out{};
  for (size_t i = 0; i < N; ++i) {
    if (!j[i].is_number())
      throw std::invalid_argument(where + "[" + std::to_string(i) +
                                  "]: expected a number");
    out[i] = j[i].get<double>();
  }
  return out;
}

}  // namespace detail

inline nlohmann::json tree_to_json(const ArticTree& tree) {
  nlohmann::json out;
  out["format"] = kFormatTag;
  nlohmann::json nodes = nlohmann::json::array();
  for (const auto& n : tree.nodes) {
    nlohmann::json jn;
    jn["fa"] = n.fa;
    jn["label"] = n.label;
    jn["b"] = n.b;
    jn["j"] = n.j;
    jn["l"] = n.l;
    if (!n.z.empty()) jn["z"] = n.z;
    nodes.push_back(jn);
  }
  out["nodes"] = nodes;
  return out;
}

inline nlohmann::json object_to_json(const ArticObject& obj) {
  nlohmann::json out = tree_to_json(obj.tree);
  if (!obj.category.empty()) out["category"] = obj.category;
  if (!obj.texts.empty()) out["texts"] = obj.texts;
  if (obj.truncated) out["truncated"] = true;
  out["seed"] = obj.seed;
  bool any_sdf = false;
  for (const auto& s : obj.part_sdfs) any_sdf |= s.has_value();
  if (any_sdf) {
    for (size_t i = 0; i < obj.part_sdfs.size(); ++i)
      if (obj.part_sdfs[i])
        out["nodes"][i]["sdf"] = detail::sdf_to_json(*obj.part_sdfs[i]);
  }
  return out;
}

inline std::string to_json_text(const ArticTree& tree) {
  return tree_to_json(tree).dump(2);
}

inline std::string to_json_text(const ArticObject& obj) {
  return object_to_json(obj).dump(2);
}

inline ArticObject object_from_json(const nlohmann::json& j) {
  if (!j.is_object() || !j.contains("format"))
    throw std::invalid_argument("object_from_json: missing \"format\" field");
  if (j.at("format").get<std::string>() != kFormatTag)
    throw std::invalid_argument("object_from_json: unsupported format \"" +
                                j.at("format").get<std::string>() + "\"");
  if (!j.contains("nodes") || !j.at("nodes").is_array())
    throw std::invalid_argument("object_from_json: missing \"nodes\" array");

  ArticObject obj;
  const auto& nodes = j.at("nodes");
  obj.part_sdfs.resize(nodes.size());
  for (size_t i = 0; i < nodes.size(); ++i) {
    const std::string where = "nodes[" + std::to_string(i) + "]";
    const auto& jn = nodes[i];
    PartNode n;
    if (!jn.contains("fa") || !jn.at("fa").is_number_integer())
      throw std::invalid_argument(where + ".fa: expected an integer");
    n.fa = jn.at("fa").get<int>();
    n.label = jn.value("label", std::string());
    n.b = detail::fixed_array<6>(jn.at("b"), where + ".b");
    n.j = detail::fixed_array<6>(jn.at("j"), where + ".j");
    n.l = detail::fixed_array<4>(jn.at("l"), where + ".l");
    if (jn.contains("z")) n.z = jn.at("z").get<std::vector<double>>();
    if (jn.contains("sdf"))
      obj.part_sdfs[i] = detail::sdf_from_json(jn.at("sdf"), where);
    obj.tree.nodes.push_back(std::move(n));
  }
  obj.category = j.value("category", std::string());
  if (j.contains("texts")) obj.texts = j.at("texts").get<std::vector<std::string>>();
  obj.truncated = j.value("truncated", false);
  obj.seed = j.value("seed", uint64_t(0));
  return obj;
}

inline ArticObject object_from_json_text(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw std::invalid_argument(std::string("object_from_json: ") + e.what());
  }
  return object_from_json(j);
}

inline ArticTree tree_from_json_text(const std::string& text) {
  return object_from_json_text(text).tree;
}

}  // namespace artkit::artic
