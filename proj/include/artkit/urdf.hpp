#pragma once

#include <cctype>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "artkit/articulation.hpp"

namespace artkit::urdf {

using artic::ArticTree;
using artic::PartNode;
using artic::Vec3;

namespace detail {

inline std::string sanitize(const std::string& s) {
  std::string out;
  for (char c : s)
    out += (std::isalnum(static_cast<unsigned char>(c)) ? c : '_');
  return out.empty() ? std::string("part") : out;
}

inline std::string fmt(double v) {
  std::ostringstream os;
  os.precision(17);
  os << v;
  return os.str();
}

inline std::string xyz(const Vec3& v) {
  return fmt(v.x()) + " " + fmt(v.y()) + " " + fmt(v.z());
}

}  // namespace detail

// URDF 1.0 export. Link frames are chosen so the rest pose reproduces the
// global rest coordinates exactly:
//  - fixed joint: origin cancels the parent's rest offset, child offset 0
//  - revolute or prismatic: joint origin at the axis origin point o, child
//    visual shifted by -o
//  - mixed revolute+prismatic: split across an intermediate massless link,
//    revolute first, so the chain composes to
//    Translate(o) * Rot(d, r) * Translate(-o) * Translate(d * t).
// mesh_files are written relative to the URDF location.
inline std::string export_urdf(const ArticTree& tree,
                               const std::vector<std::string>& mesh_files,
                               const std::string& robot_name = "artkit_object") {
  if (mesh_files.size() != tree.nodes.size())
    throw std::invalid_argument("export_urdf: need one mesh path per node");

  std::vector<std::string> link_name(tree.nodes.size());
  for (size_t i = 0; i < tree.nodes.size(); ++i)
    link_name[i] = "link_" + std::to_string(i) + "_" +
                   detail::sanitize(tree.nodes[i].label);

  std::vector<Vec3> rest_offset(tree.nodes.size(), Vec3::Zero());
  std::ostringstream os;
  os << "<?xml version=\"1.0\"?>\n";
  os << "<robot name=\"" << detail::sanitize(robot_name) << "\">\n";

  auto emit_link = [&](const std::string& name, const std::string& mesh,
                       const Vec3& visual_origin) {
    os << "  <link name=\"" << name << "\">\n";
    if (!mesh.empty()) {
      os << "    <visual>\n";
      os << "      <origin xyz=\"" << detail::xyz(visual_origin)
         << "\" rpy=\"0 0 0\"/>\n";
      os << "      <geometry>\n";
      os << "        <mesh filename=\"" << mesh << "\"/>\n";
      os << "      </geometry>\n";
      os << "    </visual>\n";
    }
    os << "  </link>\n";
  };

  auto emit_joint = [&](const std::string& name, const std::string& type,
                        const std::string& parent, const std::string& child,
                        const Vec3& origin, const Vec3& axis, double lower,
                        double upper) {
    os << "  <joint name=\"" << name << "\" type=\"" << type << "\">\n";
    os << "    <origin xyz=\"" << detail::xyz(origin) << "\" rpy=\"0 0 0\"/>\n";
    os << "    <parent link=\"" << parent << "\"/>\n";
    os << "    <child link=\"" << child << "\"/>\n";
    if (type != "fixed") {
      os << "    <axis xyz=\"" << detail::xyz(axis) << "\"/>\n";
      os << "    <limit lower=\"" << detail::fmt(lower) << "\" upper=\""
         << detail::fmt(upper) << "\" effort=\"100\" velocity=\"1\"/>\n";
    }
    os << "  </joint>\n";
  };

  for (size_t i = 0; i < tree.nodes.size(); ++i) {
    const PartNode& n = tree.nodes[i];
    if (n.fa == artic::kNoParent) {
      emit_link(link_name[i], mesh_files[i], Vec3::Zero());
      rest_offset[i] = Vec3::Zero();
      continue;
    }
    const Vec3 off_p = rest_offset[size_t(n.fa)];
    const Vec3 o = n.axis_origin();
    const Vec3 d = n.axis_dir();
    const std::string joint_base = "joint_" + std::to_string(i);
    const bool rot = n.has_rotation();
    const bool trans = n.has_translation();

    if (!rot && !trans) {
      emit_link(link_name[i], mesh_files[i], Vec3::Zero());
      emit_joint(joint_base, "fixed", link_name[size_t(n.fa)], link_name[i],
                 -off_p, d, 0, 0);
      rest_offset[i] = Vec3::Zero();
    } else if (rot && !trans) {
      emit_link(link_name[i], mesh_files[i], -o);
      emit_joint(joint_base, "revolute", link_name[size_t(n.fa)], link_name[i],
                 o - off_p, d, n.r_min(), n.r_max());
      rest_offset[i] = o;
    } else if (!rot && trans) {
      emit_link(link_name[i], mesh_files[i], -o);
      emit_joint(joint_base, "prismatic", link_name[size_t(n.fa)],
                 link_name[i], o - off_p, d, n.t_min(), n.t_max());
      rest_offset[i] = o;
    } else {
      // Mixed joint: massless intermediate link carries the rotation.
      std::string mid = link_name[i] + "_pivot";
      emit_link(mid, "", Vec3::Zero());
      emit_joint(joint_base + "_r", "revolute", link_name[size_t(n.fa)], mid,
                 o - off_p, d, n.r_min(), n.r_max());
      emit_link(link_name[i], mesh_files[i], Vec3::Zero());
      emit_joint(joint_base + "_t", "prismatic", mid, link_name[i], -o, d,
                 n.t_min(), n.t_max());
      rest_offset[i] = Vec3::Zero();
    }
  }
  os << "</robot>\n";
  return os.str();
}

// ---------------------------------------------------------------------------
// Minimal XML reader and URDF structural validator, enough to check exports
// (and any hand-edited file) for schema-level mistakes.
// ---------------------------------------------------------------------------

struct XmlNode {
  std::string tag;
  std::map<std::string, std::string> attrs;
  std::vector<XmlNode> children;

  const XmlNode* first(const std::string& t) const {
    for (const auto& c : children)
      if (c.tag == t) return &c;
    return nullptr;
  }
  std::string attr(const std::string& k, const std::string& fallback = "") const {
    auto it = attrs.find(k);
    return it == attrs.end() ? fallback : it->second;
  }
};

// Parses elements, attributes and nesting. Text content, CDATA, entities and
// processing beyond the <?...?> prolog are out of scope.
inline XmlNode parse_xml(const std::string& text) {
  size_t i = 0;
  auto skip_ws = [&] {
    while (i < text.size() && std::isspace(static_cast<unsigned char>(text[i])))
      ++i;
  };
  auto error = [&](const std::string& msg) -> std::runtime_error {
    return std::runtime_error("parse_xml: " + msg + " at offset " +
                              std::to_string(i));
  };

  std::vector<XmlNode> stack;
  XmlNode root;
  bool have_root = false;
  while (i < text.size()) {
    skip_ws();
    if (i >= text.size()) break;
    if (text[i] != '<') {  // stray text; skip to next tag
      ++i;
      continue;
    }
    if (text.compare(i, 4, "<!--") == 0) {
      size_t end = text.find("-->", i);
      if (end == std::string::npos) throw error("unterminated comment");
      i = end + 3;
      continue;
    }
    if (text.compare(i, 2, "<?") == 0) {
      size_t end = text.find("?>", i);
      if (end == std::string::npos) throw error("unterminated prolog");
      i = end + 2;
      continue;
    }
    if (text.compare(i, 2, "</") == 0) {
      size_t end = text.find('>', i);
      if (end == std::string::npos) throw error("unterminated closing tag");
      std::string tag = text.substr(i + 2, end - i - 2);
      while (!tag.empty() && std::isspace(static_cast<unsigned char>(tag.back())))
        tag.pop_back();
      if (stack.empty()) throw error("closing tag </" + tag + "> with no open element");
      if (stack.back().tag != tag)
        throw error("mismatched closing tag </" + tag + ">, expected </" +
                    stack.back().tag + ">");
      XmlNode done = std::move(stack.back());
      stack.pop_back();
      if (stack.empty()) {
        root = std::move(done);
        have_root = true;
      } else {
        stack.back().children.push_back(std::move(done));
      }
      i = end + 1;
      continue;
    }
    // opening tag
    ++i;
    XmlNode node;
    while (i < text.size() && !std::isspace(static_cast<unsigned char>(text[i])) &&
           text[i] != '>' && text[i] != '/')
      node.tag += text[i++];
    if (node.tag.empty()) throw error("empty tag name");
    // attributes
    for (;;) {
      skip_ws();
      if (i >= text.size()) throw error("unterminated tag <" + node.tag + ">");
      if (text[i] == '>' || text[i] == '/') break;
      std::string key;
      while (i < text.size() && text[i] != '=' &&
             !std::isspace(static_cast<unsigned char>(text[i])))
        key += text[i++];
      skip_ws();
      if (i >= text.size() || text[i] != '=')
        throw error("attribute " + key + " missing '='");
      ++i;
      skip_ws();
      if (i >= text.size() || (text[i] != '"' && text[i] != '\''))
        throw error("attribute " + key + " missing quote");
      char quote = text[i++];
      std::string val;
      while (i < text.size() && text[i] != quote) val += text[i++];
      if (i >= text.size()) throw error("unterminated attribute " + key);
      ++i;
      node.attrs[key] = val;
    }
    if (text[i] == '/') {
      ++i;
      if (i >= text.size() || text[i] != '>') throw error("malformed self-closing tag");
      ++i;
      if (stack.empty()) {
        root = std::move(node);
        have_root = true;
      } else {
        stack.back().children.push_back(std::move(node));
      }
    } else {
      ++i;  // consume '>'
      stack.push_back(std::move(node));
    }
    if (have_root && stack.empty() && i < text.size()) {
      skip_ws();
      // allow trailing whitespace only
    }
  }
  if (!stack.empty())
    throw std::runtime_error("parse_xml: unclosed element <" +
                             stack.back().tag + ">");
  if (!have_root) throw std::runtime_error("parse_xml: no root element");
  return root;
}

// Structural URDF checks; empty result means the document is acceptable.
inline std::vector<std::string> validate_urdf(const std::string& xml_text) {
  std::vector<std::string> problems;
  XmlNode root;
  try {
    root = parse_xml(xml_text);
  } catch (const std::exception& e) {
    problems.push_back(e.what());
    return problems;
  }
  if (root.tag != "robot") {
    problems.push_back("root element is <" + root.tag + ">, expected <robot>");
    return problems;
  }
  if (root.attr("name").empty()) problems.push_back("<robot> missing name");

  std::set<std::string> links, joint_names;
  std::map<std::string, std::string> parent_of;  // child link -> joint
  for (const auto& c : root.children) {
    if (c.tag == "link") {
      std::string name = c.attr("name");
      if (name.empty()) problems.push_back("<link> missing name");
      if (!links.insert(name).second)
        problems.push_back("duplicate link name " + name);
      if (const XmlNode* vis = c.first("visual")) {
        if (const XmlNode* g = vis->first("geometry")) {
          if (const XmlNode* m = g->first("mesh")) {
            if (m->attr("filename").empty())
              problems.push_back("link " + name + " mesh missing filename");
          }
        } else {
          problems.push_back("link " + name + " visual missing geometry");
        }
      }
    }
  }
  int root_links = 0;
  for (const auto& c : root.children) {
    if (c.tag != "joint") continue;
    std::string name = c.attr("name");
    std::string type = c.attr("type");
    if (name.empty()) problems.push_back("<joint> missing name");
    if (!joint_names.insert(name).second)
      problems.push_back("duplicate joint name " + name);
    if (type != "fixed" && type != "revolute" && type != "prismatic" &&
        type != "continuous")
      problems.push_back("joint " + name + " has unknown type " + type);
    const XmlNode* parent = c.first("parent");
    const XmlNode* child = c.first("child");
    if (!parent || !links.count(parent->attr("link")))
      problems.push_back("joint " + name + " parent link missing or unknown");
    if (!child || !links.count(child->attr("link")))
      problems.push_back("joint " + name + " child link missing or unknown");
    if (child) {
      const std::string cl = child->attr("link");
      if (parent_of.count(cl))
        problems.push_back("link " + cl + " has two parent joints");
      parent_of[cl] = name;
    }
    if (type == "revolute" || type == "prismatic") {
      const XmlNode* axis = c.first("axis");
      if (!axis) {
        problems.push_back("joint " + name + " missing axis");
      } else {
        std::istringstream is(axis->attr("xyz"));
        double x = 0, y = 0, z = 0;
        is >> x >> y >> z;
        double norm = std::sqrt(x * x + y * y + z * z);
        if (!is || std::abs(norm - 1.0) > 1e-5)
          problems.push_back("joint " + name + " axis is not a unit vector");
      }
      const XmlNode* limit = c.first("limit");
      if (!limit) {
        problems.push_back("joint " + name + " missing limit");
      } else {
        double lower = std::stod(limit->attr("lower", "0"));
        double upper = std::stod(limit->attr("upper", "0"));
        if (lower > upper)
          problems.push_back("joint " + name + " limit lower > upper");
        if (limit->attr("effort").empty() || limit->attr("velocity").empty())
          problems.push_back("joint " + name + " limit missing effort/velocity");
      }
    }
  }
  for (const auto& l : links)
    if (!parent_of.count(l)) ++root_links;
  if (root_links != 1)
    problems.push_back("expected exactly one root link, found " +
                       std::to_string(root_links));
  return problems;
}

}  // namespace artkit::urdf
