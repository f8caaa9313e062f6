#pragma once

// Strict YAML field access shared by the synth spec and manifest parsers.
// Every failure names the field path and the source line.

#include <yaml-cpp/yaml.h>

#include <initializer_list>
#include <set>
#include <string>

#include "gazetrait/error.hpp"

namespace gazetrait::yaml {

class Reader {
 public:
  Reader(ErrorCode code, std::string source) : code_(code), source_(std::move(source)) {}

  [[noreturn]] void fail(const YAML::Node& node, const std::string& path,
                         const std::string& what) const {
    std::string where = source_;
    if (node.IsDefined() && node.Mark().line >= 0) {
      where += ":" + std::to_string(node.Mark().line + 1);
    }
    throw Error(code_, where + ": field '" + path + "': " + what);
  }

  void require_map(const YAML::Node& node, const std::string& path) const {
    if (!node.IsMap()) fail(node, path, "expected a mapping");
  }

  /// Rejects keys outside `allowed`.
  void check_keys(const YAML::Node& node, const std::string& path,
                  std::initializer_list<const char*> allowed) const {
    require_map(node, path);
    const std::set<std::string> ok(allowed.begin(), allowed.end());
    for (const auto& kv : node) {
      const auto k = kv.first.as<std::string>();
      if (!ok.count(k)) fail(kv.first, join(path, k), "unknown field");
    }
  }

  template <typename T>
  T get(const YAML::Node& parent, const std::string& path, const char* key, T fallback) const {
    const YAML::Node node = parent[key];
    if (!node.IsDefined() || node.IsNull()) return fallback;
    return convert<T>(node, join(path, key));
  }

  template <typename T>
  T require(const YAML::Node& parent, const std::string& path, const char* key) const {
    const YAML::Node node = parent[key];
    if (!node.IsDefined() || node.IsNull()) fail(parent, join(path, key), "missing required field");
    return convert<T>(node, join(path, key));
  }

  template <typename T>
  T convert(const YAML::Node& node, const std::string& path) const {
    if (!node.IsScalar()) fail(node, path, "expected a scalar");
    try {
      return node.as<T>();
    } catch (const YAML::Exception&) {
      fail(node, path, "cannot interpret '" + node.Scalar() + "'");
    }
  }

  static std::string join(const std::string& path, const std::string& key) {
    return path.empty() ? key : path + "." + key;
  }

 private:
  ErrorCode code_;
  std::string source_;
};

inline YAML::Node parse(const std::string& text, ErrorCode code, const std::string& source) {
  try {
    return YAML::Load(text);
  } catch (const YAML::ParserException& e) {
    throw Error(code, source + ":" + std::to_string(e.mark.line + 1) + ": " + e.msg);
  }
}

}  // namespace gazetrait::yaml
