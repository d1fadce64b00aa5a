// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace twin {

// IEC 61850-style grouping of related turbine parameters (WMET, WTUR, ...).
struct LogicalNode {
  std::string code;
  std::string description;
};

enum class ParamKind { continuous, status };

struct ParameterDef {
  std::string id;  // "<node>.<name>", unique
  std::string node;
  std::string unit;
  ParamKind kind = ParamKind::continuous;
  double lower_bound = 0.0;  // inclusive; continuous only
  double upper_bound = 0.0;
  bool forecastable = false;
  std::vector<int> codes;  // admissible codes; status only
};

// Dense index into Catalog::parameters(). Used on hot paths instead of ids.
using ParamIndex = std::size_t;

// The turbine's parameter universe. Immutable once built, so concurrent reads
// need no synchronisation.
class Catalog {
 public:
  // Parses the plain-text catalog table (see data/catalog.txt). Throws ParseError.
  static Catalog parse(std::string_view text);
  static Catalog load(const std::string& path);

  // The catalog shipped with the project, compiled in from data/catalog.txt.
  static const Catalog& builtin();

  std::string serialize() const;

  // Throws UnknownParameter.
  const ParameterDef& lookup(std::string_view id) const;
  ParamIndex index_of(std::string_view id) const;
  std::optional<ParamIndex> find(std::string_view id) const;
  const ParameterDef& at(ParamIndex index) const { return params_.at(index); }

  bool is_physical(std::string_view id, double value) const;
  bool is_physical(ParamIndex index, double value) const;

  // Default forecast subset in its documented order.
  const std::vector<std::string>& forecast_set() const { return forecast_set_; }

  // Replaces the forecast subset; every id must be a continuous parameter.
  Catalog with_forecast_set(std::vector<std::string> ids) const;

  std::span<const ParameterDef> parameters() const { return params_; }
  std::span<const LogicalNode> nodes() const { return nodes_; }
  std::size_t size() const { return params_.size(); }
  std::size_t count_in(std::string_view node) const;
  std::vector<std::string> ids_in(std::string_view node) const;

 private:
  std::vector<LogicalNode> nodes_;
  std::vector<ParameterDef> params_;
  std::unordered_map<std::string, ParamIndex> by_id_;
  std::vector<std::string> forecast_set_;
};

}  // namespace twin
