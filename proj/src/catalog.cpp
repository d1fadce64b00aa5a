// SPDX-License-Identifier: Apache-2.0

#include "twin/catalog.hpp"

#include <algorithm>
#include <map>
#include <sstream>

#include "twin/errors.hpp"
#include "twin/text.hpp"

namespace twin {

// Generated from data/catalog.txt at configure time.
extern const char* const kBuiltinCatalogText;

namespace {

std::string at_line(std::size_t lineno, const std::string& msg) {
  return "catalog line " + std::to_string(lineno) + ": " + msg;
}

}  // namespace

Catalog Catalog::parse(std::string_view text) {
  Catalog cat;
  std::map<int, std::string> forecast_slots;
  std::size_t lineno = 0;
  for (auto raw : split(text, '\n')) {
    ++lineno;
    auto line = raw;
    if (auto hash = line.find('#'); hash != std::string_view::npos) line = trim(line.substr(0, hash));
    if (line.empty()) continue;
    auto cols = split_ws(line);
    if (cols[0] == "node") {
      if (cols.size() < 2) throw ParseError(at_line(lineno, "node row needs a code"));
      LogicalNode node{std::string(cols[1]), {}};
      auto rest = trim(line.substr(cols[1].data() + cols[1].size() - line.data()));
      node.description = std::string(rest);
      for (const auto& n : cat.nodes_) {
        if (n.code == node.code) throw ParseError(at_line(lineno, "duplicate node " + node.code));
      }
      cat.nodes_.push_back(std::move(node));
    } else if (cols[0] == "param") {
      if (cols.size() != 9) throw ParseError(at_line(lineno, "param row needs 8 columns"));
      ParameterDef def;
      def.id = std::string(cols[1]);
      def.node = std::string(cols[2]);
      def.unit = std::string(cols[3]);
      if (cols[4] == "continuous") {
        def.kind = ParamKind::continuous;
        def.lower_bound = parse_double(cols[5]);
        def.upper_bound = parse_double(cols[6]);
        if (!(def.lower_bound < def.upper_bound)) {
          throw ParseError(at_line(lineno, def.id + ": lower bound must be below upper bound"));
        }
        if (cols[8] != "-") throw ParseError(at_line(lineno, def.id + ": continuous rows take no codes"));
      } else if (cols[4] == "status") {
        def.kind = ParamKind::status;
        if (cols[8] == "-") throw ParseError(at_line(lineno, def.id + ": status rows need codes"));
        for (auto c : split(cols[8], ',')) def.codes.push_back(static_cast<int>(parse_int(c)));
        std::sort(def.codes.begin(), def.codes.end());
        def.lower_bound = def.codes.front();
        def.upper_bound = def.codes.back();
      } else {
        throw ParseError(at_line(lineno, "unknown kind '" + std::string(cols[4]) + "'"));
      }
      if (cols[7] != "-") {
        if (def.kind != ParamKind::continuous) {
          throw ParseError(at_line(lineno, def.id + ": only continuous parameters are forecastable"));
        }
        int slot = static_cast<int>(parse_int(cols[7]));
        if (!forecast_slots.emplace(slot, def.id).second) {
          throw ParseError(at_line(lineno, "forecast slot " + std::to_string(slot) + " used twice"));
        }
        def.forecastable = true;
      }
      auto node_it = std::find_if(cat.nodes_.begin(), cat.nodes_.end(),
                                  [&](const LogicalNode& n) { return n.code == def.node; });
      if (node_it == cat.nodes_.end()) throw ParseError(at_line(lineno, "undeclared node " + def.node));
      if (def.id.rfind(def.node + ".", 0) != 0) {
        throw ParseError(at_line(lineno, def.id + ": id must start with its node code"));
      }
      if (!cat.by_id_.emplace(def.id, cat.params_.size()).second) {
        throw ParseError(at_line(lineno, "duplicate parameter " + def.id));
      }
      cat.params_.push_back(std::move(def));
    } else {
      throw ParseError(at_line(lineno, "unknown row type '" + std::string(cols[0]) + "'"));
    }
  }
  int expected = 1;
  for (auto& [slot, id] : forecast_slots) {
    if (slot != expected++) throw ParseError("forecast slots must be numbered 1..N without gaps");
    cat.forecast_set_.push_back(id);
  }
  return cat;
}

Catalog Catalog::load(const std::string& path) { return parse(read_file(path)); }

const Catalog& Catalog::builtin() {
  static const Catalog cat = parse(kBuiltinCatalogText);
  return cat;
}

std::string Catalog::serialize() const {
  std::ostringstream out;
  out << "# twin parameter catalog, format v1\n";
  for (const auto& n : nodes_) out << "node " << n.code << ' ' << n.description << '\n';
  for (const auto& p : params_) {
    out << "param " << p.id << ' ' << p.node << ' ' << p.unit << ' ';
    if (p.kind == ParamKind::continuous) {
      out << "continuous " << format_double(p.lower_bound) << ' ' << format_double(p.upper_bound);
    } else {
      out << "status - -";
    }
    auto slot = std::find(forecast_set_.begin(), forecast_set_.end(), p.id);
    if (slot != forecast_set_.end()) {
      out << ' ' << (slot - forecast_set_.begin() + 1);
    } else {
      out << " -";
    }
    if (p.kind == ParamKind::status) {
      out << ' ';
      for (std::size_t i = 0; i < p.codes.size(); ++i) out << (i ? "," : "") << p.codes[i];
      out << '\n';
    } else {
      out << " -\n";
    }
  }
  return out.str();
}

std::optional<ParamIndex> Catalog::find(std::string_view id) const {
  auto it = by_id_.find(std::string(id));
  if (it == by_id_.end()) return std::nullopt;
  return it->second;
}

ParamIndex Catalog::index_of(std::string_view id) const {
  auto idx = find(id);
  if (!idx) throw UnknownParameter(std::string(id));
  return *idx;
}

const ParameterDef& Catalog::lookup(std::string_view id) const { return params_[index_of(id)]; }

bool Catalog::is_physical(std::string_view id, double value) const {
  return is_physical(index_of(id), value);
}

bool Catalog::is_physical(ParamIndex index, double value) const {
  const auto& p = params_.at(index);
  if (p.kind == ParamKind::status) {
    if (!(value >= p.lower_bound && value <= p.upper_bound)) return false;
    if (value != static_cast<double>(static_cast<int>(value))) return false;
    return std::binary_search(p.codes.begin(), p.codes.end(), static_cast<int>(value));
  }
  return value >= p.lower_bound && value <= p.upper_bound;
}

Catalog Catalog::with_forecast_set(std::vector<std::string> ids) const {
  Catalog copy = *this;
  for (auto& p : copy.params_) p.forecastable = false;
  for (const auto& id : ids) {
    auto& p = copy.params_[index_of(id)];
    if (p.kind != ParamKind::continuous) throw ConfigError(id + " is not a continuous parameter");
    if (p.forecastable) throw ConfigError(id + " listed twice in forecast set");
    p.forecastable = true;
  }
  copy.forecast_set_ = std::move(ids);
  return copy;
}

std::size_t Catalog::count_in(std::string_view node) const {
  return static_cast<std::size_t>(
      std::count_if(params_.begin(), params_.end(), [&](const ParameterDef& p) { return p.node == node; }));
}

std::vector<std::string> Catalog::ids_in(std::string_view node) const {
  std::vector<std::string> out;
  for (const auto& p : params_) {
    if (p.node == node) out.push_back(p.id);
  }
  return out;
}

}  // namespace twin
