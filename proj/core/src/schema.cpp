#include "searchgym/schema.hpp"

#include <algorithm>
#include <cctype>
#include <map>
#include <set>

#include <nlohmann/json.hpp>

namespace searchgym {

using ordered_json = nlohmann::ordered_json;

std::string_view to_string(AttributeStatus s) {
  return s == AttributeStatus::Compulsory ? "Compulsory" : "Optional";
}

std::string_view to_string(AttributeKind k) {
  return k == AttributeKind::Entity ? "Entity" : "NonEntity";
}

std::string_view to_string(Cardinality c) {
  switch (c) {
    case Cardinality::OneToOne: return "1-1";
    case Cardinality::OneToMany: return "1-n";
    case Cardinality::ManyToOne: return "n-1";
  }
  return "n-1";
}

std::string_view to_string(DomainType d) {
  switch (d) {
    case DomainType::Int: return "int";
    case DomainType::Year: return "year";
    case DomainType::Name: return "name";
  }
  return "int";
}

std::int64_t ValueDomain::min_or_default() const {
  if (min) return *min;
  return type == DomainType::Year ? 1940 : 1;
}

std::int64_t ValueDomain::max_or_default() const {
  if (max) return *max;
  return type == DomainType::Year ? 2005 : 1000;
}

namespace {

std::string underscores_to_spaces(std::string_view s) {
  std::string out(s);
  std::replace(out.begin(), out.end(), '_', ' ');
  return out;
}

}  // namespace

std::string AttributeSpec::phrase_or_default() const {
  return phrase ? *phrase : underscores_to_spaces(name);
}

std::string AttributeSpec::label_or_default() const {
  return label ? *label : underscores_to_spaces(name);
}

std::string AttributeSpec::unit_or_empty() const {
  return domain && domain->unit ? *domain->unit : std::string{};
}

const AttributeSpec* EntityTypeSpec::find(std::string_view attribute) const {
  for (const auto& a : attributes) {
    if (a.name == attribute) return &a;
  }
  return nullptr;
}

std::string EntityTypeSpec::noun_or_default() const {
  return noun ? *noun : to_lower_ascii(type_name);
}

const EntityTypeSpec* WorldSchema::find(std::string_view type_name) const {
  for (const auto& t : entity_types) {
    if (t.type_name == type_name) return &t;
  }
  return nullptr;
}

const AttributeSpec* WorldSchema::attribute(std::string_view type_name,
                                            std::string_view attribute) const {
  const auto* t = find(type_name);
  return t ? t->find(attribute) : nullptr;
}

// ---------------------------------------------------------------------------
// Parsing

namespace {

std::pair<std::size_t, std::size_t> line_column(std::string_view text, std::size_t byte) {
  std::size_t line = 1;
  std::size_t column = 1;
  for (std::size_t i = 0; i < byte && i < text.size(); ++i) {
    if (text[i] == '\n') {
      ++line;
      column = 1;
    } else {
      ++column;
    }
  }
  return {line, column};
}

[[noreturn]] void fail(const std::string& code, const std::string& where, const std::string& what) {
  throw SchemaParseError(code, where + ": " + what);
}

const ordered_json& require(const ordered_json& obj, const char* key, const std::string& where) {
  auto it = obj.find(key);
  if (it == obj.end()) fail("MISSING_FIELD", where, std::string("missing \"") + key + "\"");
  return *it;
}

std::string require_string(const ordered_json& obj, const char* key, const std::string& where) {
  const auto& v = require(obj, key, where);
  if (!v.is_string()) fail("BAD_FIELD", where, std::string("\"") + key + "\" must be a string");
  return v.get<std::string>();
}

std::optional<std::string> optional_string(const ordered_json& obj, const char* key,
                                           const std::string& where) {
  auto it = obj.find(key);
  if (it == obj.end() || it->is_null()) return std::nullopt;
  if (!it->is_string()) fail("BAD_FIELD", where, std::string("\"") + key + "\" must be a string");
  return it->get<std::string>();
}

std::optional<std::int64_t> optional_int(const ordered_json& obj, const char* key,
                                         const std::string& where) {
  auto it = obj.find(key);
  if (it == obj.end() || it->is_null()) return std::nullopt;
  if (!it->is_number_integer()) {
    fail("BAD_FIELD", where, std::string("\"") + key + "\" must be an integer");
  }
  return it->get<std::int64_t>();
}

ValueDomain parse_domain(const ordered_json& j, const std::string& where) {
  if (!j.is_object()) fail("BAD_FIELD", where, "\"domain\" must be an object");
  ValueDomain d;
  const auto type = require_string(j, "type", where + ".domain");
  if (type == "int") {
    d.type = DomainType::Int;
  } else if (type == "year") {
    d.type = DomainType::Year;
  } else if (type == "name") {
    d.type = DomainType::Name;
  } else {
    fail("UNKNOWN_ENUM", where + ".domain.type", "unknown domain type \"" + type + "\"");
  }
  d.min = optional_int(j, "min", where + ".domain");
  d.max = optional_int(j, "max", where + ".domain");
  d.unit = optional_string(j, "unit", where + ".domain");
  return d;
}

AttributeSpec parse_attribute(const ordered_json& j, const std::string& type_where) {
  if (!j.is_object()) fail("BAD_FIELD", type_where, "attribute must be an object");
  AttributeSpec a;
  a.name = require_string(j, "name", type_where);
  const std::string where = type_where + "." + a.name;

  const auto status = require_string(j, "status", where);
  if (status == "Compulsory") {
    a.status = AttributeStatus::Compulsory;
  } else if (status == "Optional") {
    a.status = AttributeStatus::Optional;
  } else {
    fail("UNKNOWN_ENUM", where + ".status", "unknown status \"" + status + "\"");
  }

  const auto kind = require_string(j, "kind", where);
  if (kind == "Entity") {
    a.kind = AttributeKind::Entity;
  } else if (kind == "NonEntity") {
    a.kind = AttributeKind::NonEntity;
  } else {
    fail("UNKNOWN_ENUM", where + ".kind", "unknown kind \"" + kind + "\"");
  }

  const auto card = require_string(j, "cardinality", where);
  if (card == "1-1") {
    a.cardinality = Cardinality::OneToOne;
  } else if (card == "1-n") {
    a.cardinality = Cardinality::OneToMany;
  } else if (card == "n-1") {
    a.cardinality = Cardinality::ManyToOne;
  } else {
    fail("UNKNOWN_ENUM", where + ".cardinality", "unknown cardinality \"" + card + "\"");
  }

  a.target_type = optional_string(j, "target_type", where);
  if (auto it = j.find("symmetric"); it != j.end() && !it->is_null()) {
    if (!it->is_boolean()) fail("BAD_FIELD", where, "\"symmetric\" must be a boolean");
    a.symmetric = it->get<bool>();
  }
  if (auto it = j.find("domain"); it != j.end() && !it->is_null()) {
    a.domain = parse_domain(*it, where);
  }
  if (auto it = j.find("presence"); it != j.end() && !it->is_null()) {
    if (!it->is_number()) fail("BAD_FIELD", where, "\"presence\" must be a number");
    a.presence = it->get<double>();
  }
  if (auto v = optional_int(j, "max_fan_in", where)) a.max_fan_in = static_cast<int>(*v);
  a.inverse_of = optional_string(j, "inverse_of", where);
  a.phrase = optional_string(j, "phrase", where);
  a.role = optional_string(j, "role", where);
  a.label = optional_string(j, "label", where);
  return a;
}

}  // namespace

WorldSchema parse_schema(std::string_view text) {
  ordered_json doc;
  try {
    doc = ordered_json::parse(text.begin(), text.end());
  } catch (const nlohmann::json::parse_error& e) {
    const auto [line, column] = line_column(text, e.byte == 0 ? 0 : e.byte - 1);
    throw SchemaParseError("SYNTAX_ERROR",
                           "schema syntax error at line " + std::to_string(line) + ", column " +
                               std::to_string(column) + ": " + e.what(),
                           line, column);
  }
  if (!doc.is_object()) fail("BAD_FIELD", "schema", "top level must be an object");

  WorldSchema schema;
  schema.version = require_string(doc, "version", "schema");
  const auto& types = require(doc, "entity_types", "schema");
  if (!types.is_array()) fail("BAD_FIELD", "schema", "\"entity_types\" must be an array");

  std::set<std::string> seen_types;
  for (const auto& tj : types) {
    if (!tj.is_object()) fail("BAD_FIELD", "schema.entity_types", "entries must be objects");
    EntityTypeSpec t;
    t.type_name = require_string(tj, "type_name", "schema.entity_types");
    if (!seen_types.insert(t.type_name).second) {
      fail("DUPLICATE_NAME", t.type_name, "duplicate entity type");
    }
    t.noun = optional_string(tj, "noun", t.type_name);
    const auto& attrs = require(tj, "attributes", t.type_name);
    if (!attrs.is_array()) fail("BAD_FIELD", t.type_name, "\"attributes\" must be an array");
    std::set<std::string> seen_attrs;
    for (const auto& aj : attrs) {
      auto a = parse_attribute(aj, t.type_name);
      if (!seen_attrs.insert(a.name).second) {
        fail("DUPLICATE_NAME", t.type_name + "." + a.name, "duplicate attribute");
      }
      t.attributes.push_back(std::move(a));
    }
    schema.entity_types.push_back(std::move(t));
  }
  return schema;
}

std::string serialize_schema(const WorldSchema& schema) {
  ordered_json doc;
  doc["version"] = schema.version;
  doc["entity_types"] = ordered_json::array();
  for (const auto& t : schema.entity_types) {
    ordered_json tj;
    tj["type_name"] = t.type_name;
    if (t.noun) tj["noun"] = *t.noun;
    tj["attributes"] = ordered_json::array();
    for (const auto& a : t.attributes) {
      ordered_json aj;
      aj["name"] = a.name;
      aj["status"] = to_string(a.status);
      aj["kind"] = to_string(a.kind);
      if (a.target_type) aj["target_type"] = *a.target_type;
      aj["cardinality"] = to_string(a.cardinality);
      if (a.symmetric) aj["symmetric"] = *a.symmetric;
      if (a.domain) {
        ordered_json dj;
        dj["type"] = to_string(a.domain->type);
        if (a.domain->min) dj["min"] = *a.domain->min;
        if (a.domain->max) dj["max"] = *a.domain->max;
        if (a.domain->unit) dj["unit"] = *a.domain->unit;
        aj["domain"] = std::move(dj);
      }
      if (a.presence) aj["presence"] = *a.presence;
      if (a.max_fan_in) aj["max_fan_in"] = *a.max_fan_in;
      if (a.inverse_of) aj["inverse_of"] = *a.inverse_of;
      if (a.phrase) aj["phrase"] = *a.phrase;
      if (a.role) aj["role"] = *a.role;
      if (a.label) aj["label"] = *a.label;
      tj["attributes"].push_back(std::move(aj));
    }
    doc["entity_types"].push_back(std::move(tj));
  }
  return doc.dump(2);
}

// ---------------------------------------------------------------------------
// Validation

std::vector<Violation> validate_schema(const WorldSchema& schema) {
  std::vector<Violation> out;
  auto report = [&out](std::string code, std::string path, std::string message) {
    out.push_back({std::move(code), std::move(path), std::move(message)});
  };

  std::map<std::string, int> type_counts;
  for (const auto& t : schema.entity_types) ++type_counts[t.type_name];
  for (const auto& [name, count] : type_counts) {
    if (name.empty()) report("EMPTY_NAME", "entity_types", "entity type with empty name");
    if (count > 1) report("DUP_TYPE", name, "entity type declared " + std::to_string(count) + " times");
  }

  for (const auto& t : schema.entity_types) {
    std::map<std::string, int> attr_counts;
    for (const auto& a : t.attributes) ++attr_counts[a.name];
    for (const auto& [name, count] : attr_counts) {
      if (count > 1) {
        report("DUP_ATTR", t.type_name + "." + name,
               "attribute declared " + std::to_string(count) + " times");
      }
    }

    for (const auto& a : t.attributes) {
      const std::string path = t.type_name + "." + a.name;
      if (a.name.empty()) report("EMPTY_NAME", path, "attribute with empty name");

      if (a.is_symmetric() &&
          !(a.kind == AttributeKind::Entity && a.cardinality == Cardinality::OneToOne)) {
        report("SYMMETRY_CARDINALITY", path, "symmetric requires an Entity 1-1 attribute");
      }

      if (a.kind == AttributeKind::Entity) {
        if (!a.target_type) {
          report("MISSING_TARGET", path, "Entity attribute without target_type");
        } else if (schema.find(*a.target_type) == nullptr) {
          report("DANGLING_TARGET", path, "target type \"" + *a.target_type + "\" is not declared");
        } else if (a.is_symmetric() && *a.target_type != t.type_name) {
          report("SYMMETRY_TARGET", path, "symmetric relation must target its own type");
        }
        if (a.domain) report("UNEXPECTED_DOMAIN", path, "Entity attribute carries a value domain");
        if (a.cardinality == Cardinality::OneToMany) {
          const AttributeSpec* inv = nullptr;
          if (a.inverse_of && a.target_type) inv = schema.attribute(*a.target_type, *a.inverse_of);
          if (!a.inverse_of) {
            report("INVERSE_REQUIRED", path, "1-n relation must name the n-1 attribute it views");
          } else if (a.target_type && schema.find(*a.target_type) != nullptr &&
                     (inv == nullptr || inv->cardinality != Cardinality::ManyToOne ||
                      inv->target_type != t.type_name)) {
            report("BAD_INVERSE", path,
                   "inverse_of must name an n-1 attribute of the target type pointing back here");
          }
        }
        if (a.max_fan_in && *a.max_fan_in <= 0) {
          report("BAD_FAN_IN", path, "max_fan_in must be positive");
        }
      } else {
        if (!a.domain) {
          report("MISSING_DOMAIN", path, "NonEntity attribute without value domain");
        } else if (a.domain->type != DomainType::Name &&
                   a.domain->min_or_default() > a.domain->max_or_default()) {
          report("BAD_DOMAIN_RANGE", path, "domain min exceeds max");
        }
        if (a.target_type) report("UNEXPECTED_TARGET", path, "NonEntity attribute has target_type");
      }

      if (a.presence && (*a.presence < 0.0 || *a.presence > 1.0)) {
        report("BAD_PRESENCE", path, "presence must lie in [0, 1]");
      }
    }
  }

  std::sort(out.begin(), out.end());
  return out;
}

}  // namespace searchgym
