#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "searchgym/common.hpp"

namespace searchgym {

enum class AttributeStatus { Compulsory, Optional };
enum class AttributeKind { NonEntity, Entity };
enum class Cardinality { OneToOne, OneToMany, ManyToOne };
enum class DomainType { Int, Year, Name };

std::string_view to_string(AttributeStatus s);
std::string_view to_string(AttributeKind k);
std::string_view to_string(Cardinality c);  // "1-1", "1-n", "n-1"
std::string_view to_string(DomainType d);

/// Value domain of a literal attribute. Missing bounds fall back to
/// per-type defaults (years 1940-2005, integers 1-1000).
struct ValueDomain {
  DomainType type = DomainType::Int;
  std::optional<std::int64_t> min;
  std::optional<std::int64_t> max;
  std::optional<std::string> unit;

  std::int64_t min_or_default() const;
  std::int64_t max_or_default() const;

  friend bool operator==(const ValueDomain&, const ValueDomain&) = default;
};

struct AttributeSpec {
  std::string name;
  AttributeStatus status = AttributeStatus::Compulsory;
  AttributeKind kind = AttributeKind::NonEntity;
  std::optional<std::string> target_type;
  Cardinality cardinality = Cardinality::ManyToOne;
  std::optional<bool> symmetric;
  std::optional<ValueDomain> domain;

  // Generation knobs.
  std::optional<double> presence;     // Optional attributes only; default 0.5
  std::optional<int> max_fan_in;      // n-1 relations: cap on sources per target
  std::optional<std::string> inverse_of;  // 1-n relations: the n-1 attribute they view

  // Surface forms used by documents, queries and questions.
  std::optional<std::string> phrase;  // "X <phrase> Y", e.g. "graduated from"
  std::optional<std::string> role;    // "the <role> of X", e.g. "spouse"
  std::optional<std::string> label;   // noun phrase for literals, e.g. "birth year"

  bool is_entity() const { return kind == AttributeKind::Entity; }
  bool is_symmetric() const { return symmetric.value_or(false); }
  bool is_compulsory() const { return status == AttributeStatus::Compulsory; }
  double presence_or_default() const { return presence.value_or(0.5); }
  std::string phrase_or_default() const;
  std::string label_or_default() const;
  std::string unit_or_empty() const;

  friend bool operator==(const AttributeSpec&, const AttributeSpec&) = default;
};

struct EntityTypeSpec {
  std::string type_name;
  std::optional<std::string> noun;  // lowercase common noun, default: lowercased type name
  std::vector<AttributeSpec> attributes;

  const AttributeSpec* find(std::string_view attribute) const;
  std::string noun_or_default() const;

  friend bool operator==(const EntityTypeSpec&, const EntityTypeSpec&) = default;
};

struct WorldSchema {
  std::string version;
  std::vector<EntityTypeSpec> entity_types;

  const EntityTypeSpec* find(std::string_view type_name) const;
  const AttributeSpec* attribute(std::string_view type_name, std::string_view attribute) const;

  friend bool operator==(const WorldSchema&, const WorldSchema&) = default;
};

/// Thrown by parse_schema. `line`/`column` are 1-based; 0 when the error is
/// structural rather than lexical.
class SchemaParseError : public Error {
 public:
  SchemaParseError(std::string code, const std::string& message, std::size_t line = 0,
                   std::size_t column = 0)
      : Error(std::move(code), message), line_(line), column_(column) {}

  std::size_t line() const noexcept { return line_; }
  std::size_t column() const noexcept { return column_; }

 private:
  std::size_t line_;
  std::size_t column_;
};

/// Parse the JSON schema document. Rejects syntax errors (SYNTAX_ERROR),
/// missing or mistyped fields (MISSING_FIELD, BAD_FIELD), unknown enum
/// literals (UNKNOWN_ENUM) and duplicate type or attribute names
/// (DUPLICATE_NAME). Semantic checks are left to validate_schema.
WorldSchema parse_schema(std::string_view text);

/// Canonical JSON text; parse_schema(serialize_schema(s)) == s.
std::string serialize_schema(const WorldSchema& schema);

/// Sorted list of invariant breaches; empty iff the schema is usable.
std::vector<Violation> validate_schema(const WorldSchema& schema);

/// The bundled six-type world (Person, City, Country, Company, University,
/// Museum).
const WorldSchema& bundled_schema();
std::string_view bundled_schema_text();

}  // namespace searchgym
