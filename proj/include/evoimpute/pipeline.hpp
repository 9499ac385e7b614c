#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <variant>
#include <vector>

#include "evoimpute/data_matrix.hpp"

namespace evoimpute {

enum class MatrixType { RawMatrix, CompleteMatrix, Classification };
enum class Role { Imputer, Transform, Classifier };

std::string_view role_name(Role role);

using TerminalValue = std::variant<bool, std::int64_t, double, std::string>;

std::string format_terminal(const TerminalValue& v);

struct TerminalDomain {
  std::string name;
  std::vector<TerminalValue> values;  // all of the same alternative
};

struct PrimitiveSpec {
  std::string name;
  Role role = Role::Classifier;
  MatrixType input = MatrixType::CompleteMatrix;
  MatrixType output = MatrixType::Classification;
  std::vector<TerminalDomain> terminals;
};

/// The set of operators the search may combine. Construction checks that
/// every primitive's types agree with its role:
///   Imputer: Raw -> Complete, Transform: Complete -> Complete,
///   Classifier: Complete -> Classification.
class Grammar {
 public:
  explicit Grammar(std::vector<PrimitiveSpec> primitives);

  const PrimitiveSpec* find(std::string_view name) const;
  const PrimitiveSpec& at(std::string_view name) const;
  const std::vector<PrimitiveSpec>& primitives() const { return primitives_; }
  /// Indices into primitives() with the given role, in declaration order.
  const std::vector<std::size_t>& of_role(Role role) const;

 private:
  std::vector<PrimitiveSpec> primitives_;
  std::unordered_map<std::string, std::size_t> by_name_;
  std::vector<std::size_t> roles_[3];
};

struct OperatorNode {
  std::string primitive;
  std::vector<TerminalValue> terminals;

  friend bool operator==(const OperatorNode&, const OperatorNode&) = default;
};

/// A pipeline individual. Every operator has exactly one matrix input, so
/// the tree is stored as its spine: nodes[0] is the root classifier, each
/// following node feeds the previous one, and the last node reads
/// `input_matrix`. Terminals hang off each node in declaration order.
struct PipelineTree {
  std::vector<OperatorNode> nodes;

  /// Operator-node count (the size objective).
  std::size_t size() const { return nodes.size(); }

  friend bool operator==(const PipelineTree&, const PipelineTree&) = default;
};

inline constexpr std::string_view kInputMatrix = "input_matrix";

/// Bracketed list-of-lists form, e.g.
/// `[MultinomialNB, [MaxAbsScaler, [MFImputer, input_matrix], true], 1, true]`.
std::string to_string(const PipelineTree& tree);

/// Inverse of to_string. Terminal tokens are read according to the
/// grammar's domain types; quotes (', ", `) around atoms are ignored and
/// long classifier aliases such as KNeighborsClassifier are accepted.
/// Throws DataError on syntax errors, unknown primitives or arity mismatch.
PipelineTree parse_pipeline(std::string_view text, const Grammar& grammar);

/// Empty when `tree` satisfies every structural invariant for data with the
/// given completeness; otherwise a description of the first violation.
std::optional<std::string> validation_error(const PipelineTree& tree, const Grammar& grammar, Completeness data_tag,
                                            std::size_t max_len);

std::optional<std::string> imputer_of(const PipelineTree& tree, const Grammar& grammar);
std::string classifier_of(const PipelineTree& tree);

}  // namespace evoimpute
