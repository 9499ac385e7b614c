#include "evoimpute/pipeline.hpp"

#include "evoimpute/classifiers.hpp"

#include <algorithm>
#include <charconv>

namespace evoimpute {

std::string_view role_name(Role role) {
  switch (role) {
    case Role::Imputer: return "imputer";
    case Role::Transform: return "transform";
    case Role::Classifier: return "classifier";
  }
  return "?";
}

std::string format_terminal(const TerminalValue& v) {
  return std::visit(
      [](const auto& x) -> std::string {
        using T = std::decay_t<decltype(x)>;
        if constexpr (std::is_same_v<T, bool>) {
          return x ? "true" : "false";
        } else if constexpr (std::is_same_v<T, std::int64_t>) {
          return std::to_string(x);
        } else if constexpr (std::is_same_v<T, double>) {
          return format_real(x);
        } else {
          return x;
        }
      },
      v);
}

Grammar::Grammar(std::vector<PrimitiveSpec> primitives) : primitives_(std::move(primitives)) {
  for (std::size_t i = 0; i < primitives_.size(); ++i) {
    const PrimitiveSpec& p = primitives_[i];
    if (p.name.empty() || p.name == kInputMatrix) throw DataError("grammar: invalid primitive name '" + p.name + "'");
    if (!by_name_.emplace(p.name, i).second) throw DataError("grammar: duplicate primitive '" + p.name + "'");
    bool typed = (p.role == Role::Imputer && p.input == MatrixType::RawMatrix && p.output == MatrixType::CompleteMatrix) ||
                 (p.role == Role::Transform && p.input == MatrixType::CompleteMatrix &&
                  p.output == MatrixType::CompleteMatrix) ||
                 (p.role == Role::Classifier && p.input == MatrixType::CompleteMatrix &&
                  p.output == MatrixType::Classification);
    if (!typed) throw DataError("grammar: primitive '" + p.name + "' has types inconsistent with its role");
    for (const TerminalDomain& d : p.terminals) {
      if (d.values.empty()) throw DataError("grammar: empty domain for " + p.name + "__" + d.name);
      for (const auto& v : d.values) {
        if (v.index() != d.values.front().index()) {
          throw DataError("grammar: mixed value types in domain " + p.name + "__" + d.name);
        }
      }
    }
    roles_[static_cast<int>(p.role)].push_back(i);
  }
}

const PrimitiveSpec* Grammar::find(std::string_view name) const {
  auto it = by_name_.find(std::string(name));
  return it == by_name_.end() ? nullptr : &primitives_[it->second];
}

const PrimitiveSpec& Grammar::at(std::string_view name) const {
  const PrimitiveSpec* p = find(name);
  if (!p) throw DataError("unknown primitive '" + std::string(name) + "'");
  return *p;
}

const std::vector<std::size_t>& Grammar::of_role(Role role) const { return roles_[static_cast<int>(role)]; }

namespace {

void print_node(const PipelineTree& tree, std::size_t i, std::string& out) {
  const OperatorNode& node = tree.nodes[i];
  out += '[';
  out += node.primitive;
  out += ", ";
  if (i + 1 < tree.nodes.size()) {
    print_node(tree, i + 1, out);
  } else {
    out += kInputMatrix;
  }
  for (const auto& t : node.terminals) {
    out += ", ";
    out += format_terminal(t);
  }
  out += ']';
}

class Parser {
 public:
  Parser(std::string_view text, const Grammar& grammar) : text_(text), grammar_(grammar) {}

  PipelineTree parse() {
    PipelineTree tree;
    parse_list(tree);
    skip_space();
    if (pos_ != text_.size()) fail("trailing characters");
    // parse_list appends nodes leaf-last already
    return tree;
  }

 private:
  [[noreturn]] void fail(const std::string& what) const {
    throw DataError("pipeline parse error at offset " + std::to_string(pos_) + ": " + what);
  }

  void skip_space() {
    while (pos_ < text_.size() && (text_[pos_] == ' ' || text_[pos_] == '\t' || text_[pos_] == '\n' || text_[pos_] == '\r')) {
      ++pos_;
    }
  }

  void expect(char c) {
    skip_space();
    if (pos_ >= text_.size() || text_[pos_] != c) fail(std::string("expected '") + c + "'");
    ++pos_;
  }

  bool peek(char c) {
    skip_space();
    return pos_ < text_.size() && text_[pos_] == c;
  }

  std::string atom() {
    skip_space();
    std::size_t start = pos_;
    while (pos_ < text_.size() && text_[pos_] != ',' && text_[pos_] != '[' && text_[pos_] != ']') ++pos_;
    std::string_view raw = text_.substr(start, pos_ - start);
    while (!raw.empty() && (raw.back() == ' ' || raw.back() == '\t' || raw.back() == '\n' || raw.back() == '\r')) {
      raw.remove_suffix(1);
    }
    if (raw.size() >= 2 && (raw.front() == '\'' || raw.front() == '"' || raw.front() == '`') &&
        (raw.back() == '\'' || raw.back() == '"' || raw.back() == '`')) {
      raw = raw.substr(1, raw.size() - 2);
    }
    if (raw.empty()) fail("empty token");
    return std::string(raw);
  }

  TerminalValue terminal(const TerminalDomain& domain) {
    std::string tok = atom();
    const TerminalValue& like = domain.values.front();
    if (std::holds_alternative<bool>(like)) {
      if (tok == "true" || tok == "True") return true;
      if (tok == "false" || tok == "False") return false;
      fail("expected a boolean for '" + domain.name + "', got '" + tok + "'");
    }
    if (std::holds_alternative<std::int64_t>(like)) {
      std::int64_t v = 0;
      auto [p, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
      if (ec != std::errc{} || p != tok.data() + tok.size()) fail("expected an integer for '" + domain.name + "'");
      return v;
    }
    if (std::holds_alternative<double>(like)) {
      double v = 0;
      auto [p, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
      if (ec != std::errc{} || p != tok.data() + tok.size()) fail("expected a number for '" + domain.name + "'");
      return v;
    }
    return tok;
  }

  void parse_list(PipelineTree& tree) {
    expect('[');
    std::string name = atom();
    const PrimitiveSpec* spec = grammar_.find(name);
    if (!spec) {
      if (auto kind = classifier_from_name(name)) spec = grammar_.find(classifier_name(*kind));
    }
    if (!spec) fail("unknown primitive '" + name + "'");
    std::size_t index = tree.nodes.size();
    tree.nodes.push_back(OperatorNode{spec->name, {}});
    expect(',');
    if (peek('[')) {
      parse_list(tree);
    } else {
      std::string input = atom();
      if (input != kInputMatrix) fail("expected '" + std::string(kInputMatrix) + "', got '" + input + "'");
    }
    std::vector<TerminalValue> terms;
    for (const TerminalDomain& d : spec->terminals) {
      expect(',');
      terms.push_back(terminal(d));
    }
    if (!peek(']')) fail("too many arguments for '" + name + "'");
    expect(']');
    tree.nodes[index].terminals = std::move(terms);
  }

  std::string_view text_;
  const Grammar& grammar_;
  std::size_t pos_ = 0;
};

}  // namespace

std::string to_string(const PipelineTree& tree) {
  if (tree.nodes.empty()) return kInputMatrix.data();
  std::string out;
  print_node(tree, 0, out);
  return out;
}

PipelineTree parse_pipeline(std::string_view text, const Grammar& grammar) { return Parser(text, grammar).parse(); }

std::optional<std::string> validation_error(const PipelineTree& tree, const Grammar& grammar, Completeness data_tag,
                                            std::size_t max_len) {
  if (tree.nodes.empty()) return "empty pipeline";
  if (tree.size() > max_len) return "pipeline has " + std::to_string(tree.size()) + " operators, limit " + std::to_string(max_len);
  std::vector<const PrimitiveSpec*> specs;
  for (const OperatorNode& node : tree.nodes) {
    const PrimitiveSpec* s = grammar.find(node.primitive);
    if (!s) return "unknown primitive '" + node.primitive + "'";
    specs.push_back(s);
  }
  if (specs[0]->role != Role::Classifier) return "root is not a classifier";
  for (std::size_t i = 1; i < specs.size(); ++i) {
    if (specs[i]->role == Role::Classifier) return "classifier below the root";
  }
  for (std::size_t i = 0; i + 1 < specs.size(); ++i) {
    if (specs[i]->input != specs[i + 1]->output) {
      return "type mismatch between '" + specs[i]->name + "' and '" + specs[i + 1]->name + "'";
    }
  }
  MatrixType source = data_tag == Completeness::Complete ? MatrixType::CompleteMatrix : MatrixType::RawMatrix;
  if (specs.back()->input != source) {
    return data_tag == Completeness::Complete ? "imputer used on complete data" : "no imputer adjacent to input_matrix";
  }
  for (std::size_t i = 0; i < specs.size(); ++i) {
    const auto& terms = tree.nodes[i].terminals;
    const auto& domains = specs[i]->terminals;
    if (terms.size() != domains.size()) return "wrong terminal count for '" + specs[i]->name + "'";
    for (std::size_t t = 0; t < terms.size(); ++t) {
      if (std::find(domains[t].values.begin(), domains[t].values.end(), terms[t]) == domains[t].values.end()) {
        return "terminal " + specs[i]->name + "__" + domains[t].name + "=" + format_terminal(terms[t]) +
               " outside its domain";
      }
    }
  }
  return std::nullopt;
}

std::optional<std::string> imputer_of(const PipelineTree& tree, const Grammar& grammar) {
  for (const OperatorNode& node : tree.nodes) {
    const PrimitiveSpec* s = grammar.find(node.primitive);
    if (s && s->role == Role::Imputer) return node.primitive;
  }
  return std::nullopt;
}

std::string classifier_of(const PipelineTree& tree) { return tree.nodes.empty() ? std::string() : tree.nodes.front().primitive; }

}  // namespace evoimpute
