#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace symcor::datalog {

// Fixed-length fact mask: bits[i] says whether enumeration entry i is present.
using Bitstring = std::vector<uint8_t>;

std::string bits_to_string(const Bitstring& bits);
Bitstring bits_from_string(std::string_view text);

struct ProgramError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct ParseError : ProgramError {
  ParseError(const std::string& msg, int line, int column);
  int line;
  int column;
};

// Ground atom: relation id plus constant arguments.
struct Fact {
  uint32_t relation = 0;
  std::vector<uint32_t> args;
  auto operator<=>(const Fact&) const = default;
};

// Term of a rule atom: a chain  t0 ± t1 ± ... where each operand is a natural
// constant or a rule-local variable. Chains longer than one operand (built-in
// arithmetic) are restricted to rule heads; '-' saturates at 0 and the chain
// folds left to right.
struct Term {
  struct Operand {
    bool is_var = false;
    uint32_t value = 0;  // constant value, or variable id when is_var
  };
  std::vector<Operand> operands;
  std::vector<int8_t> signs;  // signs[i] joins operands[i] and operands[i+1]

  bool is_constant() const { return operands.size() == 1 && !operands[0].is_var; }
  bool is_variable() const { return operands.size() == 1 && operands[0].is_var; }
  bool is_arithmetic() const { return operands.size() > 1; }
};

struct RuleAtom {
  uint32_t relation = 0;
  std::vector<Term> terms;
};

struct Rule {
  RuleAtom head;
  std::vector<RuleAtom> body;         // nonempty
  std::vector<std::string> var_names; // rule-local variable ids index this
};

struct Relation {
  std::string name;
  uint32_t arity = 0;
  bool is_input = false;
  bool is_output = false;
};

struct ParseOptions {
  // Constants live in [0, constant_bound); derived facts with an argument
  // outside the universe are discarded, which keeps head arithmetic finite.
  uint32_t constant_bound = 64;
};

// A parsed, validated Datalog program together with its ordered input/output
// fact enumerations. Immutable; evaluation is pure and thread-safe.
class Program {
 public:
  size_t n_inputs() const { return input_enum_.size(); }
  size_t n_outputs() const { return output_enum_.size(); }
  const std::vector<Fact>& input_enum() const { return input_enum_; }
  const std::vector<Fact>& output_enum() const { return output_enum_; }
  const std::vector<Relation>& relations() const { return relations_; }
  const std::vector<Rule>& rules() const { return rules_; }
  const std::vector<Fact>& base_facts() const { return base_facts_; }
  uint32_t constant_bound() const { return constant_bound_; }

  // Bit j of the result: is output_enum[j] in the least fixed point reachable
  // from the enabled input facts? Facts outside the output enumeration are
  // derived but dropped.
  Bitstring evaluate(const Bitstring& input) const;

  // Every derivable fact (inputs, base facts and consequences), unordered.
  std::vector<Fact> consequences(const Bitstring& input) const;

  std::string atom_text(const Fact& fact) const;
  uint64_t digest() const { return digest_; }

 private:
  friend class Parser;

  std::vector<Relation> relations_;
  std::vector<Rule> rules_;
  std::vector<Fact> base_facts_;
  std::vector<Fact> input_enum_;
  std::vector<Fact> output_enum_;
  uint32_t constant_bound_ = 64;
  uint64_t digest_ = 0;
};

Program parse_program(std::string_view source, const ParseOptions& opts = {});
Program parse_program_file(const std::string& path, const ParseOptions& opts = {});

}  // namespace symcor::datalog
