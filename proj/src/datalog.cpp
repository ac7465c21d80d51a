#include "symcor/datalog.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <functional>
#include <map>
#include <set>
#include <sstream>
#include <unordered_map>

#include "symcor/digest.hpp"

namespace symcor::datalog {

std::string bits_to_string(const Bitstring& bits) {
  std::string out;
  out.reserve(bits.size());
  for (uint8_t b : bits) out.push_back(b ? '1' : '0');
  return out;
}

Bitstring bits_from_string(std::string_view text) {
  Bitstring out;
  out.reserve(text.size());
  for (char c : text) {
    if (c != '0' && c != '1') throw ProgramError("bitstring must contain only 0/1 characters");
    out.push_back(c == '1' ? 1 : 0);
  }
  return out;
}

ParseError::ParseError(const std::string& msg, int line, int column)
    : ProgramError("line " + std::to_string(line) + ":" + std::to_string(column) + ": " + msg),
      line(line),
      column(column) {}

namespace {

// ---------------------------------------------------------------------------
// Tokenizer

enum class Tok { Ident, Number, LParen, RParen, Comma, Dot, Semi, Colon, Slash, Plus, Minus, Arrow, End };

struct Token {
  Tok kind;
  std::string text;
  uint32_t number = 0;
  int line = 1;
  int column = 1;
};

class Lexer {
 public:
  explicit Lexer(std::string_view src) : src_(src) {}

  Token next() {
    skip_ws();
    Token t;
    t.line = line_;
    t.column = column_;
    if (pos_ >= src_.size()) {
      t.kind = Tok::End;
      return t;
    }
    char c = src_[pos_];
    if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
      size_t start = pos_;
      while (pos_ < src_.size() &&
             (std::isalnum(static_cast<unsigned char>(src_[pos_])) || src_[pos_] == '_'))
        advance();
      t.kind = Tok::Ident;
      t.text = std::string(src_.substr(start, pos_ - start));
      return t;
    }
    if (std::isdigit(static_cast<unsigned char>(c))) {
      uint64_t v = 0;
      size_t start = pos_;
      while (pos_ < src_.size() && std::isdigit(static_cast<unsigned char>(src_[pos_]))) {
        v = v * 10 + (src_[pos_] - '0');
        if (v > UINT32_MAX) throw ParseError("number too large", t.line, t.column);
        advance();
      }
      t.kind = Tok::Number;
      t.number = static_cast<uint32_t>(v);
      t.text = std::string(src_.substr(start, pos_ - start));
      return t;
    }
    advance();
    switch (c) {
      case '(': t.kind = Tok::LParen; return t;
      case ')': t.kind = Tok::RParen; return t;
      case ',': t.kind = Tok::Comma; return t;
      case '.': t.kind = Tok::Dot; return t;
      case ';': t.kind = Tok::Semi; return t;
      case ':': t.kind = Tok::Colon; return t;
      case '/': t.kind = Tok::Slash; return t;
      case '+': t.kind = Tok::Plus; return t;
      case '-': t.kind = Tok::Minus; return t;
      case '<':
        if (pos_ < src_.size() && src_[pos_] == '-') {
          advance();
          t.kind = Tok::Arrow;
          return t;
        }
        throw ParseError("stray '<' (expected '<-')", t.line, t.column);
      default:
        throw ParseError(std::string("unexpected character '") + c + "'", t.line, t.column);
    }
  }

 private:
  void advance() {
    if (src_[pos_] == '\n') {
      ++line_;
      column_ = 1;
    } else {
      ++column_;
    }
    ++pos_;
  }

  void skip_ws() {
    while (pos_ < src_.size()) {
      char c = src_[pos_];
      if (c == '%') {
        while (pos_ < src_.size() && src_[pos_] != '\n') advance();
      } else if (std::isspace(static_cast<unsigned char>(c))) {
        advance();
      } else {
        break;
      }
    }
  }

  std::string_view src_;
  size_t pos_ = 0;
  int line_ = 1;
  int column_ = 1;
};

// ---------------------------------------------------------------------------
// Parser

// Raw (pre-validation) syntax tree pieces: relation references by name.
struct RawAtom {
  std::string relation;
  std::vector<Term> terms;
  bool ground = true;
  bool arithmetic = false;
  int line = 1, column = 1;
};

}  // namespace

// Named (not anonymous) so Program can befriend it; only this file defines it.
class Parser {
 public:
  Parser(std::string_view src, const ParseOptions& opts) : lexer_(src), opts_(opts) {
    cur_ = lexer_.next();
  }

  Program run() {
    while (cur_.kind != Tok::End) statement();
    finalize();
    return std::move(prog_);
  }

 private:
  [[noreturn]] void fail(const std::string& msg) const { throw ParseError(msg, cur_.line, cur_.column); }
  [[noreturn]] void fail_at(const std::string& msg, int line, int col) const {
    throw ParseError(msg, line, col);
  }

  Token eat(Tok kind, const char* what) {
    if (cur_.kind != kind) fail(std::string("expected ") + what);
    Token t = cur_;
    cur_ = lexer_.next();
    return t;
  }

  bool accept(Tok kind) {
    if (cur_.kind != kind) return false;
    cur_ = lexer_.next();
    return true;
  }

  void statement() {
    if (cur_.kind != Tok::Ident) fail("expected a declaration, rule or fact");
    if (cur_.text == "input" || cur_.text == "output") {
      declaration(cur_.text == "input");
    } else if (cur_.text == "enum") {
      enumeration();
    } else {
      rule_or_fact();
    }
  }

  void declaration(bool is_input) {
    cur_ = lexer_.next();  // consume keyword
    Token name = eat(Tok::Ident, "relation name");
    if (name.text == "input" || name.text == "output" || name.text == "enum")
      fail_at("'" + name.text + "' is reserved and cannot name a relation", name.line, name.column);
    eat(Tok::Slash, "'/'");
    Token arity = eat(Tok::Number, "arity");
    eat(Tok::Dot, "'.'");
    if (rel_ids_.count(name.text))
      fail_at("duplicate declaration of relation '" + name.text + "'", name.line, name.column);
    Relation rel;
    rel.name = name.text;
    rel.arity = arity.number;
    rel.is_input = is_input;
    rel.is_output = !is_input;
    rel_ids_[name.text] = static_cast<uint32_t>(prog_.relations_.size());
    prog_.relations_.push_back(std::move(rel));
  }

  void enumeration() {
    Token kw = cur_;
    cur_ = lexer_.next();
    Token which = eat(Tok::Ident, "'input' or 'output'");
    if (which.text != "input" && which.text != "output")
      fail_at("expected 'input' or 'output' after 'enum'", which.line, which.column);
    const bool is_input = which.text == "input";
    eat(Tok::Colon, "':'");
    auto& target = is_input ? prog_.input_enum_ : prog_.output_enum_;
    std::set<Fact>& seen = is_input ? seen_input_enum_ : seen_output_enum_;
    for (;;) {
      RawAtom atom = parse_atom(/*var_id=*/nullptr);
      if (!atom.ground) fail_at("enumeration entries must be ground", atom.line, atom.column);
      if (atom.arithmetic)
        fail_at("arithmetic is not allowed in enumeration entries", atom.line, atom.column);
      Fact fact = to_fact(atom);
      const Relation& rel = prog_.relations_[fact.relation];
      if (is_input && !rel.is_input)
        fail_at("relation '" + rel.name + "' in input enumeration is not declared input", atom.line,
                atom.column);
      if (!is_input && rel.is_input)
        fail_at("input relation '" + rel.name + "' cannot appear in the output enumeration",
                atom.line, atom.column);
      if (!seen.insert(fact).second)
        fail_at("duplicate enumeration entry '" + atom.relation + "'", atom.line, atom.column);
      target.push_back(std::move(fact));
      if (accept(Tok::Semi)) break;
      eat(Tok::Comma, "',' or ';'");
    }
    (void)kw;
  }

  void rule_or_fact() {
    std::map<std::string, uint32_t> vars;
    std::vector<std::string> var_names;
    VarFn var_id = [&](const std::string& name) {
      auto it = vars.find(name);
      if (it != vars.end()) return it->second;
      uint32_t id = static_cast<uint32_t>(var_names.size());
      vars[name] = id;
      var_names.push_back(name);
      return id;
    };

    RawAtom head = parse_atom(&var_id);
    if (accept(Tok::Dot)) {
      // Plain fact.
      if (!head.ground) fail_at("facts must be ground", head.line, head.column);
      if (head.arithmetic)
        fail_at("arithmetic is not allowed in facts", head.line, head.column);
      Fact fact = to_fact(head);
      if (prog_.relations_[fact.relation].is_input)
        fail_at("input relation '" + head.relation + "' cannot be asserted as a fact (inputs come "
                "from the bitstring)",
                head.line, head.column);
      prog_.base_facts_.push_back(std::move(fact));
      return;
    }
    eat(Tok::Arrow, "'<-' or '.'");

    Rule rule;
    rule.head = to_rule_atom(head);
    for (;;) {
      RawAtom atom = parse_atom(&var_id);
      if (atom.arithmetic)
        fail_at("arithmetic is only allowed in rule heads", atom.line, atom.column);
      rule.body.push_back(to_rule_atom(atom));
      if (accept(Tok::Dot)) break;
      eat(Tok::Comma, "',' or '.'");
    }
    rule.var_names = std::move(var_names);

    // Validation: head relation not input; safety.
    const Relation& head_rel = prog_.relations_[rule.head.relation];
    if (head_rel.is_input)
      fail_at("input relation '" + head_rel.name + "' cannot appear in a rule head", head.line,
              head.column);
    std::vector<bool> bound(rule.var_names.size(), false);
    for (const RuleAtom& atom : rule.body)
      for (const Term& t : atom.terms)
        if (t.is_variable()) bound[t.operands[0].value] = true;
    for (const Term& t : rule.head.terms)
      for (const Term::Operand& op : t.operands)
        if (op.is_var && !bound[op.value])
          fail_at("unsafe rule: head variable '" + rule.var_names[op.value] +
                      "' does not occur in the body",
                  head.line, head.column);
    prog_.rules_.push_back(std::move(rule));
  }

  using VarFn = std::function<uint32_t(const std::string&)>;

  // Parses one atom. When `var_id` is null (enumeration context) identifiers in
  // term position are rejected; otherwise they intern as rule variables.
  RawAtom parse_atom(const VarFn* var_id) {
    Token name = eat(Tok::Ident, "relation name");
    if (name.text == "input" || name.text == "output" || name.text == "enum")
      fail_at("'" + name.text + "' is a reserved word", name.line, name.column);
    RawAtom atom;
    atom.relation = name.text;
    atom.line = name.line;
    atom.column = name.column;
    if (accept(Tok::LParen)) {
      for (;;) {
        atom.terms.push_back(parse_term(var_id, atom));
        if (accept(Tok::RParen)) break;
        eat(Tok::Comma, "',' or ')'");
      }
    }
    resolve_relation(atom);
    return atom;
  }

  Term parse_term(const VarFn* var_id, RawAtom& atom) {
    Term term;
    term.operands.push_back(parse_operand(var_id, atom));
    while (cur_.kind == Tok::Plus || cur_.kind == Tok::Minus) {
      term.signs.push_back(cur_.kind == Tok::Plus ? int8_t{1} : int8_t{-1});
      cur_ = lexer_.next();
      term.operands.push_back(parse_operand(var_id, atom));
    }
    if (term.is_arithmetic()) atom.arithmetic = true;
    return term;
  }

  Term::Operand parse_operand(const VarFn* var_id, RawAtom& atom) {
    Term::Operand op;
    if (cur_.kind == Tok::Number) {
      if (cur_.number >= opts_.constant_bound)
        fail("constant " + cur_.text + " exceeds the universe bound " +
             std::to_string(opts_.constant_bound));
      op.is_var = false;
      op.value = cur_.number;
      cur_ = lexer_.next();
      return op;
    }
    if (cur_.kind == Tok::Ident) {
      if (!var_id) fail("variables are not allowed here");
      atom.ground = false;
      op.is_var = true;
      op.value = (*var_id)(cur_.text);
      cur_ = lexer_.next();
      return op;
    }
    fail("expected a constant or variable");
  }

  // Looks up the relation, implicitly declaring derived relations on first
  // use; checks arity against the declaration or first occurrence.
  void resolve_relation(RawAtom& atom) {
    auto arity = static_cast<uint32_t>(atom.terms.size());
    auto it = rel_ids_.find(atom.relation);
    if (it == rel_ids_.end()) {
      Relation rel;
      rel.name = atom.relation;
      rel.arity = arity;
      rel_ids_[atom.relation] = static_cast<uint32_t>(prog_.relations_.size());
      prog_.relations_.push_back(std::move(rel));
      return;
    }
    const Relation& rel = prog_.relations_[it->second];
    if (rel.arity != arity)
      fail_at("relation '" + atom.relation + "' used with arity " + std::to_string(arity) +
                  " but declared with arity " + std::to_string(rel.arity),
              atom.line, atom.column);
  }

  Fact to_fact(const RawAtom& atom) const {
    Fact fact;
    fact.relation = rel_ids_.at(atom.relation);
    for (const Term& t : atom.terms) fact.args.push_back(t.operands[0].value);
    return fact;
  }

  RuleAtom to_rule_atom(const RawAtom& atom) const {
    RuleAtom out;
    out.relation = rel_ids_.at(atom.relation);
    out.terms = atom.terms;
    return out;
  }

  void finalize() {
    prog_.constant_bound_ = opts_.constant_bound;
    Digest d;
    d.u64(prog_.constant_bound_);
    d.u64(prog_.relations_.size());
    for (const Relation& r : prog_.relations_) {
      d.str(r.name);
      d.u64(r.arity);
      d.u64(static_cast<uint64_t>(r.is_input) << 1 | static_cast<uint64_t>(r.is_output));
    }
    auto hash_fact = [&](const Fact& f) {
      d.u64(f.relation);
      for (uint32_t a : f.args) d.u64(a);
    };
    d.u64(prog_.input_enum_.size());
    for (const Fact& f : prog_.input_enum_) hash_fact(f);
    d.u64(prog_.output_enum_.size());
    for (const Fact& f : prog_.output_enum_) hash_fact(f);
    d.u64(prog_.base_facts_.size());
    for (const Fact& f : prog_.base_facts_) hash_fact(f);
    d.u64(prog_.rules_.size());
    auto hash_atom = [&](const RuleAtom& a) {
      d.u64(a.relation);
      d.u64(a.terms.size());
      for (const Term& t : a.terms) {
        d.u64(t.operands.size());
        for (const Term::Operand& op : t.operands) {
          d.u64(op.is_var);
          d.u64(op.value);
        }
        for (int8_t s : t.signs) d.u64(static_cast<uint64_t>(static_cast<int64_t>(s)));
      }
    };
    for (const Rule& r : prog_.rules_) {
      hash_atom(r.head);
      d.u64(r.body.size());
      for (const RuleAtom& a : r.body) hash_atom(a);
    }
    prog_.digest_ = d.value();
  }

  Lexer lexer_;
  ParseOptions opts_;
  Token cur_;
  Program prog_;
  std::unordered_map<std::string, uint32_t> rel_ids_;
  std::set<Fact> seen_input_enum_;
  std::set<Fact> seen_output_enum_;
};

namespace {

// ---------------------------------------------------------------------------
// Semi-naive evaluation

// Per-relation fact store. Tuples keep derivation order so [delta_begin,
// delta_end) marks the facts that are new in the current round.
struct RelStore {
  std::vector<std::vector<uint32_t>> tuples;
  std::set<std::vector<uint32_t>> index;
  size_t delta_begin = 0;
  size_t delta_end = 0;

  bool insert(std::vector<uint32_t> args) {
    if (!index.insert(args).second) return false;
    tuples.push_back(std::move(args));
    return true;
  }
};

class Engine {
 public:
  explicit Engine(const Program& prog) : prog_(prog), stores_(prog.relations().size()) {}

  void seed(const Fact& fact) { stores_[fact.relation].insert(fact.args); }

  void run() {
    for (RelStore& s : stores_) {
      s.delta_begin = 0;
      s.delta_end = s.tuples.size();
    }
    bool any_delta = true;
    while (any_delta) {
      for (const Rule& rule : prog_.rules()) {
        // Fire the rule once per choice of which body atom reads the delta:
        // earlier atoms see only pre-delta facts, later ones see delta too.
        for (size_t di = 0; di < rule.body.size(); ++di) fire(rule, di);
      }
      any_delta = false;
      for (RelStore& s : stores_) {
        s.delta_begin = s.delta_end;
        s.delta_end = s.tuples.size();
        if (s.delta_begin != s.delta_end) any_delta = true;
      }
    }
  }

  bool contains(const Fact& fact) const { return stores_[fact.relation].index.count(fact.args) > 0; }

  std::vector<Fact> all_facts() const {
    std::vector<Fact> out;
    for (uint32_t r = 0; r < stores_.size(); ++r)
      for (const auto& args : stores_[r].tuples) out.push_back(Fact{r, args});
    return out;
  }

 private:
  void fire(const Rule& rule, size_t delta_pos) {
    binding_.assign(rule.var_names.size(), -1);
    match(rule, delta_pos, 0);
  }

  void match(const Rule& rule, size_t delta_pos, size_t pos) {
    if (pos == rule.body.size()) {
      derive(rule);
      return;
    }
    const RuleAtom& atom = rule.body[pos];
    const RelStore& store = stores_[atom.relation];
    size_t begin = pos == delta_pos ? store.delta_begin : 0;
    size_t end = pos < delta_pos ? store.delta_begin : store.delta_end;
    for (size_t i = begin; i < end; ++i) {
      const std::vector<uint32_t>& tuple = store.tuples[i];
      size_t touched_n = touched_.size();
      if (unify(atom, tuple)) match(rule, delta_pos, pos + 1);
      while (touched_.size() > touched_n) {
        binding_[touched_.back()] = -1;
        touched_.pop_back();
      }
    }
  }

  bool unify(const RuleAtom& atom, const std::vector<uint32_t>& tuple) {
    size_t touched_n = touched_.size();
    for (size_t k = 0; k < atom.terms.size(); ++k) {
      const Term& t = atom.terms[k];
      const Term::Operand& op = t.operands[0];
      if (!op.is_var) {
        if (op.value != tuple[k]) goto mismatch;
      } else if (binding_[op.value] < 0) {
        binding_[op.value] = static_cast<int64_t>(tuple[k]);
        touched_.push_back(op.value);
      } else if (binding_[op.value] != static_cast<int64_t>(tuple[k])) {
        goto mismatch;
      }
    }
    return true;
  mismatch:
    while (touched_.size() > touched_n) {
      binding_[touched_.back()] = -1;
      touched_.pop_back();
    }
    return false;
  }

  void derive(const Rule& rule) {
    std::vector<uint32_t> args;
    args.reserve(rule.head.terms.size());
    for (const Term& t : rule.head.terms) {
      int64_t acc = operand_value(t.operands[0]);
      for (size_t i = 0; i < t.signs.size(); ++i) {
        int64_t v = operand_value(t.operands[i + 1]);
        acc = t.signs[i] > 0 ? acc + v : std::max<int64_t>(0, acc - v);
      }
      if (acc < 0 || acc >= static_cast<int64_t>(prog_.constant_bound())) return;  // outside universe
      args.push_back(static_cast<uint32_t>(acc));
    }
    stores_[rule.head.relation].insert(std::move(args));
  }

  int64_t operand_value(const Term::Operand& op) const {
    return op.is_var ? binding_[op.value] : static_cast<int64_t>(op.value);
  }

  const Program& prog_;
  std::vector<RelStore> stores_;
  std::vector<int64_t> binding_;
  std::vector<uint32_t> touched_;
};

Engine evaluate_engine(const Program& prog, const Bitstring& input) {
  if (input.size() != prog.n_inputs())
    throw ProgramError("input bitstring has length " + std::to_string(input.size()) +
                       ", expected " + std::to_string(prog.n_inputs()));
  Engine engine(prog);
  for (const Fact& f : prog.base_facts()) engine.seed(f);
  for (size_t i = 0; i < input.size(); ++i)
    if (input[i]) engine.seed(prog.input_enum()[i]);
  engine.run();
  return engine;
}

}  // namespace

Bitstring Program::evaluate(const Bitstring& input) const {
  Engine engine = evaluate_engine(*this, input);
  Bitstring out(output_enum_.size(), 0);
  for (size_t j = 0; j < output_enum_.size(); ++j)
    out[j] = engine.contains(output_enum_[j]) ? 1 : 0;
  return out;
}

std::vector<Fact> Program::consequences(const Bitstring& input) const {
  return evaluate_engine(*this, input).all_facts();
}

std::string Program::atom_text(const Fact& fact) const {
  std::ostringstream os;
  os << relations_[fact.relation].name;
  if (!fact.args.empty()) {
    os << '(';
    for (size_t i = 0; i < fact.args.size(); ++i) {
      if (i) os << ',';
      os << fact.args[i];
    }
    os << ')';
  }
  return os.str();
}

Program parse_program(std::string_view source, const ParseOptions& opts) {
  Parser parser(source, opts);
  return parser.run();
}

Program parse_program_file(const std::string& path, const ParseOptions& opts) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ProgramError("cannot open program file: " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_program(buf.str(), opts);
}

}  // namespace symcor::datalog
