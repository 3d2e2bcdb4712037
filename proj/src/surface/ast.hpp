#pragma once

#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "support/diag.hpp"
#include "surface/term.hpp"
#include "surface/types.hpp"

namespace effv {

struct Param {
  std::string name;  // "()" for a unit parameter, "_" for an ignored one
  TypePtr ty;
  bool ghost = false;
  Span span;
};

/// A per-effect contract. `captured` lists the enclosing function
/// parameters a local protocol mentions; it is filled in by sema.
struct Protocol {
  std::string effect;
  std::vector<std::string> params;
  std::vector<TermPtr> requires_;
  std::vector<TermPtr> ensures;
  std::vector<std::string> modifies;
  bool local = false;
  bool braced = false;  // printed as `protocol E x { ... }`
  std::vector<Binder> captured;
  Span span;
};
using ProtocolPtr = std::shared_ptr<const Protocol>;

struct SpecClauses {
  std::vector<TermPtr> requires_;
  std::vector<TermPtr> ensures;
  std::vector<std::string> modifies;
  std::vector<std::string> performs;
  TermPtr variant;
  std::vector<ProtocolPtr> protocols;
  Span span;

  bool empty() const {
    return requires_.empty() && ensures.empty() && modifies.empty() && performs.empty() && !variant &&
           protocols.empty();
  }
};
using SpecPtr = std::shared_ptr<const SpecClauses>;

struct HandlerSpec {
  std::vector<TermPtr> try_ensures;
  TypePtr returns;
  Span span;
};
using HandlerSpecPtr = std::shared_ptr<const HandlerSpec>;

struct Expr;
using ExprPtr = std::shared_ptr<const Expr>;

struct MatchCase {
  PatternPtr pat;
  ExprPtr body;
};

struct EffectBranch {
  std::string effect;
  std::vector<std::string> params;
  std::string k;
  ExprPtr body;
  Span span;
};

struct ValueBranch {
  std::string name;
  ExprPtr body;
};

struct Expr {
  enum class Kind {
    Int, Bool, Unit,
    Var,
    Deref,     // !x
    Assign,    // x := kids[0]
    ArrGet,    // name.(kids[0])
    ArrSet,    // name.(kids[0]) <- kids[1]
    Unop,      // name is "not" or "-"
    Binop,
    Ctor,      // constructor application, including "[]" and "::"
    Tuple,
    Let,       // let [rec] name params [: ann] = kids[0] [spec] in kids[1]
    Fun,       // fun [spec] params [: ann] -> kids[0]
    App,       // kids[0] applied to kids[1..]
    If,
    Seq,
    Match,
    Perform,   // perform E kids...
    Try,
    Continue,  // continue name kids[0]
  };

  Kind kind = Kind::Unit;
  std::string name;
  std::int64_t ival = 0;
  BinOp op = BinOp::Add;
  std::vector<ExprPtr> kids;
  std::vector<Param> params;
  TypePtr ann;
  bool rec = false;
  SpecPtr spec;
  std::vector<MatchCase> cases;
  std::vector<EffectBranch> branches;
  std::optional<ValueBranch> value_branch;
  HandlerSpecPtr handler_spec;
  TypePtr ty;  // filled in by sema
  Span span;
};

struct Constructor {
  std::string name;
  std::vector<TypePtr> args;
};

struct TypeDecl {
  std::string name;
  std::vector<Constructor> ctors;
};

struct EffectDecl {
  std::string name;
  TypePtr sig;
};

/// Top-level mutable state: `let x : t ref = ref e` or
/// `let x : t array = Array.make n e`.
struct StateDecl {
  std::string name;
  TypePtr ty;      // t ref or t array
  ExprPtr init;    // initial value of the reference / of each cell
  std::int64_t size = 0;  // arrays only
};

struct FunctionDecl {
  std::string name;
  bool rec = false;
  std::vector<Param> params;
  TypePtr ret;  // may be null before sema
  ExprPtr body;
  SpecPtr spec;
};

/// Logic function or predicate from a `(*@ function ... *)` or
/// `(*@ predicate ... *)` block; a predicate without body is abstract.
struct LogicDecl {
  std::string name;
  bool predicate = false;
  std::vector<Binder> params;
  TypePtr ret;
  TermPtr body;
};

struct Decl {
  enum class Kind { Type, Effect, Protocol, State, Function, Logic };
  Kind kind = Kind::Type;
  Span span;
  std::shared_ptr<const TypeDecl> type;
  std::shared_ptr<const EffectDecl> effect;
  ProtocolPtr protocol;
  std::shared_ptr<const StateDecl> state;
  std::shared_ptr<const FunctionDecl> function;
  std::shared_ptr<const LogicDecl> logic;
};

struct SourceProgram {
  std::vector<Decl> decls;
};

}  // namespace effv
