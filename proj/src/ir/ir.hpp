#pragma once

#include <memory>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "sema/sema.hpp"
#include "surface/ast.hpp"

namespace effv {

struct IrExpr;
using IrExprPtr = std::shared_ptr<const IrExpr>;

struct IrParam {
  std::string name;  // "_" when the value is ignored
  TypePtr ty;
  bool ghost = false;
};

/// raises { E binder -> cond }
struct RaisesClause {
  std::string exn;
  std::string binder;
  TypePtr ty;
  TermPtr cond;
};

/// A routine: concrete when body is set, abstract (`val`) otherwise.
/// Contract terms use program-level conventions: `!x` and array names read
/// the current store, `old t` the store at entry, `result` the return value.
struct Routine {
  enum class Role { Function, Local, Handler, Lambda, Generator, Perform };

  std::string name;
  Role role = Role::Function;
  std::vector<IrParam> params;
  TypePtr ret;
  std::vector<TermPtr> requires_;
  std::vector<TermPtr> ensures;
  std::vector<RaisesClause> raises;
  std::vector<std::string> writes;
  bool writes_explicit = false;  // from a source modifies clause
  TermPtr variant;
  bool rec = false;
  IrExprPtr body;
  Span span;
  int trace = -1;
};
using RoutinePtr = std::shared_ptr<const Routine>;

struct IrCase {
  PatternPtr pat;
  IrExprPtr body;
};

/// Exception handler `| E x̄ -> body`; the payload is destructured into params.
struct IrHandler {
  std::string exn;
  std::vector<IrParam> params;
  IrExprPtr body;
};

struct IrExpr {
  enum class Kind {
    Lit,         // term (int, bool, unit)
    Var,
    Deref,       // !name
    Assign,      // name := kids[0]
    ArrGet,      // name.(kids[0])
    ArrSet,      // name.(kids[0]) <- kids[1]
    Unop,        // name is "not" or "-"
    Binop,
    Ctor,        // name kids..., including "[]" and "::"
    Tuple,
    Let,         // let name = kids[0] in kids[1]
    LetRoutine,  // let/val routine in kids[0]
    If,
    Seq,
    Match,
    Call,        // direct call of routine `name`
    Apply,       // apply name kids[0], closure application
    Continue,    // continue name kids[0]
    Try,         // try kids[0] with handlers; value branch outside the handlers
    Assume,      // assume { term }
    Snapshot,    // the current state record
  };

  Kind kind = Kind::Lit;
  std::string name;
  BinOp op = BinOp::Add;
  TermPtr term;
  std::vector<IrExprPtr> kids;
  RoutinePtr routine;
  std::vector<IrCase> cases;
  std::vector<IrHandler> handlers;
  std::optional<std::pair<IrParam, IrExprPtr>> value_branch;
  std::vector<std::string> writes;  // Continue: state the resumed computation may write
  TypePtr ty;
  Span span;
  int trace = -1;
};

struct IrDecl {
  enum class Kind { Prelude, Type, State, Exception, Logic, Global, Routine };
  Kind kind = Kind::Prelude;
  std::string name;
  std::shared_ptr<const TypeDecl> type;
  std::vector<TypePtr> exn_args;  // Exception
  std::shared_ptr<const LogicDecl> logic;
  std::optional<StateVar> global;
  RoutinePtr routine;
  int trace = -1;
};

struct IrProgram {
  std::vector<IrDecl> decls;
  StateModel state;
  std::map<std::string, std::shared_ptr<const TypeDecl>> types;
  std::vector<std::string> type_order;
  std::map<std::string, CtorInfo> ctors;
  std::map<std::string, std::shared_ptr<const LogicDecl>> logic;  // user logic plus pre_E / post_E
  std::map<std::string, EffectSig> sigma;
};

namespace ir {
IrExprPtr lit(TermPtr t);
IrExprPtr var(std::string n, TypePtr ty);
IrExprPtr let(std::string n, IrExprPtr v, IrExprPtr body);
IrExprPtr seq(IrExprPtr a, IrExprPtr b);
IrExprPtr call(std::string f, std::vector<IrExprPtr> args, TypePtr ty);
IrExprPtr let_routine(RoutinePtr r, IrExprPtr body);
IrExprPtr assume(TermPtr t);
IrExprPtr snapshot();
}  // namespace ir

/// Stable textual form, one declaration per block.
std::string print_ir(const IrProgram &p);
std::string print_routine(const Routine &r);

struct IrDiagnostic {
  std::string message;
  std::string routine;
  int trace = -1;
};

/// Checks first-order-ness, name resolution, pre/post arities and that every
/// write is covered by an explicit writes clause.
std::vector<IrDiagnostic> wf_check(const IrProgram &p);

/// State variables assigned anywhere inside e, including through calls of
/// routines bound in e and through the writes of called routines.
std::set<std::string> written_vars(const IrExprPtr &e, const std::map<std::string, RoutinePtr> &scope,
                                   const StateModel &state);

}  // namespace effv
