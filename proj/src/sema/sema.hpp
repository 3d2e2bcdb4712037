#pragma once

#include <map>
#include <set>
#include <string>
#include <vector>

#include "surface/ast.hpp"

namespace effv {

struct CtorInfo {
  std::string type;
  std::vector<TypePtr> args;
  size_t index = 0;
};

struct StateVar {
  std::string name;
  TypePtr ty;    // t ref or t array
  TypePtr elem;  // t
  bool is_array = false;
  std::int64_t size = 0;
  ExprPtr init;
};

/// Top-level mutable definitions in declaration order.
struct StateModel {
  std::vector<StateVar> vars;

  const StateVar *find(const std::string &n) const;
  std::vector<std::string> names() const;
};

struct FunSig {
  std::string name;
  std::vector<Param> params;
  TypePtr ret;
  SpecPtr spec;
  bool rec = false;
  std::set<std::string> performs;

  TypePtr arrow_type() const;
};

/// A performs-row obligation collected during typing: the effects a body
/// lets escape must be covered by the declared row.
struct RowCheck {
  std::string function;
  Span span;
  std::set<std::string> declared;
  std::map<std::string, Span> escaping;  // effect -> first perform or call site
};

struct TypedProgram {
  SourceProgram program;  // elaborated: every Expr and Term carries its type
  StateModel state;
  std::map<std::string, std::shared_ptr<const TypeDecl>> types;
  std::vector<std::string> type_order;
  std::map<std::string, CtorInfo> ctors;
  std::vector<std::string> effect_order;
  std::map<std::string, TypePtr> effect_types;
  std::map<std::string, EffectSig> effect_sigs;
  std::map<std::string, ProtocolPtr> protocols;  // global protocols
  std::map<std::string, std::shared_ptr<const LogicDecl>> logic;
  std::map<std::string, FunSig> functions;       // top-level functions
  std::vector<RowCheck> row_checks;
  std::map<std::string, std::set<std::string>> effect_rows;
};

/// Type checks and elaborates a parsed program. Also resolves protocols
/// (global or local), computes the variables captured by local protocols
/// and fills the implicit state argument of `pre`/`post` in specifications.
TypedProgram typecheck(const SourceProgram &p);

/// Verifies every collected performs-row obligation and fills effect_rows.
TypedProgram check_effect_rows(TypedProgram p);

/// Collects top-level mutable definitions; mutable state created inside a
/// function body is rejected.
StateModel build_state_model(const SourceProgram &p);
StateModel build_state_model(const TypedProgram &p);

/// typecheck followed by check_effect_rows.
TypedProgram analyze(const SourceProgram &p);

/// The record of all state variables at the current point, `{_x = !x; ...}`.
TermPtr current_state_term(const StateModel &m);

bool is_reserved_name(const std::string &n);

}  // namespace effv
