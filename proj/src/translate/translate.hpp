#pragma once

#include <map>
#include <set>
#include <string>
#include <vector>

#include "ir/ir.hpp"
#include "sema/sema.hpp"

namespace effv {

/// One entry per source construct that has a translation rule. Atomic and
/// primitive forms (literals, variables, operators, state access, continue)
/// are translated homomorphically and have no entry.
struct RuleTraceEntry {
  std::string rule;
  Span span;
  int node = -1;  // IR node id (IrExpr::trace / Routine::trace / IrDecl::trace equal the entry index)
};

struct RuleTrace {
  std::vector<RuleTraceEntry> entries;
};

/// Σ: effect signatures; Δ: state each function may modify; ν: names bound
/// to defunctionalized values; μ: state modified so far on the current path.
struct TransEnv {
  std::map<std::string, EffectSig> sigma;
  std::map<std::string, std::set<std::string>> delta;
  std::set<std::string> nu;
  std::set<std::string> mu;
};

struct Translation {
  IrProgram ir;
  RuleTrace trace;
  TransEnv env;
};

Translation translate(const TypedProgram &p);

// Meta-functions, exposed for testing.

/// S: conjunction of clause terms, `true` for the empty list.
TermPtr combine_terms(const std::vector<TermPtr> &ts);

/// O: `state._x = state_old._x` for every x in vars, `true` for the empty list.
TermPtr unmodified_state(const std::vector<std::string> &vars, const StateModel &m);

/// Rewrites a program-convention term into one over explicit state values:
/// `!x` and array names read `cur`, `old t` reads `old` (null rejects old).
TermPtr to_state_form(const TermPtr &t, const StateModel &m, const TermPtr &cur, const TermPtr &old);

/// Replaces arrow types by the IR lambda type.
TypePtr ir_type(const TypePtr &t);

/// Binds protocol or function parameters from a packed argument:
/// nothing for zero names, `let` for one, a tuple match otherwise.
TermPtr bind_args(const std::vector<Binder> &params, const TermPtr &arg, const TermPtr &body);

}  // namespace effv
