#pragma once

#include <string>
#include <vector>

#include "ir/ir.hpp"

namespace effv {

enum class Obligation {
  Postcondition,
  PreconditionAtCall,
  RaisesAtPerform,
  ContinuationValidity,
  ContinuationPrecondition,
  HandlerInvariantNormal,
  HandlerInvariantExceptional,
  VariantDecrease,
  WritesFrame,
};

const char *obligation_str(Obligation o);

/// A closed goal: every symbolic value of the path is universally quantified.
struct VC {
  std::string id;
  TermPtr goal;
  std::string routine;
  Obligation kind = Obligation::Postcondition;
  Span span;
  bool trivial = false;  // the obligation alone simplifies to `true`; not counted, never sent to a solver
};

/// One VC per obligation site, simplified, in a deterministic order.
/// Trivial goals are kept and flagged.
std::vector<VC> gen_vcs(const IrProgram &p);

/// Inlines protocol predicates and let bindings, folds constants. A goal that
/// simplifies to `true` with its hypotheses is valid but still counted.
VC simplify(const VC &vc, const IrProgram &p);
TermPtr simplify_term(const TermPtr &t, const IrProgram &p);

std::size_t count_nontrivial(const std::vector<VC> &vcs);

/// The `--emit-vcs` listing.
std::string print_vcs(const std::vector<VC> &vcs, bool with_trivial);

}  // namespace effv
