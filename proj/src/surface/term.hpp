#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "support/diag.hpp"
#include "surface/types.hpp"

namespace effv {

enum class BinOp { Add, Sub, Mul, Div, Mod, Eq, Neq, Lt, Le, Gt, Ge, And, Or, Implies, Iff };

const char *binop_str(BinOp op);
bool binop_is_arith(BinOp op);
bool binop_is_compare(BinOp op);
bool binop_is_logic(BinOp op);

struct Pattern;
using PatternPtr = std::shared_ptr<const Pattern>;

/// Constructor patterns for match in programs and specifications. List
/// constructors use the names "[]" and "::".
struct Pattern {
  enum class Kind { Wild, Var, Ctor, Tuple, Unit, Int, Bool };
  Kind kind = Kind::Wild;
  std::string name;
  std::int64_t ival = 0;
  std::vector<PatternPtr> subs;
  TypePtr ty;
  Span span;
};

PatternPtr pat_wild(Span s = {});
PatternPtr pat_var(std::string n, TypePtr ty = nullptr, Span s = {});
PatternPtr pat_ctor(std::string n, std::vector<PatternPtr> subs, TypePtr ty = nullptr, Span s = {});
PatternPtr pat_tuple(std::vector<PatternPtr> subs, TypePtr ty = nullptr, Span s = {});
void pattern_vars(const Pattern &p, std::vector<std::pair<std::string, TypePtr>> &out);
std::string pattern_str(const Pattern &p);

struct Term;
using TermPtr = std::shared_ptr<const Term>;

using Binder = std::pair<std::string, TypePtr>;

struct TermCase {
  PatternPtr pat;
  TermPtr body;
};

/// Logic terms. Used for source specifications, IR contracts and the VC
/// formulas alike; `ty` is filled in once a term has been elaborated.
struct Term {
  enum class Kind {
    Int, Bool, Unit,
    Var,        // local, bound, parameter, `result`, `reply`, or an array state var
    Deref,      // !x, current value of a state reference
    Old,        // old t
    App,        // logic function, predicate or constructor application
    Not, Neg,
    Bin,
    Ite,
    Forall, Exists,
    Let,        // let name = kids[0] in kids[1]
    Match,
    Tuple,
    Select,     // kids[0][kids[1]]
    Length,     // length of the array state var `name`
    Valid,      // continuation validity flag
    Pre,        // pre f arg state
    Post,       // post f arg old_state state result
    Field,      // kids[0]._name
    StateRec,   // explicit record: names[i] = kids[i]
  };

  Kind kind = Kind::Unit;
  BinOp op = BinOp::Add;
  std::string name;
  std::int64_t ival = 0;
  bool bval = false;
  std::vector<TermPtr> kids;
  std::vector<Binder> binders;
  std::vector<std::vector<TermPtr>> triggers;
  std::vector<std::string> names;
  std::vector<TermCase> cases;
  TypePtr ty;
  Span span;
};

namespace tm {
TermPtr int_(std::int64_t v);
TermPtr bool_(bool v);
TermPtr true_();
TermPtr false_();
TermPtr unit();
TermPtr var(std::string n, TypePtr ty = nullptr, Span s = {});
TermPtr deref(std::string n, TypePtr ty = nullptr, Span s = {});
TermPtr old(TermPtr t);
TermPtr app(std::string f, std::vector<TermPtr> args, TypePtr ty = nullptr, Span s = {});
TermPtr not_(TermPtr t);
TermPtr neg(TermPtr t);
TermPtr bin(BinOp op, TermPtr a, TermPtr b, TypePtr ty = nullptr);
TermPtr and_(TermPtr a, TermPtr b);
TermPtr or_(TermPtr a, TermPtr b);
TermPtr implies(TermPtr a, TermPtr b);
TermPtr iff(TermPtr a, TermPtr b);
TermPtr eq(TermPtr a, TermPtr b);
TermPtr ite(TermPtr c, TermPtr a, TermPtr b);
TermPtr forall(std::vector<Binder> bs, TermPtr body, std::vector<std::vector<TermPtr>> trig = {});
TermPtr exists(std::vector<Binder> bs, TermPtr body);
TermPtr let(std::string n, TermPtr v, TermPtr body);
TermPtr match(TermPtr scrut, std::vector<TermCase> cases, TypePtr ty = nullptr);
TermPtr tuple(std::vector<TermPtr> items, TypePtr ty = nullptr);
TermPtr select(TermPtr arr, TermPtr idx, TypePtr ty = nullptr);
TermPtr length(std::string arr);
TermPtr valid(TermPtr k);
TermPtr pre(TermPtr f, TermPtr arg, TermPtr state);
TermPtr post(TermPtr f, TermPtr arg, TermPtr old_state, TermPtr state, TermPtr res);
TermPtr field(TermPtr rec, std::string x, TypePtr ty = nullptr);
TermPtr state_rec(std::vector<std::string> names, std::vector<TermPtr> vals);

/// Conjunction of a list; the empty list is `true`.
TermPtr conj(const std::vector<TermPtr> &ts);
}  // namespace tm

/// Copy of `t` with a different type annotation.
TermPtr with_type(const TermPtr &t, TypePtr ty);
TermPtr with_kids(const TermPtr &t, std::vector<TermPtr> kids);

bool is_true(const TermPtr &t);
bool is_false(const TermPtr &t);
bool term_equal(const TermPtr &a, const TermPtr &b);

std::string term_str(const TermPtr &t);

/// Free variables (Var nodes not bound by a quantifier, let or match case).
std::set<std::string> free_vars(const TermPtr &t);

/// Simultaneous substitution of free Var occurrences.
TermPtr subst(const TermPtr &t, const std::map<std::string, TermPtr> &m);

/// Generic bottom-up rewrite: f is applied to every node after its children
/// have been rewritten; returning nullptr keeps the node.
template <class F>
TermPtr rewrite(const TermPtr &t, F &&f);

}  // namespace effv

#include "surface/term_rewrite.ipp"
