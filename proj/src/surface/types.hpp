#pragma once

#include <memory>
#include <string>
#include <vector>

namespace effv {

struct Type;
using TypePtr = std::shared_ptr<const Type>;

/// Types shared by the surface language and the target IR. Continuation,
/// Lambda and State only arise after translation.
struct Type {
  enum class Kind { Int, Bool, Unit, Named, Ref, Array, List, Tuple, Arrow, Cont, Lambda, State };

  Kind kind;
  std::string name;            // Named
  std::vector<TypePtr> args;   // Ref/Array/List: 1; Tuple: n; Arrow/Cont/Lambda: {arg, result}

  static TypePtr int_();
  static TypePtr bool_();
  static TypePtr unit();
  static TypePtr state();
  static TypePtr named(std::string n);
  static TypePtr ref(TypePtr t);
  static TypePtr array(TypePtr t);
  static TypePtr list(TypePtr t);
  static TypePtr tuple(std::vector<TypePtr> ts);
  static TypePtr arrow(TypePtr a, TypePtr b);
  static TypePtr cont(TypePtr a, TypePtr b);
  static TypePtr lambda(TypePtr a, TypePtr b);

  bool is(Kind k) const { return kind == k; }
};

bool type_equal(const TypePtr &a, const TypePtr &b);
std::string type_str(const TypePtr &t);

/// Splits a curried arrow chain t1 -> ... -> tn -> r into ([t1..tn], r).
/// A non-arrow type t splits into ([unit], t).
struct EffectSig {
  std::vector<TypePtr> args;
  TypePtr reply;
};
EffectSig effect_type_split(const TypePtr &t);

/// Packs a parameter type list into a single argument type (unit, the type
/// itself, or a tuple).
TypePtr pack_args(const std::vector<TypePtr> &ts);

}  // namespace effv
