#include "surface/types.hpp"

namespace effv {

namespace {
TypePtr make(Type::Kind k, std::string name = {}, std::vector<TypePtr> args = {}) {
  return std::make_shared<const Type>(Type{k, std::move(name), std::move(args)});
}
}  // namespace

TypePtr Type::int_() {
  static const TypePtr t = make(Kind::Int);
  return t;
}
TypePtr Type::bool_() {
  static const TypePtr t = make(Kind::Bool);
  return t;
}
TypePtr Type::unit() {
  static const TypePtr t = make(Kind::Unit);
  return t;
}
TypePtr Type::state() {
  static const TypePtr t = make(Kind::State);
  return t;
}
TypePtr Type::named(std::string n) { return make(Kind::Named, std::move(n)); }
TypePtr Type::ref(TypePtr t) { return make(Kind::Ref, {}, {std::move(t)}); }
TypePtr Type::array(TypePtr t) { return make(Kind::Array, {}, {std::move(t)}); }
TypePtr Type::list(TypePtr t) { return make(Kind::List, {}, {std::move(t)}); }
TypePtr Type::tuple(std::vector<TypePtr> ts) { return make(Kind::Tuple, {}, std::move(ts)); }
TypePtr Type::arrow(TypePtr a, TypePtr b) { return make(Kind::Arrow, {}, {std::move(a), std::move(b)}); }
TypePtr Type::cont(TypePtr a, TypePtr b) { return make(Kind::Cont, {}, {std::move(a), std::move(b)}); }
TypePtr Type::lambda(TypePtr a, TypePtr b) { return make(Kind::Lambda, {}, {std::move(a), std::move(b)}); }

bool type_equal(const TypePtr &a, const TypePtr &b) {
  if (a == b) return true;
  if (!a || !b) return false;
  if (a->kind != b->kind || a->name != b->name || a->args.size() != b->args.size()) return false;
  for (size_t i = 0; i < a->args.size(); ++i)
    if (!type_equal(a->args[i], b->args[i])) return false;
  return true;
}

namespace {
// Precedence: 0 arrow, 1 tuple, 2 postfix application, 3 atom.
std::string str_prec(const TypePtr &t, int ctx) {
  using K = Type::Kind;
  std::string s;
  int prec = 3;
  switch (t->kind) {
    case K::Int: s = "int"; break;
    case K::Bool: s = "bool"; break;
    case K::Unit: s = "unit"; break;
    case K::State: s = "state"; break;
    case K::Named: s = t->name; break;
    case K::Ref: s = str_prec(t->args[0], 2) + " ref"; prec = 2; break;
    case K::Array: s = str_prec(t->args[0], 2) + " array"; prec = 2; break;
    case K::List: s = str_prec(t->args[0], 2) + " list"; prec = 2; break;
    case K::Tuple:
      for (size_t i = 0; i < t->args.size(); ++i) {
        if (i) s += " * ";
        s += str_prec(t->args[i], 2);
      }
      prec = 1;
      break;
    case K::Arrow:
      s = str_prec(t->args[0], 1) + " -> " + str_prec(t->args[1], 0);
      prec = 0;
      break;
    case K::Cont:
      s = "continuation " + str_prec(t->args[0], 3) + " " + str_prec(t->args[1], 3);
      prec = 2;
      break;
    case K::Lambda:
      s = "lambda " + str_prec(t->args[0], 3) + " " + str_prec(t->args[1], 3);
      prec = 2;
      break;
  }
  if (prec < ctx) return "(" + s + ")";
  return s;
}
}  // namespace

std::string type_str(const TypePtr &t) {
  if (!t) return "?";
  return str_prec(t, 0);
}

EffectSig effect_type_split(const TypePtr &t) {
  if (t->kind != Type::Kind::Arrow) return {{Type::unit()}, t};
  EffectSig rest = effect_type_split(t->args[1]);
  if (t->args[1]->kind != Type::Kind::Arrow) return {{t->args[0]}, t->args[1]};
  rest.args.insert(rest.args.begin(), t->args[0]);
  return rest;
}

TypePtr pack_args(const std::vector<TypePtr> &ts) {
  if (ts.empty()) return Type::unit();
  if (ts.size() == 1) return ts[0];
  return Type::tuple(ts);
}

}  // namespace effv
