#include "surface/term.hpp"

#include <cctype>

namespace effv {

const char *binop_str(BinOp op) {
  switch (op) {
    case BinOp::Add: return "+";
    case BinOp::Sub: return "-";
    case BinOp::Mul: return "*";
    case BinOp::Div: return "/";
    case BinOp::Mod: return "mod";
    case BinOp::Eq: return "=";
    case BinOp::Neq: return "<>";
    case BinOp::Lt: return "<";
    case BinOp::Le: return "<=";
    case BinOp::Gt: return ">";
    case BinOp::Ge: return ">=";
    case BinOp::And: return "&&";
    case BinOp::Or: return "||";
    case BinOp::Implies: return "->";
    case BinOp::Iff: return "<->";
  }
  return "?";
}

bool binop_is_arith(BinOp op) {
  return op == BinOp::Add || op == BinOp::Sub || op == BinOp::Mul || op == BinOp::Div || op == BinOp::Mod;
}
bool binop_is_compare(BinOp op) {
  return op == BinOp::Eq || op == BinOp::Neq || op == BinOp::Lt || op == BinOp::Le || op == BinOp::Gt ||
         op == BinOp::Ge;
}
bool binop_is_logic(BinOp op) {
  return op == BinOp::And || op == BinOp::Or || op == BinOp::Implies || op == BinOp::Iff;
}

// ---------------------------------------------------------------------------
// Patterns

PatternPtr pat_wild(Span s) {
  auto p = std::make_shared<Pattern>();
  p->kind = Pattern::Kind::Wild;
  p->span = s;
  return p;
}

PatternPtr pat_var(std::string n, TypePtr ty, Span s) {
  auto p = std::make_shared<Pattern>();
  p->kind = Pattern::Kind::Var;
  p->name = std::move(n);
  p->ty = std::move(ty);
  p->span = s;
  return p;
}

PatternPtr pat_ctor(std::string n, std::vector<PatternPtr> subs, TypePtr ty, Span s) {
  auto p = std::make_shared<Pattern>();
  p->kind = Pattern::Kind::Ctor;
  p->name = std::move(n);
  p->subs = std::move(subs);
  p->ty = std::move(ty);
  p->span = s;
  return p;
}

PatternPtr pat_tuple(std::vector<PatternPtr> subs, TypePtr ty, Span s) {
  auto p = std::make_shared<Pattern>();
  p->kind = Pattern::Kind::Tuple;
  p->subs = std::move(subs);
  p->ty = std::move(ty);
  p->span = s;
  return p;
}

void pattern_vars(const Pattern &p, std::vector<std::pair<std::string, TypePtr>> &out) {
  if (p.kind == Pattern::Kind::Var) out.emplace_back(p.name, p.ty);
  for (const auto &s : p.subs) pattern_vars(*s, out);
}

namespace {
std::string pattern_str_prec(const Pattern &p, int ctx) {
  switch (p.kind) {
    case Pattern::Kind::Wild: return "_";
    case Pattern::Kind::Var: return p.name;
    case Pattern::Kind::Unit: return "()";
    case Pattern::Kind::Int: return p.ival < 0 ? "(" + std::to_string(p.ival) + ")" : std::to_string(p.ival);
    case Pattern::Kind::Bool: return p.ival ? "true" : "false";
    case Pattern::Kind::Tuple: {
      std::string s = "(";
      for (size_t i = 0; i < p.subs.size(); ++i) {
        if (i) s += ", ";
        s += pattern_str_prec(*p.subs[i], 0);
      }
      return s + ")";
    }
    case Pattern::Kind::Ctor: {
      if (p.name == "::") {
        std::string s = pattern_str_prec(*p.subs[0], 2) + " :: " + pattern_str_prec(*p.subs[1], 1);
        return ctx > 1 ? "(" + s + ")" : s;
      }
      if (p.subs.empty()) return p.name;
      std::string s = p.name + " ";
      if (p.subs.size() == 1) {
        s += pattern_str_prec(*p.subs[0], 3);
      } else {
        s += "(";
        for (size_t i = 0; i < p.subs.size(); ++i) {
          if (i) s += ", ";
          s += pattern_str_prec(*p.subs[i], 0);
        }
        s += ")";
      }
      return ctx > 2 ? "(" + s + ")" : s;
    }
  }
  return "_";
}
}  // namespace

std::string pattern_str(const Pattern &p) { return pattern_str_prec(p, 0); }

// ---------------------------------------------------------------------------
// Constructors

namespace tm {
namespace {
std::shared_ptr<Term> mk(Term::Kind k) {
  auto t = std::make_shared<Term>();
  t->kind = k;
  return t;
}
}  // namespace

TermPtr int_(std::int64_t v) {
  auto t = mk(Term::Kind::Int);
  t->ival = v;
  t->ty = Type::int_();
  return t;
}
TermPtr bool_(bool v) {
  auto t = mk(Term::Kind::Bool);
  t->bval = v;
  t->ty = Type::bool_();
  return t;
}
TermPtr true_() {
  static const TermPtr t = bool_(true);
  return t;
}
TermPtr false_() {
  static const TermPtr t = bool_(false);
  return t;
}
TermPtr unit() {
  auto t = mk(Term::Kind::Unit);
  t->ty = Type::unit();
  return t;
}
TermPtr var(std::string n, TypePtr ty, Span s) {
  auto t = mk(Term::Kind::Var);
  t->name = std::move(n);
  t->ty = std::move(ty);
  t->span = s;
  return t;
}
TermPtr deref(std::string n, TypePtr ty, Span s) {
  auto t = mk(Term::Kind::Deref);
  t->name = std::move(n);
  t->ty = std::move(ty);
  t->span = s;
  return t;
}
TermPtr old(TermPtr x) {
  auto t = mk(Term::Kind::Old);
  t->ty = x->ty;
  t->span = x->span;
  t->kids = {std::move(x)};
  return t;
}
TermPtr app(std::string f, std::vector<TermPtr> args, TypePtr ty, Span s) {
  auto t = mk(Term::Kind::App);
  t->name = std::move(f);
  t->kids = std::move(args);
  t->ty = std::move(ty);
  t->span = s;
  return t;
}
TermPtr not_(TermPtr x) {
  auto t = mk(Term::Kind::Not);
  t->kids = {std::move(x)};
  t->ty = Type::bool_();
  return t;
}
TermPtr neg(TermPtr x) {
  auto t = mk(Term::Kind::Neg);
  t->kids = {std::move(x)};
  t->ty = Type::int_();
  return t;
}
TermPtr bin(BinOp op, TermPtr a, TermPtr b, TypePtr ty) {
  auto t = mk(Term::Kind::Bin);
  t->op = op;
  t->kids = {std::move(a), std::move(b)};
  if (!ty) ty = binop_is_arith(op) ? Type::int_() : Type::bool_();
  t->ty = std::move(ty);
  return t;
}
TermPtr and_(TermPtr a, TermPtr b) { return bin(BinOp::And, std::move(a), std::move(b)); }
TermPtr or_(TermPtr a, TermPtr b) { return bin(BinOp::Or, std::move(a), std::move(b)); }
TermPtr implies(TermPtr a, TermPtr b) { return bin(BinOp::Implies, std::move(a), std::move(b)); }
TermPtr iff(TermPtr a, TermPtr b) { return bin(BinOp::Iff, std::move(a), std::move(b)); }
TermPtr eq(TermPtr a, TermPtr b) { return bin(BinOp::Eq, std::move(a), std::move(b)); }
TermPtr ite(TermPtr c, TermPtr a, TermPtr b) {
  auto t = mk(Term::Kind::Ite);
  t->ty = a->ty ? a->ty : b->ty;
  t->kids = {std::move(c), std::move(a), std::move(b)};
  return t;
}
TermPtr forall(std::vector<Binder> bs, TermPtr body, std::vector<std::vector<TermPtr>> trig) {
  if (bs.empty()) return body;
  auto t = mk(Term::Kind::Forall);
  t->binders = std::move(bs);
  t->kids = {std::move(body)};
  t->triggers = std::move(trig);
  t->ty = Type::bool_();
  return t;
}
TermPtr exists(std::vector<Binder> bs, TermPtr body) {
  if (bs.empty()) return body;
  auto t = mk(Term::Kind::Exists);
  t->binders = std::move(bs);
  t->kids = {std::move(body)};
  t->ty = Type::bool_();
  return t;
}
TermPtr let(std::string n, TermPtr v, TermPtr body) {
  auto t = mk(Term::Kind::Let);
  t->name = std::move(n);
  t->ty = body->ty;
  t->kids = {std::move(v), std::move(body)};
  return t;
}
TermPtr match(TermPtr scrut, std::vector<TermCase> cases, TypePtr ty) {
  auto t = mk(Term::Kind::Match);
  t->kids = {std::move(scrut)};
  if (!ty && !cases.empty()) ty = cases.front().body->ty;
  t->cases = std::move(cases);
  t->ty = std::move(ty);
  return t;
}
TermPtr tuple(std::vector<TermPtr> items, TypePtr ty) {
  auto t = mk(Term::Kind::Tuple);
  if (!ty) {
    std::vector<TypePtr> ts;
    bool all = true;
    for (const auto &i : items) {
      if (!i->ty) all = false;
      ts.push_back(i->ty);
    }
    if (all) ty = Type::tuple(ts);
  }
  t->kids = std::move(items);
  t->ty = std::move(ty);
  return t;
}
TermPtr select(TermPtr arr, TermPtr idx, TypePtr ty) {
  auto t = mk(Term::Kind::Select);
  if (!ty && arr->ty && arr->ty->kind == Type::Kind::Array) ty = arr->ty->args[0];
  t->kids = {std::move(arr), std::move(idx)};
  t->ty = std::move(ty);
  return t;
}
TermPtr length(std::string arr) {
  auto t = mk(Term::Kind::Length);
  t->name = std::move(arr);
  t->ty = Type::int_();
  return t;
}
TermPtr valid(TermPtr k) {
  auto t = mk(Term::Kind::Valid);
  t->kids = {std::move(k)};
  t->ty = Type::bool_();
  return t;
}
TermPtr pre(TermPtr f, TermPtr arg, TermPtr state) {
  auto t = mk(Term::Kind::Pre);
  t->kids = {std::move(f), std::move(arg), std::move(state)};
  t->ty = Type::bool_();
  return t;
}
TermPtr post(TermPtr f, TermPtr arg, TermPtr old_state, TermPtr state, TermPtr res) {
  auto t = mk(Term::Kind::Post);
  t->kids = {std::move(f), std::move(arg), std::move(old_state), std::move(state), std::move(res)};
  t->ty = Type::bool_();
  return t;
}
TermPtr field(TermPtr rec, std::string x, TypePtr ty) {
  auto t = mk(Term::Kind::Field);
  t->kids = {std::move(rec)};
  t->name = std::move(x);
  t->ty = std::move(ty);
  return t;
}
TermPtr state_rec(std::vector<std::string> names, std::vector<TermPtr> vals) {
  auto t = mk(Term::Kind::StateRec);
  t->names = std::move(names);
  t->kids = std::move(vals);
  t->ty = Type::state();
  return t;
}

TermPtr conj(const std::vector<TermPtr> &ts) {
  // S(t :: xs) = t /\ S(xs); S(eps) = true, with the trailing `true` folded.
  TermPtr acc;
  for (auto it = ts.rbegin(); it != ts.rend(); ++it) acc = acc ? and_(*it, acc) : *it;
  return acc ? acc : true_();
}
}  // namespace tm

TermPtr with_type(const TermPtr &t, TypePtr ty) {
  auto c = std::make_shared<Term>(*t);
  c->ty = std::move(ty);
  return c;
}

TermPtr with_kids(const TermPtr &t, std::vector<TermPtr> kids) {
  auto c = std::make_shared<Term>(*t);
  c->kids = std::move(kids);
  return c;
}

bool is_true(const TermPtr &t) { return t && t->kind == Term::Kind::Bool && t->bval; }
bool is_false(const TermPtr &t) { return t && t->kind == Term::Kind::Bool && !t->bval; }

namespace {
bool pattern_equal(const PatternPtr &a, const PatternPtr &b) {
  if (a->kind != b->kind || a->name != b->name || a->ival != b->ival || a->subs.size() != b->subs.size())
    return false;
  for (size_t i = 0; i < a->subs.size(); ++i)
    if (!pattern_equal(a->subs[i], b->subs[i])) return false;
  return true;
}
}  // namespace

bool term_equal(const TermPtr &a, const TermPtr &b) {
  if (a == b) return true;
  if (!a || !b) return false;
  if (a->kind != b->kind || a->op != b->op || a->name != b->name || a->ival != b->ival || a->bval != b->bval ||
      a->names != b->names || a->kids.size() != b->kids.size() || a->binders.size() != b->binders.size() ||
      a->cases.size() != b->cases.size())
    return false;
  for (size_t i = 0; i < a->kids.size(); ++i)
    if (!term_equal(a->kids[i], b->kids[i])) return false;
  for (size_t i = 0; i < a->binders.size(); ++i)
    if (a->binders[i].first != b->binders[i].first || !type_equal(a->binders[i].second, b->binders[i].second))
      return false;
  for (size_t i = 0; i < a->cases.size(); ++i)
    if (!pattern_equal(a->cases[i].pat, b->cases[i].pat) || !term_equal(a->cases[i].body, b->cases[i].body))
      return false;
  return true;
}

// ---------------------------------------------------------------------------
// Printing

namespace {

// Precedence levels, loosest first.
enum Prec {
  kOpen = 0,   // forall, let, if, match
  kImpl = 1,   // -> <->
  kOr = 2,
  kAnd = 3,
  kNot = 4,
  kCmp = 5,
  kCons = 6,
  kAdd = 7,
  kMul = 8,
  kUnary = 9,
  kApp = 10,
  kPostfix = 11,
  kAtom = 12,
};

int binop_prec(BinOp op) {
  switch (op) {
    case BinOp::Implies:
    case BinOp::Iff: return kImpl;
    case BinOp::Or: return kOr;
    case BinOp::And: return kAnd;
    case BinOp::Add:
    case BinOp::Sub: return kAdd;
    case BinOp::Mul:
    case BinOp::Div:
    case BinOp::Mod: return kMul;
    default: return kCmp;
  }
}

bool is_ctor_name(const std::string &n) { return !n.empty() && std::isupper(static_cast<unsigned char>(n[0])); }

std::string str(const TermPtr &t, int ctx);

std::string wrap(std::string s, int prec, int ctx) { return prec < ctx ? "(" + s + ")" : s; }

std::string binders_str(const Term &t) {
  std::string s;
  for (size_t i = 0; i < t.binders.size(); ++i) {
    if (i) s += ", ";
    s += t.binders[i].first;
    if (t.binders[i].second) s += " : " + type_str(t.binders[i].second);
  }
  if (!t.triggers.empty()) {
    s += " [";
    for (size_t g = 0; g < t.triggers.size(); ++g) {
      if (g) s += " | ";
      for (size_t i = 0; i < t.triggers[g].size(); ++i) {
        if (i) s += ", ";
        s += str(t.triggers[g][i], kOpen);
      }
    }
    s += "]";
  }
  return s;
}

std::string str(const TermPtr &t, int ctx) {
  using K = Term::Kind;
  switch (t->kind) {
    case K::Int:
      if (t->ival < 0) return wrap(std::to_string(t->ival), kUnary, ctx);
      return std::to_string(t->ival);
    case K::Bool: return t->bval ? "true" : "false";
    case K::Unit: return "()";
    case K::Var: return t->name;
    case K::Deref: return "!" + t->name;
    case K::Old: return wrap("old " + str(t->kids[0], kPostfix), kApp, ctx);
    case K::App: {
      if (t->name == "[]" && t->kids.empty()) return "[]";
      if (t->name == "::" && t->kids.size() == 2)
        return wrap(str(t->kids[0], kCons + 1) + " :: " + str(t->kids[1], kCons), kCons, ctx);
      if (t->kids.empty()) return t->name;
      if (is_ctor_name(t->name)) {
        if (t->kids.size() == 1) return wrap(t->name + " " + str(t->kids[0], kPostfix), kApp, ctx);
        std::string s = t->name + " (";
        for (size_t i = 0; i < t->kids.size(); ++i) {
          if (i) s += ", ";
          s += str(t->kids[i], kImpl);
        }
        return wrap(s + ")", kApp, ctx);
      }
      std::string s = t->name;
      for (const auto &k : t->kids) s += " " + str(k, kPostfix);
      return wrap(s, kApp, ctx);
    }
    case K::Not: return wrap("not " + str(t->kids[0], kNot), kNot, ctx);
    case K::Neg: return wrap("-" + str(t->kids[0], kUnary + 1), kUnary, ctx);
    case K::Bin: {
      int p = binop_prec(t->op);
      int lp = p, rp = p + 1;
      if (t->op == BinOp::Implies || t->op == BinOp::And || t->op == BinOp::Or) {
        lp = p + 1;
        rp = p;
      }
      if (t->op == BinOp::Iff || binop_is_compare(t->op)) lp = rp = p + 1;
      return wrap(str(t->kids[0], lp) + " " + binop_str(t->op) + " " + str(t->kids[1], rp), p, ctx);
    }
    case K::Ite:
      return wrap("if " + str(t->kids[0], kOpen) + " then " + str(t->kids[1], kOpen) + " else " +
                      str(t->kids[2], kOpen),
                  kOpen, ctx);
    case K::Forall:
    case K::Exists:
      return wrap(std::string(t->kind == K::Forall ? "forall " : "exists ") + binders_str(*t) + ". " +
                      str(t->kids[0], kOpen),
                  kOpen, ctx);
    case K::Let:
      return wrap("let " + t->name + " = " + str(t->kids[0], kOpen) + " in " + str(t->kids[1], kOpen), kOpen,
                  ctx);
    case K::Match: {
      std::string s = "match " + str(t->kids[0], kOpen) + " with";
      for (const auto &c : t->cases) s += " | " + pattern_str(*c.pat) + " -> " + str(c.body, kImpl);
      s += " end";
      return s;
    }
    case K::Tuple: {
      std::string s = "(";
      for (size_t i = 0; i < t->kids.size(); ++i) {
        if (i) s += ", ";
        s += str(t->kids[i], kImpl);
      }
      return s + ")";
    }
    case K::Select: return str(t->kids[0], kPostfix) + "[" + str(t->kids[1], kOpen) + "]";
    case K::Length: return wrap("length " + t->name, kApp, ctx);
    case K::Valid: return wrap("valid " + str(t->kids[0], kPostfix), kApp, ctx);
    case K::Pre:
    case K::Post: {
      std::string s = t->kind == K::Pre ? "pre" : "post";
      for (const auto &k : t->kids) s += " " + str(k, kPostfix);
      return wrap(s, kApp, ctx);
    }
    case K::Field: return str(t->kids[0], kPostfix) + "._" + t->name;
    case K::StateRec: {
      if (t->names.empty()) return "{}";
      std::string s = "{";
      for (size_t i = 0; i < t->names.size(); ++i) {
        if (i) s += "; ";
        s += "_" + t->names[i] + " = " + str(t->kids[i], kImpl);
      }
      return s + "}";
    }
  }
  return "?";
}

void collect_free(const TermPtr &t, std::set<std::string> &bound, std::set<std::string> &out) {
  if (!t) return;
  using K = Term::Kind;
  switch (t->kind) {
    case K::Var:
      if (!bound.count(t->name)) out.insert(t->name);
      return;
    case K::Forall:
    case K::Exists: {
      std::set<std::string> b2 = bound;
      for (const auto &[n, _] : t->binders) b2.insert(n);
      for (const auto &k : t->kids) collect_free(k, b2, out);
      for (const auto &g : t->triggers)
        for (const auto &x : g) collect_free(x, b2, out);
      return;
    }
    case K::Let: {
      collect_free(t->kids[0], bound, out);
      std::set<std::string> b2 = bound;
      b2.insert(t->name);
      collect_free(t->kids[1], b2, out);
      return;
    }
    case K::Match: {
      collect_free(t->kids[0], bound, out);
      for (const auto &c : t->cases) {
        std::set<std::string> b2 = bound;
        std::vector<std::pair<std::string, TypePtr>> vs;
        pattern_vars(*c.pat, vs);
        for (const auto &[n, _] : vs) b2.insert(n);
        collect_free(c.body, b2, out);
      }
      return;
    }
    default:
      for (const auto &k : t->kids) collect_free(k, bound, out);
  }
}

TermPtr subst_rec(const TermPtr &t, const std::map<std::string, TermPtr> &m) {
  if (!t || m.empty()) return t;
  using K = Term::Kind;
  auto drop = [&](const std::vector<std::string> &names) {
    std::map<std::string, TermPtr> m2 = m;
    for (const auto &n : names) m2.erase(n);
    return m2;
  };
  switch (t->kind) {
    case K::Var: {
      auto it = m.find(t->name);
      return it == m.end() ? t : it->second;
    }
    case K::Forall:
    case K::Exists: {
      std::vector<std::string> names;
      for (const auto &[n, _] : t->binders) names.push_back(n);
      auto m2 = drop(names);
      auto c = std::make_shared<Term>(*t);
      for (auto &k : c->kids) k = subst_rec(k, m2);
      for (auto &g : c->triggers)
        for (auto &x : g) x = subst_rec(x, m2);
      return c;
    }
    case K::Let: {
      auto c = std::make_shared<Term>(*t);
      c->kids[0] = subst_rec(t->kids[0], m);
      c->kids[1] = subst_rec(t->kids[1], drop({t->name}));
      return c;
    }
    case K::Match: {
      auto c = std::make_shared<Term>(*t);
      c->kids[0] = subst_rec(t->kids[0], m);
      for (auto &cs : c->cases) {
        std::vector<std::pair<std::string, TypePtr>> vs;
        pattern_vars(*cs.pat, vs);
        std::vector<std::string> names;
        for (const auto &[n, _] : vs) names.push_back(n);
        cs.body = subst_rec(cs.body, drop(names));
      }
      return c;
    }
    default: {
      if (t->kids.empty()) return t;
      std::vector<TermPtr> kids;
      bool changed = false;
      for (const auto &k : t->kids) {
        kids.push_back(subst_rec(k, m));
        changed |= kids.back() != k;
      }
      return changed ? with_kids(t, std::move(kids)) : t;
    }
  }
}

}  // namespace

std::string term_str(const TermPtr &t) {
  if (!t) return "<null>";
  return str(t, kOpen);
}

std::set<std::string> free_vars(const TermPtr &t) {
  std::set<std::string> bound, out;
  collect_free(t, bound, out);
  return out;
}

TermPtr subst(const TermPtr &t, const std::map<std::string, TermPtr> &m) { return subst_rec(t, m); }

}  // namespace effv
