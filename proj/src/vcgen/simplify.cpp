#include <fmt/format.h>

#include "vcgen/vcgen.hpp"

namespace effv {

namespace {

using K = Term::Kind;

bool is_ctor_name(const IrProgram &p, const std::string &n) { return n == "[]" || n == "::" || p.ctors.count(n); }

bool is_ctor_app(const IrProgram &p, const TermPtr &t) { return t->kind == K::App && is_ctor_name(p, t->name); }

void conjuncts(const TermPtr &t, std::vector<TermPtr> &out) {
  if (t->kind == K::Bin && t->op == BinOp::And) {
    conjuncts(t->kids[0], out);
    conjuncts(t->kids[1], out);
  } else {
    out.push_back(t);
  }
}

bool contains(const std::vector<TermPtr> &ts, const TermPtr &t) {
  for (const auto &x : ts)
    if (term_equal(x, t)) return true;
  return false;
}

class Simplifier {
 public:
  explicit Simplifier(const IrProgram &p) : p_(p) {
    for (const auto &d : p.decls) {
      if (d.kind != IrDecl::Kind::Routine || !d.routine || d.routine->role != Routine::Role::Perform) continue;
      for (const auto &t : d.routine->requires_) inline_.insert(t->name);
      for (const auto &t : d.routine->ensures) inline_.insert(t->name);
    }
  }

  TermPtr run(TermPtr t) {
    for (int i = 0; i < 12; ++i) {
      TermPtr next = rewrite(t, [&](const TermPtr &x) { return step(x); });
      if (term_equal(next, t)) return next;
      t = next;
    }
    return t;
  }

 private:
  // Renames binders of t that clash with `avoid` so that substituting terms
  // mentioning those names cannot capture them.
  TermPtr freshen(const TermPtr &t, const std::set<std::string> &avoid) {
    if (!t) return t;
    auto rename = [&](const std::string &n) { return fmt::format("{}!{}", n, ++fresh_); };
    switch (t->kind) {
      case K::Forall:
      case K::Exists: {
        auto c = std::make_shared<Term>(*t);
        std::map<std::string, TermPtr> m;
        for (auto &[n, ty] : c->binders)
          if (avoid.count(n)) {
            std::string nn = rename(n);
            m[n] = tm::var(nn, ty);
            n = nn;
          }
        for (auto &k : c->kids) k = freshen(subst(k, m), avoid);
        for (auto &g : c->triggers)
          for (auto &x : g) x = freshen(subst(x, m), avoid);
        return c;
      }
      case K::Let: {
        auto c = std::make_shared<Term>(*t);
        c->kids[0] = freshen(t->kids[0], avoid);
        TermPtr body = t->kids[1];
        if (avoid.count(t->name)) {
          c->name = rename(t->name);
          body = subst(body, {{t->name, tm::var(c->name, t->kids[0]->ty)}});
        }
        c->kids[1] = freshen(body, avoid);
        return c;
      }
      case K::Match: {
        auto c = std::make_shared<Term>(*t);
        c->kids[0] = freshen(t->kids[0], avoid);
        for (auto &cs : c->cases) {
          std::vector<std::pair<std::string, TypePtr>> vs;
          pattern_vars(*cs.pat, vs);
          std::map<std::string, TermPtr> m;
          std::map<std::string, std::string> names;
          for (const auto &[n, ty] : vs)
            if (avoid.count(n)) {
              names[n] = rename(n);
              m[n] = tm::var(names[n], ty);
            }
          if (!m.empty()) cs.pat = rename_pattern(cs.pat, names);
          cs.body = freshen(subst(cs.body, m), avoid);
        }
        return c;
      }
      default: {
        if (t->kids.empty()) return t;
        auto c = std::make_shared<Term>(*t);
        for (auto &k : c->kids) k = freshen(k, avoid);
        return c;
      }
    }
  }

  static PatternPtr rename_pattern(const PatternPtr &p, const std::map<std::string, std::string> &names) {
    auto c = std::make_shared<Pattern>(*p);
    if (c->kind == Pattern::Kind::Var)
      if (auto it = names.find(c->name); it != names.end()) c->name = it->second;
    for (auto &s : c->subs) s = rename_pattern(s, names);
    return c;
  }

  std::set<std::string> fv_of(const std::vector<TermPtr> &ts) {
    std::set<std::string> out;
    for (const auto &t : ts)
      for (const auto &v : free_vars(t)) out.insert(v);
    return out;
  }

  TermPtr substitute(const TermPtr &body, const std::map<std::string, TermPtr> &m) {
    std::vector<TermPtr> vals;
    for (const auto &[_, v] : m) vals.push_back(v);
    return subst(freshen(body, fv_of(vals)), m);
  }

  // Binds pattern variables when `s` is known to match; false when it cannot.
  std::optional<bool> match_pattern(const Pattern &pat, const TermPtr &s, std::map<std::string, TermPtr> &m) {
    switch (pat.kind) {
      case Pattern::Kind::Wild:
      case Pattern::Kind::Unit: return true;
      case Pattern::Kind::Var: m[pat.name] = s; return true;
      case Pattern::Kind::Int:
        if (s->kind == K::Int) return s->ival == pat.ival;
        return std::nullopt;
      case Pattern::Kind::Bool:
        if (s->kind == K::Bool) return s->bval == (pat.ival != 0);
        return std::nullopt;
      case Pattern::Kind::Tuple: {
        if (s->kind != K::Tuple) return std::nullopt;
        for (size_t i = 0; i < pat.subs.size(); ++i) {
          auto r = match_pattern(*pat.subs[i], s->kids[i], m);
          if (!r || !*r) return r;
        }
        return true;
      }
      case Pattern::Kind::Ctor: {
        if (!is_ctor_app(p_, s)) return std::nullopt;
        if (s->name != pat.name) return false;
        for (size_t i = 0; i < pat.subs.size(); ++i) {
          auto r = match_pattern(*pat.subs[i], s->kids[i], m);
          if (!r || !*r) return r;
        }
        return true;
      }
    }
    return std::nullopt;
  }

  TermPtr step(const TermPtr &t) {
    switch (t->kind) {
      case K::Not: {
        const TermPtr &a = t->kids[0];
        if (a->kind == K::Bool) return tm::bool_(!a->bval);
        if (a->kind == K::Not) return a->kids[0];
        return nullptr;
      }
      case K::Neg:
        if (t->kids[0]->kind == K::Int) return tm::int_(-t->kids[0]->ival);
        return nullptr;
      case K::Bin: return bin(t);
      case K::Ite:
        if (is_true(t->kids[0])) return t->kids[1];
        if (is_false(t->kids[0])) return t->kids[2];
        if (term_equal(t->kids[1], t->kids[2])) return t->kids[1];
        return nullptr;
      case K::Let: return substitute(t->kids[1], {{t->name, t->kids[0]}});
      case K::Match: {
        for (const auto &c : t->cases) {
          std::map<std::string, TermPtr> m;
          auto r = match_pattern(*c.pat, t->kids[0], m);
          if (!r) return nullptr;
          if (*r) return substitute(c.body, m);
        }
        return nullptr;
      }
      case K::Field: {
        const TermPtr &r = t->kids[0];
        if (r->kind != K::StateRec) return nullptr;
        for (size_t i = 0; i < r->names.size(); ++i)
          if (r->names[i] == t->name) return r->kids[i];
        return nullptr;
      }
      case K::App: return app(t);
      case K::Forall:
      case K::Exists: {
        const TermPtr &body = t->kids[0];
        if (body->kind == K::Bool) return body;
        std::set<std::string> fv = free_vars(body);
        std::vector<Binder> keep;
        for (const auto &b : t->binders)
          if (fv.count(b.first)) keep.push_back(b);
        if (keep.empty()) return body;
        if (keep.size() == t->binders.size()) return nullptr;
        auto c = std::make_shared<Term>(*t);
        c->binders = keep;
        c->triggers.clear();
        return c;
      }
      default: return nullptr;
    }
  }

  TermPtr app(const TermPtr &t) {
    if (inline_.count(t->name)) {
      auto it = p_.logic.find(t->name);
      if (it != p_.logic.end() && it->second->body && it->second->params.size() == t->kids.size()) {
        std::map<std::string, TermPtr> m;
        for (size_t i = 0; i < t->kids.size(); ++i) m[it->second->params[i].first] = t->kids[i];
        return substitute(it->second->body, m);
      }
    }
    if (t->kids.size() != 1) return nullptr;
    const TermPtr &a = t->kids[0];
    if (t->name.rfind("is:", 0) == 0 && is_ctor_app(p_, a)) return tm::bool_(a->name == t->name.substr(3));
    if (t->name.rfind("sel:", 0) == 0 && is_ctor_app(p_, a)) {
      auto colon = t->name.rfind(':');
      std::string ctor = t->name.substr(4, colon - 4);
      size_t i = std::stoul(t->name.substr(colon + 1));
      if (a->name == ctor && i < a->kids.size()) return a->kids[i];
      return nullptr;
    }
    if (t->name.rfind("proj:", 0) == 0 && a->kind == K::Tuple) return a->kids[std::stoul(t->name.substr(5))];
    return nullptr;
  }

  TermPtr bin(const TermPtr &t) {
    const TermPtr &a = t->kids[0], &b = t->kids[1];
    switch (t->op) {
      case BinOp::And:
        if (is_true(a)) return b;
        if (is_true(b)) return a;
        if (is_false(a) || is_false(b)) return tm::false_();
        if (term_equal(a, b)) return a;
        return nullptr;
      case BinOp::Or:
        if (is_false(a)) return b;
        if (is_false(b)) return a;
        if (is_true(a) || is_true(b)) return tm::true_();
        if (term_equal(a, b)) return a;
        return nullptr;
      case BinOp::Implies: {
        if (is_true(a)) return b;
        if (is_false(a) || is_true(b)) return tm::true_();
        if (is_false(b)) return tm::not_(a);
        std::vector<TermPtr> hs, gs, rest;
        conjuncts(a, hs);
        if (contains(hs, tm::false_())) return tm::true_();
        conjuncts(b, gs);
        for (const auto &g : gs)
          if (!contains(hs, g)) rest.push_back(g);
        if (rest.empty()) return tm::true_();
        if (rest.size() < gs.size()) return tm::implies(a, tm::conj(rest));
        return nullptr;
      }
      case BinOp::Iff:
        if (is_true(a)) return b;
        if (is_true(b)) return a;
        if (term_equal(a, b)) return tm::true_();
        return nullptr;
      case BinOp::Eq: return eq(a, b);
      case BinOp::Neq: {
        TermPtr e = eq(a, b);
        if (e && e->kind == K::Bool) return tm::bool_(!e->bval);
        return nullptr;
      }
      default: break;
    }
    if (a->kind != K::Int || b->kind != K::Int) return nullptr;
    std::int64_t x = a->ival, y = b->ival;
    switch (t->op) {
      case BinOp::Add: return tm::int_(x + y);
      case BinOp::Sub: return tm::int_(x - y);
      case BinOp::Mul: return tm::int_(x * y);
      case BinOp::Div: return y ? tm::int_(x / y) : nullptr;
      case BinOp::Mod: return y ? tm::int_(x % y) : nullptr;
      case BinOp::Lt: return tm::bool_(x < y);
      case BinOp::Le: return tm::bool_(x <= y);
      case BinOp::Gt: return tm::bool_(x > y);
      case BinOp::Ge: return tm::bool_(x >= y);
      default: return nullptr;
    }
  }

  TermPtr eq(const TermPtr &a, const TermPtr &b) {
    if (term_equal(a, b)) return tm::true_();
    if (a->kind == K::Int && b->kind == K::Int) return tm::bool_(a->ival == b->ival);
    if (a->kind == K::Bool && b->kind == K::Bool) return tm::bool_(a->bval == b->bval);
    auto fields = [&](const TermPtr &x, const TermPtr &y) {
      std::vector<TermPtr> eqs;
      for (size_t i = 0; i < x->kids.size(); ++i) eqs.push_back(tm::eq(x->kids[i], y->kids[i]));
      return tm::conj(eqs);
    };
    if (a->kind == K::StateRec && b->kind == K::StateRec && a->names == b->names) return fields(a, b);
    if (a->kind == K::Tuple && b->kind == K::Tuple && a->kids.size() == b->kids.size()) return fields(a, b);
    if (is_ctor_app(p_, a) && is_ctor_app(p_, b)) {
      if (a->name != b->name) return tm::false_();
      return fields(a, b);
    }
    return nullptr;
  }

  const IrProgram &p_;
  std::set<std::string> inline_;
  int fresh_ = 0;
};

}  // namespace

TermPtr simplify_term(const TermPtr &t, const IrProgram &p) { return Simplifier(p).run(t); }

VC simplify(const VC &vc, const IrProgram &p) {
  VC out = vc;
  out.goal = simplify_term(vc.goal, p);
  out.trivial = vc.trivial;
  return out;
}

}  // namespace effv
