#include "vcgen/vcgen.hpp"

#include <fmt/format.h>

#include <functional>

namespace effv {

const char *obligation_str(Obligation o) {
  switch (o) {
    case Obligation::Postcondition: return "postcondition";
    case Obligation::PreconditionAtCall: return "precondition-at-call";
    case Obligation::RaisesAtPerform: return "raises-at-perform";
    case Obligation::ContinuationValidity: return "continuation-validity";
    case Obligation::ContinuationPrecondition: return "continuation-precondition";
    case Obligation::HandlerInvariantNormal: return "handler-invariant-normal";
    case Obligation::HandlerInvariantExceptional: return "handler-invariant-exceptional";
    case Obligation::VariantDecrease: return "variant-decrease";
    case Obligation::WritesFrame: return "writes-frame";
  }
  return "?";
}

namespace {

using Store = std::map<std::string, TermPtr>;
using Env = std::map<std::string, TermPtr>;
// Routines in scope, with the bindings visible where they were defined.
struct Bound {
  RoutinePtr r;
  std::map<std::string, TermPtr> env;
};
using Scope = std::map<std::string, Bound>;

struct Path {
  std::vector<TermPtr> hyps;
  Store store;
  std::map<std::string, TermPtr> validity;  // continuation constant -> flag
};

struct Outcome {
  Path path;
  bool exc = false;
  std::string exn;
  TermPtr value;  // result, or exception payload
  bool from_branch = false;
};
using Outs = std::vector<Outcome>;

struct Frame {
  const Routine *r;
  Env env;
  Store entry;
};

bool atomic(const TermPtr &t) {
  using K = Term::Kind;
  return t->kind == K::Var || t->kind == K::Int || t->kind == K::Bool || t->kind == K::Unit;
}

TermPtr disj(const std::vector<TermPtr> &ts) {
  TermPtr acc;
  for (auto it = ts.rbegin(); it != ts.rend(); ++it) acc = acc ? tm::or_(*it, acc) : *it;
  return acc ? acc : tm::false_();
}

class VcGen {
 public:
  explicit VcGen(const IrProgram &p) : p_(p) {}

  std::vector<VC> run() {
    Scope scope;
    for (const auto &d : p_.decls) {
      if (d.kind != IrDecl::Kind::Routine || !d.routine) continue;
      if (d.routine->body) {
        top_ = d.routine->name;
        where_ = {top_};
        seq_ = 0;
        verify(d.routine, Path{}, Env{}, scope, false);
      }
      scope[d.routine->name] = Bound{d.routine, {}};
    }
    return std::move(vcs_);
  }

 private:
  // ---- symbolic values ----------------------------------------------------------
  TermPtr fresh(const std::string &base, const TypePtr &ty) {
    if (!ty) fail(ErrorKind::Internal, {}, fmt::format("untyped symbolic value for '{}'", base));
    std::string n = fmt::format("{}@{}", base, ++counter_);
    consts_.emplace_back(n, ty);
    return tm::var(n, ty);
  }

  TypePtr var_type(const StateVar &v) const { return v.is_array ? v.ty : v.elem; }

  TermPtr state_term(const Store &s) const {
    std::vector<std::string> names;
    std::vector<TermPtr> vals;
    for (const auto &v : p_.state.vars) {
      names.push_back(v.name);
      vals.push_back(s.at(v.name));
    }
    return tm::state_rec(names, vals);
  }

  void havoc(Path &p, const std::vector<std::string> &vars) {
    for (const auto &x : vars) {
      const StateVar *v = p_.state.find(x);
      if (v) p.store[x] = fresh(x, var_type(*v));
    }
  }

  void havoc_all(Path &p) {
    for (const auto &v : p_.state.vars) p.store[v.name] = fresh(v.name, var_type(v));
  }

  TermPtr name_value(Path &p, const std::string &base, const TermPtr &t) {
    if (atomic(t)) return t;
    TermPtr c = fresh(base == "_" ? "v" : base, t->ty);
    p.hyps.push_back(tm::eq(c, t));
    return c;
  }

  TermPtr validity_of(const Path &p, const TermPtr &k) const {
    if (k->kind == Term::Kind::Var)
      if (auto it = p.validity.find(k->name); it != p.validity.end()) return it->second;
    return tm::valid(k);
  }

  // ---- contracts ----------------------------------------------------------------
  struct SpecCtx {
    const Env &env;
    const Store &cur;
    const Store *old;
    const Path &path;
  };

  TermPtr spec(const TermPtr &t, const Env &env, const Store &cur, const Store *old, const Path &path) {
    SpecCtx c{env, cur, old, path};
    return conv(t, c, {});
  }

  TermPtr conv(const TermPtr &t, const SpecCtx &c, const std::set<std::string> &bound) {
    using K = Term::Kind;
    switch (t->kind) {
      case K::Var: {
        if (bound.count(t->name)) return t;
        if (auto it = c.env.find(t->name); it != c.env.end()) return it->second;
        const StateVar *v = p_.state.find(t->name);
        if (v && v->is_array) return c.cur.at(t->name);
        fail(ErrorKind::VcGen, t->span, fmt::format("unbound name '{}' in a contract", t->name));
      }
      case K::Deref: return c.cur.at(t->name);
      case K::Old: {
        if (!c.old) fail(ErrorKind::VcGen, t->span, "'old' used where no entry state is in scope");
        SpecCtx o{c.env, *c.old, c.old, c.path};
        return conv(t->kids[0], o, bound);
      }
      case K::Length: {
        const StateVar *v = p_.state.find(t->name);
        return tm::int_(v ? v->size : 0);
      }
      case K::Valid: return validity_of(c.path, conv(t->kids[0], c, bound));
      case K::Forall:
      case K::Exists: {
        std::set<std::string> b2 = bound;
        for (const auto &[n, _] : t->binders) b2.insert(n);
        auto x = std::make_shared<Term>(*t);
        for (auto &k : x->kids) k = conv(k, c, b2);
        for (auto &g : x->triggers)
          for (auto &y : g) y = conv(y, c, b2);
        return x;
      }
      case K::Let: {
        auto x = std::make_shared<Term>(*t);
        x->kids[0] = conv(t->kids[0], c, bound);
        std::set<std::string> b2 = bound;
        b2.insert(t->name);
        x->kids[1] = conv(t->kids[1], c, b2);
        return x;
      }
      case K::Match: {
        auto x = std::make_shared<Term>(*t);
        x->kids[0] = conv(t->kids[0], c, bound);
        for (auto &cs : x->cases) {
          std::set<std::string> b2 = bound;
          std::vector<std::pair<std::string, TypePtr>> vs;
          pattern_vars(*cs.pat, vs);
          for (const auto &[n, _] : vs) b2.insert(n);
          cs.body = conv(cs.body, c, b2);
        }
        return x;
      }
      default: {
        if (t->kids.empty()) return t;
        auto x = std::make_shared<Term>(*t);
        for (auto &k : x->kids) k = conv(k, c, bound);
        return x;
      }
    }
  }

  // ---- obligations --------------------------------------------------------------
  TermPtr close(const TermPtr &g) const {
    std::set<std::string> fv = free_vars(g);
    std::vector<Binder> bs;
    for (const auto &b : consts_)
      if (fv.erase(b.first)) bs.push_back(b);
    if (!fv.empty()) fail(ErrorKind::Internal, {}, fmt::format("goal has free name '{}'", *fv.begin()));
    return bs.empty() ? g : tm::forall(bs, g);
  }

  void emit(const Path &p, const TermPtr &goal, Obligation kind, Span span) {
    TermPtr g = p.hyps.empty() ? goal : tm::implies(tm::conj(p.hyps), goal);
    std::string where;
    for (const auto &w : where_) where += (where.empty() ? "" : ".") + w;
    VC vc{fmt::format("{}.{}", where, ++seq_), close(g), top_, kind, span, false};
    // Trivial means valid on its own, whatever the path establishes.
    if (is_true(simplify_term(goal, p_))) {
      vc.goal = tm::true_();
      vc.trivial = true;
      vcs_.push_back(vc);
      return;
    }
    vcs_.push_back(simplify(vc, p_));
  }

  // ---- routines -----------------------------------------------------------------
  void verify(const RoutinePtr &rp, Path path, Env env, Scope scope, bool inline_handler) {
    const Routine &r = *rp;
    const Env env_before = env;
    if (!inline_handler) {
      havoc_all(path);
      for (auto &[k, v] : path.validity) v = fresh("valid", Type::bool_());
      for (const auto &prm : r.params)
        if (prm.name != "_") env[prm.name] = fresh(prm.name, prm.ty);
      where_.push_back(r.name);
    } else {
      where_.push_back(r.name);
    }
    if (r.rec) scope[r.name] = Bound{rp, env_before};
    Store entry = path.store;
    for (const auto &req : r.requires_) path.hyps.push_back(spec(req, env, path.store, nullptr, path));
    frames_.push_back(Frame{&r, env, entry});
    Outs outs = eval(r.body, path, env, scope);
    frames_.pop_back();

    bool handler = r.role == Routine::Role::Handler;
    for (const auto &o : outs) {
      if (!o.exc) {
        Env e2 = env;
        e2["result"] = o.value;
        std::vector<TermPtr> goals;
        for (const auto &ens : r.ensures) goals.push_back(spec(ens, e2, o.path.store, &entry, o.path));
        Obligation kind = !handler         ? Obligation::Postcondition
                          : o.from_branch ? Obligation::HandlerInvariantExceptional
                                          : Obligation::HandlerInvariantNormal;
        emit(o.path, tm::conj(goals), kind, r.span);
        if (r.writes_explicit) {
          std::set<std::string> w(r.writes.begin(), r.writes.end());
          std::vector<TermPtr> eqs;
          for (const auto &v : p_.state.vars)
            if (!w.count(v.name)) eqs.push_back(tm::eq(o.path.store.at(v.name), entry.at(v.name)));
          emit(o.path, tm::conj(eqs), Obligation::WritesFrame, r.span);
        }
      } else {
        TermPtr goal = tm::false_();
        for (const auto &rc : r.raises)
          if (rc.exn == o.exn) {
            Env e2 = env;
            e2[rc.binder] = o.value;
            goal = spec(rc.cond, e2, o.path.store, &entry, o.path);
          }
        emit(o.path, goal, Obligation::RaisesAtPerform, r.span);
      }
    }
    where_.pop_back();
  }

  // ---- expressions --------------------------------------------------------------
  static Outcome normal(Path p, TermPtr v) {
    Outcome o;
    o.path = std::move(p);
    o.value = std::move(v);
    return o;
  }

  template <class F>
  Outs then(Outs outs, F &&f) {
    Outs res;
    for (auto &o : outs) {
      if (o.exc) {
        res.push_back(std::move(o));
        continue;
      }
      Outs next = f(std::move(o.path), o.value);
      for (auto &n : next) res.push_back(std::move(n));
    }
    return res;
  }

  Outs eval_list(const std::vector<IrExprPtr> &kids, size_t i, Path path, std::vector<TermPtr> vals,
                 const Env &env, const Scope &scope,
                 const std::function<Outs(Path, std::vector<TermPtr>)> &k) {
    if (i == kids.size()) return k(std::move(path), std::move(vals));
    return then(eval(kids[i], std::move(path), env, scope), [&](Path p, TermPtr v) {
      std::vector<TermPtr> vs = vals;
      vs.push_back(v);
      return eval_list(kids, i + 1, std::move(p), std::move(vs), env, scope, k);
    });
  }

  Outs all_kids(const IrExprPtr &e, Path path, const Env &env, const Scope &scope,
                const std::function<Outs(Path, std::vector<TermPtr>)> &k) {
    return eval_list(e->kids, 0, std::move(path), {}, env, scope, k);
  }

  TermPtr lookup(const Env &env, const std::string &n, Span s) const {
    auto it = env.find(n);
    if (it == env.end()) fail(ErrorKind::VcGen, s, fmt::format("unbound variable '{}'", n));
    return it->second;
  }

  void bounds(const Path &p, const std::string &arr, const TermPtr &idx, Span s) {
    const StateVar *v = p_.state.find(arr);
    TermPtr ok = tm::and_(tm::bin(BinOp::Le, tm::int_(0), idx, Type::bool_()),
                          tm::bin(BinOp::Lt, idx, tm::int_(v->size), Type::bool_()));
    emit(p, ok, Obligation::PreconditionAtCall, s);
  }

  Outs eval(const IrExprPtr &e, Path path, const Env &env, const Scope &scope) {
    using K = IrExpr::Kind;
    switch (e->kind) {
      case K::Lit: return {normal(std::move(path), e->term)};
      case K::Var: return {normal(std::move(path), lookup(env, e->name, e->span))};
      case K::Deref: {
        TermPtr v = path.store.at(e->name);
        return {normal(std::move(path), v)};
      }
      case K::Snapshot: {
        TermPtr s = state_term(path.store);
        return {normal(std::move(path), s)};
      }
      case K::Assume:
        path.hyps.push_back(spec(e->term, env, path.store, nullptr, path));
        return {normal(std::move(path), tm::unit())};
      case K::Assign:
        return all_kids(e, std::move(path), env, scope, [&](Path p, std::vector<TermPtr> v) {
          p.store[e->name] = name_value(p, e->name, v[0]);
          return Outs{normal(std::move(p), tm::unit())};
        });
      case K::ArrGet:
        return all_kids(e, std::move(path), env, scope, [&](Path p, std::vector<TermPtr> v) {
          bounds(p, e->name, v[0], e->span);
          TermPtr x = tm::select(p.store.at(e->name), v[0], e->ty);
          return Outs{normal(std::move(p), x)};
        });
      case K::ArrSet:
        return all_kids(e, std::move(path), env, scope, [&](Path p, std::vector<TermPtr> v) {
          bounds(p, e->name, v[0], e->span);
          TermPtr a = p.store.at(e->name);
          p.store[e->name] = name_value(p, e->name, tm::app("store", {a, v[0], v[1]}, a->ty));
          return Outs{normal(std::move(p), tm::unit())};
        });
      case K::Unop:
        return all_kids(e, std::move(path), env, scope, [&](Path p, std::vector<TermPtr> v) {
          TermPtr x = e->name == "not" ? tm::not_(v[0]) : tm::neg(v[0]);
          return Outs{normal(std::move(p), x)};
        });
      case K::Binop:
        return all_kids(e, std::move(path), env, scope, [&](Path p, std::vector<TermPtr> v) {
          TermPtr x;
          switch (e->op) {
            case BinOp::Div:
            case BinOp::Mod:
              emit(p, tm::not_(tm::eq(v[1], tm::int_(0))), Obligation::PreconditionAtCall, e->span);
              x = tm::bin(e->op, v[0], v[1], Type::int_());
              break;
            case BinOp::Eq: x = tm::eq(v[0], v[1]); break;
            case BinOp::Neq: x = tm::not_(tm::eq(v[0], v[1])); break;
            default: x = tm::bin(e->op, v[0], v[1], e->ty); break;
          }
          return Outs{normal(std::move(p), x)};
        });
      case K::Ctor:
        return all_kids(e, std::move(path), env, scope, [&](Path p, std::vector<TermPtr> v) {
          return Outs{normal(std::move(p), tm::app(e->name, v, e->ty))};
        });
      case K::Tuple:
        return all_kids(e, std::move(path), env, scope, [&](Path p, std::vector<TermPtr> v) {
          return Outs{normal(std::move(p), tm::tuple(v, e->ty))};
        });
      case K::Let:
        return then(eval(e->kids[0], std::move(path), env, scope), [&](Path p, TermPtr v) {
          Env e2 = env;
          if (e->name != "_") e2[e->name] = name_value(p, e->name, v);
          return eval(e->kids[1], std::move(p), e2, scope);
        });
      case K::Seq:
        return then(eval(e->kids[0], std::move(path), env, scope),
                    [&](Path p, TermPtr) { return eval(e->kids[1], std::move(p), env, scope); });
      case K::If:
        return then(eval(e->kids[0], std::move(path), env, scope), [&](Path p, TermPtr c) {
          if (is_true(c)) return eval(e->kids[1], std::move(p), env, scope);
          if (is_false(c)) return eval(e->kids[2], std::move(p), env, scope);
          size_t base = p.hyps.size();
          Path a = p, b = p;
          a.hyps.push_back(c);
          b.hyps.push_back(tm::not_(c));
          Outs all = eval(e->kids[1], std::move(a), env, scope);
          for (auto &o : eval(e->kids[2], std::move(b), env, scope)) all.push_back(std::move(o));
          return join(base, std::move(all));
        });
      case K::Match:
        return then(eval(e->kids[0], std::move(path), env, scope), [&](Path p, TermPtr s) {
          size_t base = p.hyps.size();
          Outs all;
          std::vector<TermPtr> earlier;
          for (const auto &c : e->cases) {
            Env e2 = env;
            TermPtr cond = pattern(*c.pat, s, e2);
            Path q = p;
            for (const auto &x : earlier) q.hyps.push_back(tm::not_(x));
            if (!is_true(cond)) q.hyps.push_back(cond);
            for (auto &o : eval(c.body, std::move(q), e2, scope)) all.push_back(std::move(o));
            earlier.push_back(cond);
            if (is_true(cond)) break;
          }
          return join(base, std::move(all));
        });
      case K::LetRoutine: {
        const RoutinePtr &r = e->routine;
        Scope s2 = scope;
        s2[r->name] = Bound{r, env};
        if (r->body) verify(r, path, env, scope, r->role == Routine::Role::Handler);
        return eval(e->kids[0], std::move(path), env, s2);
      }
      case K::Call: {
        auto it = scope.find(e->name);
        if (it == scope.end()) fail(ErrorKind::VcGen, e->span, fmt::format("call of unknown routine '{}'", e->name));
        const Bound &b = it->second;
        return all_kids(e, std::move(path), env, scope,
                        [&](Path p, std::vector<TermPtr> v) { return call(*b.r, b.env, e, std::move(p), v); });
      }
      case K::Apply: {
        TermPtr g = lookup(env, e->name, e->span);
        return all_kids(e, std::move(path), env, scope, [&](Path p, std::vector<TermPtr> v) {
          TermPtr s0 = state_term(p.store);
          emit(p, tm::pre(g, v[0], s0), Obligation::PreconditionAtCall, e->span);
          havoc_all(p);
          for (auto &[k, f] : p.validity) f = fresh("valid", Type::bool_());
          TermPtr r = fresh("apply", e->ty);
          p.hyps.push_back(tm::post(g, v[0], s0, state_term(p.store), r));
          return Outs{normal(std::move(p), r)};
        });
      }
      case K::Continue: {
        TermPtr k = lookup(env, e->name, e->span);
        return all_kids(e, std::move(path), env, scope, [&](Path p, std::vector<TermPtr> v) {
          emit(p, validity_of(p, k), Obligation::ContinuationValidity, e->span);
          TermPtr s0 = state_term(p.store);
          emit(p, tm::pre(k, v[0], s0), Obligation::ContinuationPrecondition, e->span);
          if (k->kind == Term::Kind::Var) p.validity[k->name] = fresh("valid", Type::bool_());
          havoc(p, e->writes);
          TermPtr r = fresh("reply", e->ty);
          p.hyps.push_back(tm::post(k, v[0], s0, state_term(p.store), r));
          return Outs{normal(std::move(p), r)};
        });
      }
      case K::Try: return try_(e, std::move(path), env, scope);
    }
    fail(ErrorKind::Internal, e->span, "unhandled IR form in VC generation");
  }

  Outs call(const Routine &r, const Env &def_env, const IrExprPtr &e, Path p, const std::vector<TermPtr> &vals) {
    Env sub = def_env;
    for (size_t i = 0; i < r.params.size() && i < vals.size(); ++i)
      if (r.params[i].name != "_") sub[r.params[i].name] = vals[i];
    Store s0 = p.store;
    for (const auto &req : r.requires_)
      emit(p, spec(req, sub, s0, nullptr, p), Obligation::PreconditionAtCall, e->span);
    variant_check(r, sub, p, e->span);

    Outs res;
    {
      Path q = p;
      havoc(q, r.writes);
      TermPtr v = fresh(r.name, r.ret);
      if (r.ret && r.ret->kind == Type::Kind::Cont) q.validity[v->name] = fresh("valid", Type::bool_());
      Env s2 = sub;
      s2["result"] = v;
      for (const auto &ens : r.ensures) q.hyps.push_back(spec(ens, s2, q.store, &s0, q));
      res.push_back(normal(std::move(q), v));
    }
    for (const auto &rc : r.raises) {
      Path q = p;
      TermPtr payload;
      if (r.role == Routine::Role::Perform) {
        payload = vals.back();
      } else {
        havoc(q, r.writes);
        payload = fresh(rc.exn, rc.ty);
      }
      Env s2 = sub;
      s2[rc.binder] = payload;
      q.hyps.push_back(spec(rc.cond, s2, q.store, &s0, q));
      Outcome o;
      o.path = std::move(q);
      o.exc = true;
      o.exn = rc.exn;
      o.value = payload;
      res.push_back(std::move(o));
    }
    return res;
  }

  void variant_check(const Routine &r, const Env &sub, const Path &p, Span s) {
    if (!r.variant) return;
    const Frame *f = nullptr;
    for (auto it = frames_.rbegin(); it != frames_.rend(); ++it) {
      if (it->r == &r) {
        f = &*it;
        break;
      }
      if (it->r->role != Routine::Role::Handler) break;
    }
    if (!f) return;
    TermPtr before = spec(r.variant, f->env, f->entry, nullptr, p);
    TermPtr now = spec(r.variant, sub, p.store, nullptr, p);
    TermPtr goal;
    if (now->ty && now->ty->kind == Type::Kind::Int) {
      goal = tm::and_(tm::bin(BinOp::Le, tm::int_(0), now, Type::bool_()),
                      tm::bin(BinOp::Lt, now, before, Type::bool_()));
    } else {
      goal = tm::bin(BinOp::Lt, tm::app("size", {now}, Type::int_()), tm::app("size", {before}, Type::int_()),
                     Type::bool_());
    }
    emit(p, goal, Obligation::VariantDecrease, s);
  }

  TypePtr ctor_arg_type(const std::string &c, size_t i, const TypePtr &scrut) const {
    if (c == "::") return i == 0 ? scrut->args[0] : scrut;
    return p_.ctors.at(c).args.at(i);
  }

  TermPtr pattern(const Pattern &pat, const TermPtr &s, Env &env) {
    switch (pat.kind) {
      case Pattern::Kind::Wild:
      case Pattern::Kind::Unit: return tm::true_();
      case Pattern::Kind::Var: env[pat.name] = s; return tm::true_();
      case Pattern::Kind::Int: return tm::eq(s, tm::int_(pat.ival));
      case Pattern::Kind::Bool: return tm::eq(s, tm::bool_(pat.ival != 0));
      case Pattern::Kind::Ctor: {
        std::vector<TermPtr> conds{tm::app("is:" + pat.name, {s}, Type::bool_())};
        for (size_t i = 0; i < pat.subs.size(); ++i) {
          TypePtr ty = ctor_arg_type(pat.name, i, s->ty);
          TermPtr sel = tm::app(fmt::format("sel:{}:{}", pat.name, i), {s}, ty);
          TermPtr c = pattern(*pat.subs[i], sel, env);
          if (!is_true(c)) conds.push_back(c);
        }
        return tm::conj(conds);
      }
      case Pattern::Kind::Tuple: {
        std::vector<TermPtr> conds;
        for (size_t i = 0; i < pat.subs.size(); ++i) {
          TermPtr x = s->kind == Term::Kind::Tuple
                          ? s->kids[i]
                          : tm::app(fmt::format("proj:{}", i), {s}, s->ty->args.at(i));
          TermPtr c = pattern(*pat.subs[i], x, env);
          if (!is_true(c)) conds.push_back(c);
        }
        return tm::conj(conds);
      }
    }
    return tm::true_();
  }

  Outs try_(const IrExprPtr &e, Path path, const Env &env, const Scope &scope) {
    size_t base = path.hyps.size();
    Outs result;
    std::map<std::string, Outs> caught;
    auto handled = [&](const std::string &x) {
      for (const auto &h : e->handlers)
        if (h.exn == x) return true;
      return false;
    };
    for (auto &o : eval(e->kids[0], std::move(path), env, scope)) {
      if (!o.exc) {
        if (e->value_branch) {
          Env e2 = env;
          const auto &[prm, body] = *e->value_branch;
          if (prm.name != "_") e2[prm.name] = name_value(o.path, prm.name, o.value);
          for (auto &x : eval(body, std::move(o.path), e2, scope)) {
            x.from_branch = false;
            result.push_back(std::move(x));
          }
        } else {
          o.from_branch = false;
          result.push_back(std::move(o));
        }
      } else if (handled(o.exn)) {
        caught[o.exn].push_back(std::move(o));
      } else {
        result.push_back(std::move(o));
      }
    }
    for (const auto &h : e->handlers) {
      auto it = caught.find(h.exn);
      if (it == caught.end()) continue;
      for (auto &o : join(base, std::move(it->second))) {
        Env e2 = env;
        if (h.params.size() == 1) {
          if (h.params[0].name != "_") e2[h.params[0].name] = o.value;
        } else {
          for (size_t i = 0; i < h.params.size(); ++i)
            if (h.params[i].name != "_")
              e2[h.params[i].name] = o.value->kind == Term::Kind::Tuple
                                         ? o.value->kids[i]
                                         : tm::app(fmt::format("proj:{}", i), {o.value}, h.params[i].ty);
        }
        for (auto &x : eval(h.body, std::move(o.path), e2, scope)) {
          if (!x.exc) x.from_branch = true;
          result.push_back(std::move(x));
        }
      }
    }
    return join(base, std::move(result));
  }

  // Merges outcomes of the same kind that share the first `base` hypotheses.
  Outs join(size_t base, Outs outs) {
    std::vector<std::string> order;
    std::map<std::string, Outs> groups;
    for (auto &o : outs) {
      std::string key = o.exc ? "!" + o.exn : (o.from_branch ? "b" : "n");
      if (!groups.count(key)) order.push_back(key);
      groups[key].push_back(std::move(o));
    }
    Outs res;
    for (const auto &key : order) {
      Outs &g = groups[key];
      if (g.size() == 1) {
        res.push_back(std::move(g[0]));
        continue;
      }
      Outcome j;
      j.exc = g[0].exc;
      j.exn = g[0].exn;
      j.from_branch = g[0].from_branch;
      j.path.hyps.assign(g[0].path.hyps.begin(), g[0].path.hyps.begin() + static_cast<long>(base));
      bool same_value = true;
      for (const auto &o : g) same_value = same_value && term_equal(o.value, g[0].value);
      j.value = same_value ? g[0].value : fresh(j.exc ? j.exn : "join", g[0].value->ty);
      std::vector<std::string> differ;
      for (const auto &v : p_.state.vars) {
        bool same = true;
        for (const auto &o : g) same = same && term_equal(o.path.store.at(v.name), g[0].path.store.at(v.name));
        j.path.store[v.name] = same ? g[0].path.store.at(v.name) : fresh(v.name, var_type(v));
        if (!same) differ.push_back(v.name);
      }
      std::vector<std::string> kdiffer;
      for (const auto &[k, f] : g[0].path.validity) {
        bool everywhere = true, same = true;
        for (const auto &o : g) {
          auto it = o.path.validity.find(k);
          if (it == o.path.validity.end()) everywhere = false;
          else same = same && term_equal(it->second, f);
        }
        if (!everywhere) continue;
        j.path.validity[k] = same ? f : fresh("valid", Type::bool_());
        if (!same) kdiffer.push_back(k);
      }
      std::vector<TermPtr> alts;
      for (const auto &o : g) {
        std::vector<TermPtr> parts(o.path.hyps.begin() + static_cast<long>(base), o.path.hyps.end());
        if (!same_value) parts.push_back(tm::eq(j.value, o.value));
        for (const auto &x : differ) parts.push_back(tm::eq(j.path.store.at(x), o.path.store.at(x)));
        for (const auto &k : kdiffer) parts.push_back(tm::eq(j.path.validity.at(k), o.path.validity.at(k)));
        alts.push_back(tm::conj(parts));
      }
      j.path.hyps.push_back(disj(alts));
      res.push_back(std::move(j));
    }
    return res;
  }

  const IrProgram &p_;
  std::vector<VC> vcs_;
  std::vector<Binder> consts_;
  std::vector<Frame> frames_;
  std::vector<std::string> where_;
  std::string top_;
  int counter_ = 0;
  int seq_ = 0;
};

}  // namespace

std::vector<VC> gen_vcs(const IrProgram &p) { return VcGen(p).run(); }

std::size_t count_nontrivial(const std::vector<VC> &vcs) {
  return static_cast<std::size_t>(std::count_if(vcs.begin(), vcs.end(), [](const VC &v) { return !v.trivial; }));
}

std::string print_vcs(const std::vector<VC> &vcs, bool with_trivial) {
  std::string out;
  for (const auto &v : vcs) {
    if (v.trivial && !with_trivial) continue;
    out += fmt::format("vc {} [{}] {} {}:{}{}\n  {}\n", v.id, obligation_str(v.kind), v.routine, v.span.line,
                       v.span.col, v.trivial ? " (trivial)" : "", term_str(v.goal));
  }
  return out;
}

}  // namespace effv
