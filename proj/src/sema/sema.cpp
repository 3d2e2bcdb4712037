#include "sema/sema.hpp"

#include <fmt/format.h>

#include <algorithm>

namespace effv {

const StateVar *StateModel::find(const std::string &n) const {
  for (const auto &v : vars)
    if (v.name == n) return &v;
  return nullptr;
}

std::vector<std::string> StateModel::names() const {
  std::vector<std::string> out;
  for (const auto &v : vars) out.push_back(v.name);
  return out;
}

TypePtr FunSig::arrow_type() const {
  TypePtr t = ret;
  for (auto it = params.rbegin(); it != params.rend(); ++it) t = Type::arrow(it->ty, t);
  return t;
}

bool is_reserved_name(const std::string &n) {
  static const char *prefixes[] = {"perform_", "pre_", "post_", "gen_", "init_state", "eff_state"};
  for (const char *p : prefixes)
    if (n.rfind(p, 0) == 0) return true;
  static const std::set<std::string> exact = {"arg", "state", "old_state", "state_old", "irrelevant_old_state",
                                              "result", "reply", "handler", "apply", "size"};
  return exact.count(n) || n.find("__") != std::string::npos;
}

TermPtr current_state_term(const StateModel &m) {
  std::vector<std::string> names;
  std::vector<TermPtr> vals;
  for (const auto &v : m.vars) {
    names.push_back(v.name);
    vals.push_back(v.is_array ? tm::var(v.name, v.ty) : tm::deref(v.name, v.elem));
  }
  return with_type(tm::state_rec(names, vals), Type::state());
}

namespace {

using EffMap = std::map<std::string, Span>;

void merge(EffMap &into, const EffMap &from) {
  for (const auto &[k, v] : from) into.emplace(k, v);
}

[[noreturn]] void type_error(Span s, const std::string &msg) { fail(ErrorKind::Type, s, msg); }
[[noreturn]] void sem_error(Span s, const std::string &msg) { fail(ErrorKind::Semantic, s, msg); }

void expect_type(const TypePtr &want, const TypePtr &got, Span s, const char *what) {
  if (!type_equal(want, got))
    type_error(s, fmt::format("{} has type {} but {} was expected", what, type_str(got), type_str(want)));
}

struct LocalFn {
  std::vector<Param> params;
  TypePtr ret;
  std::set<std::string> performs;
};

struct ContInfo {
  std::string effect;
  TypePtr reply;
  TypePtr result;
};

struct Scope {
  std::map<std::string, TypePtr> vars;
  std::map<std::string, LocalFn> fns;
  std::map<std::string, ContInfo> conts;
  std::map<std::string, ProtocolPtr> protocols;
  std::string function;
};

struct TermScope {
  std::map<std::string, TypePtr> vars;
  std::set<std::string> conts;
  bool allow_old = false;
  TypePtr result;
  TypePtr reply;
};

void collect_hidden_state(const ExprPtr &e) {
  if (!e) return;
  if (e->kind == Expr::Kind::App && e->kids[0]->kind == Expr::Kind::Var &&
      (e->kids[0]->name == "ref" || e->kids[0]->name == "Array.make"))
    sem_error(e->span, "mutable state must be defined at top level; local references are not supported");
  for (const auto &k : e->kids) collect_hidden_state(k);
  for (const auto &c : e->cases) collect_hidden_state(c.body);
  for (const auto &b : e->branches) collect_hidden_state(b.body);
  if (e->value_branch) collect_hidden_state(e->value_branch->body);
}

class Checker {
 public:
  TypedProgram run(const SourceProgram &p) {
    tp_.state = build_state_model(p);
    for (const auto &d : p.decls) tp_.program.decls.push_back(decl(d));
    return std::move(tp_);
  }

 private:
  // ---- declarations -------------------------------------------------------
  Decl decl(const Decl &d) {
    Decl out = d;
    switch (d.kind) {
      case Decl::Kind::Type: {
        const TypeDecl &td = *d.type;
        check_name(td.name, d.span);
        if (tp_.types.count(td.name)) sem_error(d.span, fmt::format("duplicate type '{}'", td.name));
        tp_.types[td.name] = d.type;
        tp_.type_order.push_back(td.name);
        for (size_t i = 0; i < td.ctors.size(); ++i) {
          const auto &c = td.ctors[i];
          if (tp_.ctors.count(c.name)) sem_error(d.span, fmt::format("duplicate constructor '{}'", c.name));
          for (const auto &a : c.args) check_type(a, d.span);
          tp_.ctors[c.name] = CtorInfo{td.name, c.args, i};
        }
        break;
      }
      case Decl::Kind::Effect: {
        const EffectDecl &ed = *d.effect;
        check_type(ed.sig, d.span);
        check_first_order(ed.sig, d.span);
        tp_.effect_order.push_back(ed.name);
        tp_.effect_types[ed.name] = ed.sig;
        tp_.effect_sigs[ed.name] = effect_type_split(ed.sig);
        break;
      }
      case Decl::Kind::Protocol: {
        TermScope base;
        auto pr = protocol(*d.protocol, base, Scope{});
        tp_.protocols[pr->effect] = pr;
        out.protocol = pr;
        break;
      }
      case Decl::Kind::State: {
        const StateDecl &sd = *d.state;
        check_name(sd.name, d.span);
        check_type(sd.ty, d.span);
        const StateVar *sv = tp_.state.find(sd.name);
        auto [init, eff] = expr(sd.init, Scope{}, sv->elem);
        if (!eff.empty()) type_error(d.span, "initializer may not perform effects");
        auto c = std::make_shared<StateDecl>(sd);
        c->init = init;
        out.state = c;
        break;
      }
      case Decl::Kind::Logic: {
        const LogicDecl &ld = *d.logic;
        check_name(ld.name, d.span);
        if (tp_.logic.count(ld.name)) sem_error(d.span, fmt::format("duplicate logic symbol '{}'", ld.name));
        for (const auto &[n, t] : ld.params) {
          check_name(n, d.span);
          check_type(t, d.span);
        }
        check_type(ld.ret, d.span);
        auto c = std::make_shared<LogicDecl>(ld);
        tp_.logic[ld.name] = c;
        if (ld.body) {
          TermScope ts;
          for (const auto &[n, t] : ld.params) ts.vars[n] = t;
          c->body = term(ld.body, ts, ld.ret);
          expect_type(ld.ret, c->body->ty, d.span, "logic body");
        }
        out.logic = c;
        break;
      }
      case Decl::Kind::Function: out.function = function(*d.function, d.span); break;
    }
    return out;
  }

  std::shared_ptr<const FunctionDecl> function(const FunctionDecl &fd, Span span) {
    check_name(fd.name, span);
    if (tp_.functions.count(fd.name) || tp_.logic.count(fd.name))
      sem_error(span, fmt::format("duplicate definition of '{}'", fd.name));
    Scope scope;
    scope.function = fd.name;
    TermScope ts;
    for (const auto &prm : fd.params) {
      check_param(prm);
      if (prm.name != "()" && prm.name != "_") {
        scope.vars[prm.name] = prm.ty;
        ts.vars[prm.name] = prm.ty;
      }
    }
    if (fd.ret) check_type(fd.ret, span);
    FunSig sig{fd.name, fd.params, fd.ret, fd.spec, fd.rec, {}};
    if (fd.spec) sig.performs = performs_set(*fd.spec);
    if (fd.rec) {
      if (!fd.ret) type_error(span, "recursive function needs a return type annotation");
      tp_.functions[fd.name] = sig;
    }
    auto local_protocols = spec_protocols(fd.spec, ts, scope);
    for (const auto &pr : local_protocols) scope.protocols[pr->effect] = pr;
    auto [body, eff] = expr(fd.body, scope, fd.ret);
    if (fd.ret) expect_type(fd.ret, body->ty, fd.body->span, "function body");
    sig.ret = fd.ret ? fd.ret : body->ty;
    auto c = std::make_shared<FunctionDecl>(fd);
    c->ret = sig.ret;
    c->body = body;
    c->spec = spec(fd.spec, ts, sig.ret, local_protocols, span);
    sig.spec = c->spec;
    tp_.functions[fd.name] = sig;
    tp_.row_checks.push_back(RowCheck{fd.name, span, sig.performs, eff});
    return c;
  }

  // ---- names and types ------------------------------------------------------
  void check_name(const std::string &n, Span s) {
    if (is_reserved_name(n)) sem_error(s, fmt::format("identifier '{}' is reserved", n));
  }

  void check_param(const Param &p) {
    if (p.name != "()" && p.name != "_") check_name(p.name, p.span);
    check_type(p.ty, p.span);
  }

  void check_type(const TypePtr &t, Span s) {
    if (!t) return;
    switch (t->kind) {
      case Type::Kind::Named:
        if (!tp_.types.count(t->name)) type_error(s, fmt::format("unknown type '{}'", t->name));
        break;
      case Type::Kind::Cont:
      case Type::Kind::Lambda:
      case Type::Kind::State: type_error(s, "internal type used in source program");
      default: break;
    }
    for (const auto &a : t->args) check_type(a, s);
  }

  void check_first_order(const TypePtr &t, Span s) {
    auto sig = effect_type_split(t);
    for (const auto &a : sig.args)
      if (a->kind == Type::Kind::Arrow) type_error(s, "effect payloads must be first-order");
    if (sig.reply->kind == Type::Kind::Arrow) type_error(s, "effect replies must be first-order");
  }

  std::set<std::string> performs_set(const SpecClauses &sp) {
    std::set<std::string> out;
    for (const auto &e : sp.performs) {
      if (!tp_.effect_sigs.count(e)) sem_error(sp.span, fmt::format("performs clause names unknown effect '{}'", e));
      out.insert(e);
    }
    return out;
  }

  // ---- specifications ---------------------------------------------------------
  std::vector<ProtocolPtr> spec_protocols(const SpecPtr &sp, const TermScope &ts, const Scope &scope) {
    std::vector<ProtocolPtr> out;
    if (!sp) return out;
    for (const auto &pr : sp->protocols) out.push_back(protocol(*pr, ts, scope));
    return out;
  }

  ProtocolPtr protocol(const Protocol &pr, const TermScope &outer, const Scope &scope) {
    auto sig_it = tp_.effect_sigs.find(pr.effect);
    if (sig_it == tp_.effect_sigs.end())
      sem_error(pr.span, fmt::format("protocol for undeclared effect '{}'", pr.effect));
    if (tp_.protocols.count(pr.effect) || scope.protocols.count(pr.effect))
      sem_error(pr.span, fmt::format("conflicting protocols for effect '{}'", pr.effect));
    const EffectSig &sig = sig_it->second;
    bool unit_arg = sig.args.size() == 1 && sig.args[0]->kind == Type::Kind::Unit;
    size_t want = unit_arg ? 0 : sig.args.size();
    if (pr.params.size() != want && !(unit_arg && pr.params.size() == 1))
      type_error(pr.span, fmt::format("protocol {} binds {} parameters but the effect takes {}", pr.effect,
                                      pr.params.size(), want));
    TermScope ts = outer;
    ts.result = nullptr;
    ts.allow_old = false;
    for (size_t i = 0; i < pr.params.size(); ++i) {
      check_name(pr.params[i], pr.span);
      ts.vars[pr.params[i]] = sig.args[i];
    }
    auto c = std::make_shared<Protocol>(pr);
    c->requires_.clear();
    c->ensures.clear();
    for (const auto &t : pr.requires_) c->requires_.push_back(bool_term(t, ts));
    ts.allow_old = true;
    ts.reply = sig.reply;
    for (const auto &t : pr.ensures) c->ensures.push_back(bool_term(t, ts));
    for (const auto &m : pr.modifies) {
      if (!tp_.state.find(m))
        sem_error(pr.span, fmt::format("modifies clause names '{}', which is not top-level mutable state", m));
    }
    if (pr.local) {
      std::set<std::string> fv;
      for (const auto &t : c->requires_)
        for (const auto &v : free_vars(t)) fv.insert(v);
      for (const auto &t : c->ensures)
        for (const auto &v : free_vars(t)) fv.insert(v);
      for (const auto &[n, ty] : outer.vars) {
        bool is_param = std::find(pr.params.begin(), pr.params.end(), n) != pr.params.end();
        if (fv.count(n) && !is_param && !tp_.state.find(n)) c->captured.emplace_back(n, ty);
      }
    }
    return c;
  }

  SpecPtr spec(const SpecPtr &sp, const TermScope &params, TypePtr ret, std::vector<ProtocolPtr> protocols,
               Span span) {
    if (!sp) return sp;
    auto c = std::make_shared<SpecClauses>(*sp);
    TermScope ts = params;
    c->requires_.clear();
    c->ensures.clear();
    for (const auto &t : sp->requires_) c->requires_.push_back(bool_term(t, ts));
    if (sp->variant) {
      c->variant = term(sp->variant, ts, nullptr);
      auto k = c->variant->ty->kind;
      if (k != Type::Kind::Int && k != Type::Kind::Named && k != Type::Kind::List)
        type_error(span, "variant must be an integer or an inductive value");
    }
    ts.allow_old = true;
    ts.result = ret;
    for (const auto &t : sp->ensures) c->ensures.push_back(bool_term(t, ts));
    for (const auto &m : sp->modifies)
      if (!tp_.state.find(m))
        sem_error(span, fmt::format("modifies clause names '{}', which is not top-level mutable state", m));
    performs_set(*sp);
    c->protocols = std::move(protocols);
    return c;
  }

  TermPtr bool_term(const TermPtr &t, const TermScope &ts) {
    TermPtr r = term(t, ts, Type::bool_());
    expect_type(Type::bool_(), r->ty, t->span, "specification");
    return r;
  }

  // ---- terms ------------------------------------------------------------------
  static TermPtr typed(std::shared_ptr<Term> t, TypePtr ty) {
    t->ty = std::move(ty);
    return t;
  }

  TermPtr term(const TermPtr &t, const TermScope &s, const TypePtr &expected) {
    using K = Term::Kind;
    auto c = std::make_shared<Term>(*t);
    switch (t->kind) {
      case K::Int: return typed(c, Type::int_());
      case K::Bool: return typed(c, Type::bool_());
      case K::Unit: return typed(c, Type::unit());
      case K::Var: {
        if (auto it = s.vars.find(t->name); it != s.vars.end()) return typed(c, it->second);
        if (t->name == "result" && s.result) return typed(c, s.result);
        if (t->name == "reply" && s.reply) return typed(c, s.reply);
        if (const StateVar *sv = tp_.state.find(t->name)) {
          if (sv->is_array) return typed(c, sv->ty);
          type_error(t->span, fmt::format("reference '{}' must be read as !{} in specifications", t->name, t->name));
        }
        if (auto it = tp_.logic.find(t->name); it != tp_.logic.end() && it->second->params.empty()) {
          c->kind = K::App;
          return typed(c, it->second->ret);
        }
        if (t->name == "result") sem_error(t->span, "'result' is not available here");
        if (t->name == "reply") sem_error(t->span, "'reply' may only appear in a protocol postcondition");
        sem_error(t->span, fmt::format("unknown name '{}' in specification", t->name));
      }
      case K::Deref: {
        const StateVar *sv = tp_.state.find(t->name);
        if (!sv || sv->is_array) sem_error(t->span, fmt::format("'{}' is not a top-level reference", t->name));
        return typed(c, sv->elem);
      }
      case K::Old: {
        if (!s.allow_old) sem_error(t->span, "'old' may only appear in postconditions");
        TermScope inner = s;
        inner.allow_old = false;
        c->kids[0] = term(t->kids[0], inner, expected);
        return typed(c, c->kids[0]->ty);
      }
      case K::App: return app_term(t, c, s, expected);
      case K::Not:
        c->kids[0] = term(t->kids[0], s, Type::bool_());
        expect_type(Type::bool_(), c->kids[0]->ty, t->span, "operand of not");
        return typed(c, Type::bool_());
      case K::Neg:
        c->kids[0] = term(t->kids[0], s, Type::int_());
        expect_type(Type::int_(), c->kids[0]->ty, t->span, "operand of -");
        return typed(c, Type::int_());
      case K::Bin: {
        if (binop_is_arith(t->op) || binop_is_logic(t->op)) {
          TypePtr want = binop_is_arith(t->op) ? Type::int_() : Type::bool_();
          c->kids[0] = term(t->kids[0], s, want);
          c->kids[1] = term(t->kids[1], s, want);
          expect_type(want, c->kids[0]->ty, t->kids[0]->span, "operand");
          expect_type(want, c->kids[1]->ty, t->kids[1]->span, "operand");
          return typed(c, want);
        }
        if (t->op == BinOp::Eq || t->op == BinOp::Neq) {
          bool left_nil = t->kids[0]->kind == K::App && t->kids[0]->name == "[]";
          if (left_nil) {
            c->kids[1] = term(t->kids[1], s, nullptr);
            c->kids[0] = term(t->kids[0], s, c->kids[1]->ty);
          } else {
            c->kids[0] = term(t->kids[0], s, nullptr);
            c->kids[1] = term(t->kids[1], s, c->kids[0]->ty);
          }
          expect_type(c->kids[0]->ty, c->kids[1]->ty, t->span, "right operand of equality");
          return typed(c, Type::bool_());
        }
        c->kids[0] = term(t->kids[0], s, Type::int_());
        c->kids[1] = term(t->kids[1], s, Type::int_());
        expect_type(Type::int_(), c->kids[0]->ty, t->kids[0]->span, "operand of comparison");
        expect_type(Type::int_(), c->kids[1]->ty, t->kids[1]->span, "operand of comparison");
        return typed(c, Type::bool_());
      }
      case K::Ite: {
        c->kids[0] = term(t->kids[0], s, Type::bool_());
        expect_type(Type::bool_(), c->kids[0]->ty, t->span, "condition");
        c->kids[1] = term(t->kids[1], s, expected);
        c->kids[2] = term(t->kids[2], s, c->kids[1]->ty);
        expect_type(c->kids[1]->ty, c->kids[2]->ty, t->span, "else branch");
        return typed(c, c->kids[1]->ty);
      }
      case K::Forall:
      case K::Exists: {
        TermScope inner = s;
        for (const auto &[n, ty] : t->binders) {
          check_name(n, t->span);
          check_type(ty, t->span);
          inner.vars[n] = ty;
        }
        c->kids[0] = term(t->kids[0], inner, Type::bool_());
        expect_type(Type::bool_(), c->kids[0]->ty, t->span, "quantifier body");
        for (auto &g : c->triggers)
          for (auto &x : g) x = term(x, inner, nullptr);
        return typed(c, Type::bool_());
      }
      case K::Let: {
        check_name(t->name, t->span);
        c->kids[0] = term(t->kids[0], s, nullptr);
        TermScope inner = s;
        inner.vars[t->name] = c->kids[0]->ty;
        c->kids[1] = term(t->kids[1], inner, expected);
        return typed(c, c->kids[1]->ty);
      }
      case K::Match: {
        c->kids[0] = term(t->kids[0], s, nullptr);
        TypePtr res = expected;
        bool fixed = false;
        for (auto &cs : c->cases) {
          std::map<std::string, TypePtr> binds;
          cs.pat = pattern(cs.pat, c->kids[0]->ty, binds);
          TermScope inner = s;
          for (auto &[n, ty] : binds) inner.vars[n] = ty;
          cs.body = term(cs.body, inner, res);
          if (fixed) expect_type(res, cs.body->ty, cs.body->span, "match case");
          res = cs.body->ty;
          fixed = true;
        }
        if (!fixed) type_error(t->span, "empty match");
        return typed(c, res);
      }
      case K::Tuple: {
        std::vector<TypePtr> ts;
        for (size_t i = 0; i < t->kids.size(); ++i) {
          TypePtr want = expected && expected->kind == Type::Kind::Tuple && expected->args.size() == t->kids.size()
                             ? expected->args[i]
                             : nullptr;
          c->kids[i] = term(t->kids[i], s, want);
          ts.push_back(c->kids[i]->ty);
        }
        return typed(c, Type::tuple(ts));
      }
      case K::Select: {
        c->kids[0] = term(t->kids[0], s, nullptr);
        if (c->kids[0]->ty->kind != Type::Kind::Array) type_error(t->span, "indexing a non-array");
        c->kids[1] = term(t->kids[1], s, Type::int_());
        expect_type(Type::int_(), c->kids[1]->ty, t->span, "array index");
        return typed(c, c->kids[0]->ty->args[0]);
      }
      case K::Length: {
        const StateVar *sv = tp_.state.find(t->name);
        if (!sv || !sv->is_array) sem_error(t->span, fmt::format("'{}' is not a top-level array", t->name));
        return typed(c, Type::int_());
      }
      case K::Valid: {
        if (t->kids[0]->kind != K::Var || !s.conts.count(t->kids[0]->name))
          sem_error(t->span, "'valid' expects a continuation in scope");
        return typed(c, Type::bool_());
      }
      case K::Pre:
      case K::Post: return closure_pred(t, c, s);
      case K::Field: {
        c->kids[0] = term(t->kids[0], s, Type::state());
        const StateVar *sv = tp_.state.find(t->name);
        if (!sv || c->kids[0]->ty->kind != Type::Kind::State) type_error(t->span, "bad state field access");
        return typed(c, sv->is_array ? sv->ty : sv->elem);
      }
      case K::StateRec: {
        for (size_t i = 0; i < t->names.size(); ++i) {
          const StateVar *sv = tp_.state.find(t->names[i]);
          if (!sv) sem_error(t->span, fmt::format("unknown state field '_{}'", t->names[i]));
          TypePtr want = sv->is_array ? sv->ty : sv->elem;
          c->kids[i] = term(t->kids[i], s, want);
          expect_type(want, c->kids[i]->ty, t->span, "state field");
        }
        if (t->names.size() != tp_.state.vars.size()) type_error(t->span, "state record must list every field");
        return typed(c, Type::state());
      }
    }
    return typed(c, Type::unit());
  }

  TermPtr app_term(const TermPtr &t, std::shared_ptr<Term> c, const TermScope &s, const TypePtr &expected) {
    const std::string &f = t->name;
    if (f == "[]") {
      if (!expected || expected->kind != Type::Kind::List)
        type_error(t->span, "cannot determine the element type of []");
      return typed(c, expected);
    }
    if (f == "::") {
      TypePtr elem = expected && expected->kind == Type::Kind::List ? expected->args[0] : nullptr;
      c->kids[0] = term(t->kids[0], s, elem);
      TypePtr lt = Type::list(c->kids[0]->ty);
      c->kids[1] = term(t->kids[1], s, lt);
      expect_type(lt, c->kids[1]->ty, t->span, "list tail");
      return typed(c, lt);
    }
    if (auto it = tp_.ctors.find(f); it != tp_.ctors.end()) {
      const CtorInfo &ci = it->second;
      if (ci.args.size() != t->kids.size())
        type_error(t->span, fmt::format("constructor {} expects {} arguments", f, ci.args.size()));
      for (size_t i = 0; i < ci.args.size(); ++i) {
        c->kids[i] = term(t->kids[i], s, ci.args[i]);
        expect_type(ci.args[i], c->kids[i]->ty, t->kids[i]->span, "constructor argument");
      }
      return typed(c, Type::named(ci.type));
    }
    if (auto it = tp_.logic.find(f); it != tp_.logic.end()) {
      const LogicDecl &ld = *it->second;
      if (ld.params.size() != t->kids.size())
        type_error(t->span, fmt::format("'{}' expects {} arguments", f, ld.params.size()));
      for (size_t i = 0; i < ld.params.size(); ++i) {
        c->kids[i] = term(t->kids[i], s, ld.params[i].second);
        expect_type(ld.params[i].second, c->kids[i]->ty, t->kids[i]->span, "argument");
      }
      return typed(c, ld.ret);
    }
    sem_error(t->span, fmt::format("unknown logic function '{}'", f));
  }

  TermPtr closure_pred(const TermPtr &t, std::shared_ptr<Term> c, const TermScope &s) {
    bool is_pre = t->kind == Term::Kind::Pre;
    c->kids[0] = term(t->kids[0], s, nullptr);
    TypePtr fty = c->kids[0]->ty;
    if (fty->kind != Type::Kind::Arrow)
      type_error(t->span, fmt::format("'{}' applies to a function value", is_pre ? "pre" : "post"));
    TypePtr arg = fty->args[0], res = fty->args[1];
    c->kids[1] = term(t->kids[1], s, arg);
    expect_type(arg, c->kids[1]->ty, t->span, "closure argument");
    TermPtr cur = current_state_term(tp_.state);
    if (is_pre) {
      if (t->kids.size() == 2) c->kids.push_back(cur);
      else c->kids[2] = term(t->kids[2], s, Type::state());
      return typed(c, Type::bool_());
    }
    if (t->kids.size() == 3) {
      if (!s.allow_old) sem_error(t->span, "'post' with an implicit old state needs a postcondition context");
      TermPtr r = term(t->kids[2], s, res);
      c->kids = {c->kids[0], c->kids[1], with_type(tm::old(cur), Type::state()), cur, r};
    } else if (t->kids.size() == 5) {
      c->kids[2] = term(t->kids[2], s, Type::state());
      c->kids[3] = term(t->kids[3], s, Type::state());
      c->kids[4] = term(t->kids[4], s, res);
    } else {
      type_error(t->span, "'post' takes a function, an argument and a result, or all five arguments");
    }
    expect_type(res, c->kids[4]->ty, t->span, "closure result");
    return typed(c, Type::bool_());
  }

  PatternPtr pattern(const PatternPtr &p, const TypePtr &ty, std::map<std::string, TypePtr> &binds) {
    auto c = std::make_shared<Pattern>(*p);
    c->ty = ty;
    switch (p->kind) {
      case Pattern::Kind::Wild: break;
      case Pattern::Kind::Var:
        check_name(p->name, p->span);
        if (binds.count(p->name)) sem_error(p->span, fmt::format("variable '{}' bound twice", p->name));
        binds[p->name] = ty;
        break;
      case Pattern::Kind::Unit: expect_type(Type::unit(), ty, p->span, "pattern"); break;
      case Pattern::Kind::Int: expect_type(Type::int_(), ty, p->span, "pattern"); break;
      case Pattern::Kind::Bool: expect_type(Type::bool_(), ty, p->span, "pattern"); break;
      case Pattern::Kind::Tuple:
        if (ty->kind != Type::Kind::Tuple || ty->args.size() != p->subs.size())
          type_error(p->span, fmt::format("tuple pattern does not match type {}", type_str(ty)));
        for (size_t i = 0; i < p->subs.size(); ++i) c->subs[i] = pattern(p->subs[i], ty->args[i], binds);
        break;
      case Pattern::Kind::Ctor: {
        if (p->name == "[]" || p->name == "::") {
          if (ty->kind != Type::Kind::List) type_error(p->span, "list pattern on a non-list");
          if (p->name == "::") {
            c->subs[0] = pattern(p->subs[0], ty->args[0], binds);
            c->subs[1] = pattern(p->subs[1], ty, binds);
          }
          break;
        }
        auto it = tp_.ctors.find(p->name);
        if (it == tp_.ctors.end()) sem_error(p->span, fmt::format("unknown constructor '{}'", p->name));
        expect_type(Type::named(it->second.type), ty, p->span, "constructor pattern");
        if (it->second.args.size() != p->subs.size())
          type_error(p->span, fmt::format("constructor {} expects {} arguments", p->name, it->second.args.size()));
        for (size_t i = 0; i < p->subs.size(); ++i) c->subs[i] = pattern(p->subs[i], it->second.args[i], binds);
        break;
      }
    }
    return c;
  }

  // ---- expressions ------------------------------------------------------------
  using Res = std::pair<ExprPtr, EffMap>;

  static TermScope term_scope(const Scope &s) {
    TermScope ts;
    ts.vars = s.vars;
    for (const auto &[k, _] : s.conts) ts.conts.insert(k);
    return ts;
  }

  ProtocolPtr protocol_in_scope(const Scope &s, const std::string &e) {
    if (auto it = s.protocols.find(e); it != s.protocols.end()) return it->second;
    if (auto it = tp_.protocols.find(e); it != tp_.protocols.end()) return it->second;
    return nullptr;
  }

  Res expr(const ExprPtr &e, const Scope &s, const TypePtr &expected) {
    using K = Expr::Kind;
    auto c = std::make_shared<Expr>(*e);
    EffMap eff;
    auto sub = [&](const ExprPtr &x, const Scope &sc, const TypePtr &want) {
      auto [r, ef] = expr(x, sc, want);
      merge(eff, ef);
      return r;
    };
    auto done = [&](TypePtr ty) -> Res {
      c->ty = std::move(ty);
      return {c, eff};
    };
    switch (e->kind) {
      case K::Int: return done(Type::int_());
      case K::Bool: return done(Type::bool_());
      case K::Unit: return done(Type::unit());
      case K::Var: {
        if (auto it = s.vars.find(e->name); it != s.vars.end()) return done(it->second);
        if (s.conts.count(e->name))
          type_error(e->span, fmt::format("continuation '{}' may only be used as the first argument of continue",
                                          e->name));
        if (const StateVar *sv = tp_.state.find(e->name))
          type_error(e->span, sv->is_array ? fmt::format("array '{}' may only be indexed", e->name)
                                           : fmt::format("reference '{}' must be read with !{}", e->name, e->name));
        if (s.fns.count(e->name) || tp_.functions.count(e->name))
          type_error(e->span, fmt::format("function '{}' used as a value; wrap it in fun", e->name));
        sem_error(e->span, fmt::format("unbound variable '{}'", e->name));
      }
      case K::Deref: {
        const StateVar *sv = tp_.state.find(e->name);
        if (!sv || sv->is_array) sem_error(e->span, fmt::format("'{}' is not a top-level reference", e->name));
        return done(sv->elem);
      }
      case K::Assign: {
        const StateVar *sv = tp_.state.find(e->name);
        if (!sv || sv->is_array) sem_error(e->span, fmt::format("'{}' is not a top-level reference", e->name));
        c->kids[0] = sub(e->kids[0], s, sv->elem);
        expect_type(sv->elem, c->kids[0]->ty, e->kids[0]->span, "assigned value");
        return done(Type::unit());
      }
      case K::ArrGet:
      case K::ArrSet: {
        const StateVar *sv = tp_.state.find(e->name);
        if (!sv || !sv->is_array) sem_error(e->span, fmt::format("'{}' is not a top-level array", e->name));
        c->kids[0] = sub(e->kids[0], s, Type::int_());
        expect_type(Type::int_(), c->kids[0]->ty, e->kids[0]->span, "array index");
        if (e->kind == K::ArrGet) return done(sv->elem);
        c->kids[1] = sub(e->kids[1], s, sv->elem);
        expect_type(sv->elem, c->kids[1]->ty, e->kids[1]->span, "stored value");
        return done(Type::unit());
      }
      case K::Unop: {
        TypePtr want = e->name == "not" ? Type::bool_() : Type::int_();
        c->kids[0] = sub(e->kids[0], s, want);
        expect_type(want, c->kids[0]->ty, e->kids[0]->span, "operand");
        return done(want);
      }
      case K::Binop: {
        if (binop_is_arith(e->op) || binop_is_logic(e->op)) {
          TypePtr want = binop_is_arith(e->op) ? Type::int_() : Type::bool_();
          c->kids[0] = sub(e->kids[0], s, want);
          c->kids[1] = sub(e->kids[1], s, want);
          expect_type(want, c->kids[0]->ty, e->kids[0]->span, "operand");
          expect_type(want, c->kids[1]->ty, e->kids[1]->span, "operand");
          return done(want);
        }
        if (e->op == BinOp::Eq || e->op == BinOp::Neq) {
          c->kids[0] = sub(e->kids[0], s, nullptr);
          c->kids[1] = sub(e->kids[1], s, c->kids[0]->ty);
          expect_type(c->kids[0]->ty, c->kids[1]->ty, e->kids[1]->span, "right operand of equality");
          if (c->kids[0]->ty->kind == Type::Kind::Arrow) type_error(e->span, "functions cannot be compared");
          return done(Type::bool_());
        }
        c->kids[0] = sub(e->kids[0], s, Type::int_());
        c->kids[1] = sub(e->kids[1], s, Type::int_());
        expect_type(Type::int_(), c->kids[0]->ty, e->kids[0]->span, "operand of comparison");
        expect_type(Type::int_(), c->kids[1]->ty, e->kids[1]->span, "operand of comparison");
        return done(Type::bool_());
      }
      case K::Ctor: {
        if (e->name == "[]") {
          if (!expected || expected->kind != Type::Kind::List)
            type_error(e->span, "cannot determine the element type of []");
          return done(expected);
        }
        if (e->name == "::") {
          TypePtr elem = expected && expected->kind == Type::Kind::List ? expected->args[0] : nullptr;
          c->kids[0] = sub(e->kids[0], s, elem);
          TypePtr lt = Type::list(c->kids[0]->ty);
          c->kids[1] = sub(e->kids[1], s, lt);
          expect_type(lt, c->kids[1]->ty, e->kids[1]->span, "list tail");
          return done(lt);
        }
        auto it = tp_.ctors.find(e->name);
        if (it == tp_.ctors.end()) sem_error(e->span, fmt::format("unknown constructor '{}'", e->name));
        if (it->second.args.size() != e->kids.size())
          type_error(e->span, fmt::format("constructor {} expects {} arguments", e->name, it->second.args.size()));
        for (size_t i = 0; i < e->kids.size(); ++i) {
          c->kids[i] = sub(e->kids[i], s, it->second.args[i]);
          expect_type(it->second.args[i], c->kids[i]->ty, e->kids[i]->span, "constructor argument");
        }
        return done(Type::named(it->second.type));
      }
      case K::Tuple: {
        std::vector<TypePtr> ts;
        for (size_t i = 0; i < e->kids.size(); ++i) {
          TypePtr want = expected && expected->kind == Type::Kind::Tuple && expected->args.size() == e->kids.size()
                             ? expected->args[i]
                             : nullptr;
          c->kids[i] = sub(e->kids[i], s, want);
          ts.push_back(c->kids[i]->ty);
        }
        return done(Type::tuple(ts));
      }
      case K::Seq:
        c->kids[0] = sub(e->kids[0], s, nullptr);
        c->kids[1] = sub(e->kids[1], s, expected);
        return done(c->kids[1]->ty);
      case K::If: {
        c->kids[0] = sub(e->kids[0], s, Type::bool_());
        expect_type(Type::bool_(), c->kids[0]->ty, e->kids[0]->span, "condition");
        c->kids[1] = sub(e->kids[1], s, expected);
        c->kids[2] = sub(e->kids[2], s, c->kids[1]->ty);
        expect_type(c->kids[1]->ty, c->kids[2]->ty, e->kids[2]->span, "else branch");
        return done(c->kids[1]->ty);
      }
      case K::Match: {
        c->kids[0] = sub(e->kids[0], s, nullptr);
        TypePtr res = expected;
        bool fixed = false;
        for (auto &cs : c->cases) {
          std::map<std::string, TypePtr> binds;
          cs.pat = pattern(cs.pat, c->kids[0]->ty, binds);
          Scope inner = s;
          for (auto &[n, ty] : binds) {
            inner.vars[n] = ty;
            inner.fns.erase(n);
          }
          cs.body = sub(cs.body, inner, res);
          if (fixed) expect_type(res, cs.body->ty, cs.body->span, "match case");
          res = cs.body->ty;
          fixed = true;
        }
        if (!fixed) type_error(e->span, "empty match");
        return done(res);
      }
      case K::Let: return let(e, c, s, expected);
      case K::Fun: return fun(e, c, s);
      case K::App: return app(e, c, s);
      case K::Perform: {
        auto it = tp_.effect_sigs.find(e->name);
        if (it == tp_.effect_sigs.end()) sem_error(e->span, fmt::format("perform of undeclared effect '{}'", e->name));
        if (!protocol_in_scope(s, e->name))
          sem_error(e->span, fmt::format("effect '{}' is performed but has no protocol in scope", e->name));
        const EffectSig &sig = it->second;
        bool unit_arg = sig.args.size() == 1 && sig.args[0]->kind == Type::Kind::Unit;
        if (!(unit_arg && e->kids.empty()) && e->kids.size() != sig.args.size())
          type_error(e->span, fmt::format("effect {} takes {} arguments", e->name, sig.args.size()));
        for (size_t i = 0; i < e->kids.size(); ++i) {
          c->kids[i] = sub(e->kids[i], s, sig.args[i]);
          expect_type(sig.args[i], c->kids[i]->ty, e->kids[i]->span, "effect argument");
        }
        eff.emplace(e->name, e->span);
        return done(sig.reply);
      }
      case K::Try: return try_(e, c, s, expected);
      case K::Continue: {
        auto it = s.conts.find(e->name);
        if (it == s.conts.end())
          type_error(e->span, fmt::format("continuation '{}' is not bound by an enclosing handler branch", e->name));
        c->kids[0] = sub(e->kids[0], s, it->second.reply);
        expect_type(it->second.reply, c->kids[0]->ty, e->kids[0]->span, "continue argument");
        return done(it->second.result);
      }
    }
    return done(Type::unit());
  }

  Res let(const ExprPtr &e, std::shared_ptr<Expr> c, const Scope &s, const TypePtr &expected) {
    EffMap eff;
    if (e->name != "_" && e->name != "()") check_name(e->name, e->span);
    if (e->params.empty()) {
      if (e->rec) type_error(e->span, "let rec needs parameters");
      if (e->spec && !e->spec->empty()) type_error(e->span, "specification on a value binding");
      if (e->ann) check_type(e->ann, e->span);
      auto [bound, ef] = expr(e->kids[0], s, e->ann);
      merge(eff, ef);
      if (e->ann) expect_type(e->ann, bound->ty, e->kids[0]->span, "bound value");
      if (e->name == "()") expect_type(Type::unit(), bound->ty, e->kids[0]->span, "bound value");
      Scope inner = s;
      if (e->name != "_" && e->name != "()") {
        inner.vars[e->name] = bound->ty;
        inner.fns.erase(e->name);
      }
      auto [body, ef2] = expr(e->kids[1], inner, expected);
      merge(eff, ef2);
      c->kids = {bound, body};
      c->ty = body->ty;
      return {c, eff};
    }
    // Local function definition.
    Scope fscope = s;
    fscope.function = e->name;
    TermScope ts = term_scope(s);
    for (const auto &prm : e->params) {
      check_param(prm);
      if (prm.name != "()" && prm.name != "_") {
        fscope.vars[prm.name] = prm.ty;
        fscope.fns.erase(prm.name);
        ts.vars[prm.name] = prm.ty;
      }
    }
    if (e->ann) check_type(e->ann, e->span);
    LocalFn lf{e->params, e->ann, e->spec ? performs_set(*e->spec) : std::set<std::string>{}};
    if (e->rec) {
      if (!e->ann) type_error(e->span, "recursive function needs a return type annotation");
      fscope.fns[e->name] = lf;
      fscope.vars.erase(e->name);
    }
    auto protocols = spec_protocols(e->spec, ts, fscope);
    for (const auto &pr : protocols) fscope.protocols[pr->effect] = pr;
    auto [fbody, feff] = expr(e->kids[0], fscope, e->ann);
    if (e->ann) expect_type(e->ann, fbody->ty, e->kids[0]->span, "function body");
    lf.ret = e->ann ? e->ann : fbody->ty;
    c->ann = lf.ret;
    c->spec = spec(e->spec, ts, lf.ret, protocols, e->span);
    tp_.row_checks.push_back(RowCheck{e->name, e->span, lf.performs, feff});
    Scope inner = s;
    inner.fns[e->name] = lf;
    inner.vars.erase(e->name);
    auto [body, ef2] = expr(e->kids[1], inner, expected);
    merge(eff, ef2);
    c->kids = {fbody, body};
    c->ty = body->ty;
    return {c, eff};
  }

  Res fun(const ExprPtr &e, std::shared_ptr<Expr> c, const Scope &s) {
    if (e->params.size() != 1) type_error(e->span, "anonymous functions take exactly one parameter");
    Scope inner = s;
    inner.function = "fun";
    TermScope ts = term_scope(s);
    const Param &prm = e->params[0];
    check_param(prm);
    if (prm.ghost) type_error(prm.span, "anonymous function parameters cannot be ghost");
    if (prm.name != "()" && prm.name != "_") {
      inner.vars[prm.name] = prm.ty;
      inner.fns.erase(prm.name);
      ts.vars[prm.name] = prm.ty;
    }
    if (e->ann) check_type(e->ann, e->span);
    if (e->spec && !e->spec->protocols.empty()) type_error(e->span, "protocols cannot be declared on lambdas");
    if (e->spec && e->spec->variant) type_error(e->span, "variant on a non-recursive function");
    auto [body, eff] = expr(e->kids[0], inner, e->ann);
    if (e->ann) expect_type(e->ann, body->ty, e->kids[0]->span, "function body");
    TypePtr ret = e->ann ? e->ann : body->ty;
    c->ann = ret;
    c->kids = {body};
    c->spec = spec(e->spec, ts, ret, {}, e->span);
    std::set<std::string> declared = e->spec ? performs_set(*e->spec) : std::set<std::string>{};
    tp_.row_checks.push_back(RowCheck{"fun", e->span, declared, eff});
    c->ty = Type::arrow(prm.ty, ret);
    return {c, {}};
  }

  Res app(const ExprPtr &e, std::shared_ptr<Expr> c, const Scope &s) {
    EffMap eff;
    const ExprPtr &callee = e->kids[0];
    if (callee->kind != Expr::Kind::Var)
      type_error(callee->span, "the function in an application must be a name");
    const std::string &f = callee->name;
    if (f == "ref" || f == "Array.make")
      sem_error(e->span, "mutable state must be defined at top level; local references are not supported");
    auto args = [&](const std::vector<Param> &params, TypePtr ret) {
      if (params.size() != e->kids.size() - 1)
        type_error(e->span, fmt::format("'{}' expects {} arguments", f, params.size()));
      for (size_t i = 0; i < params.size(); ++i) {
        auto [a, ef] = expr(e->kids[i + 1], s, params[i].ty);
        merge(eff, ef);
        expect_type(params[i].ty, a->ty, e->kids[i + 1]->span, "argument");
        c->kids[i + 1] = a;
      }
      auto cv = std::make_shared<Expr>(*callee);
      cv->ty = FunSig{f, params, ret, nullptr, false, {}}.arrow_type();
      c->kids[0] = cv;
      c->ty = ret;
    };
    if (auto it = s.vars.find(f); it != s.vars.end()) {
      TypePtr ft = it->second;
      if (ft->kind != Type::Kind::Arrow) type_error(e->span, fmt::format("'{}' is not a function", f));
      if (e->kids.size() != 2) type_error(e->span, "function values are applied to exactly one argument");
      auto [a, ef] = expr(e->kids[1], s, ft->args[0]);
      merge(eff, ef);
      expect_type(ft->args[0], a->ty, e->kids[1]->span, "argument");
      auto cv = std::make_shared<Expr>(*callee);
      cv->ty = ft;
      c->kids = {cv, a};
      c->name = "closure";
      c->ty = ft->args[1];
      return {c, eff};
    }
    if (auto it = s.fns.find(f); it != s.fns.end()) {
      args(it->second.params, it->second.ret);
      for (const auto &x : it->second.performs) eff.emplace(x, e->span);
      c->name = "local";
      return {c, eff};
    }
    if (auto it = tp_.functions.find(f); it != tp_.functions.end()) {
      args(it->second.params, it->second.ret);
      for (const auto &x : it->second.performs) eff.emplace(x, e->span);
      c->name = "global";
      return {c, eff};
    }
    if (s.conts.count(f)) type_error(e->span, fmt::format("continuation '{}' must be resumed with continue", f));
    sem_error(callee->span, fmt::format("unknown function '{}'", f));
  }

  Res try_(const ExprPtr &e, std::shared_ptr<Expr> c, const Scope &s, const TypePtr &expected) {
    EffMap eff;
    auto [scrut, seff] = expr(e->kids[0], s, nullptr);
    c->kids = {scrut};
    TypePtr declared = e->handler_spec ? e->handler_spec->returns : nullptr;
    if (declared) check_type(declared, e->handler_spec->span);
    TypePtr res;
    if (e->value_branch) {
      Scope inner = s;
      if (e->value_branch->name != "_") {
        check_name(e->value_branch->name, e->span);
        inner.vars[e->value_branch->name] = scrut->ty;
        inner.fns.erase(e->value_branch->name);
      }
      auto [vb, veff] = expr(e->value_branch->body, inner, declared ? declared : expected);
      merge(eff, veff);
      c->value_branch = ValueBranch{e->value_branch->name, vb};
      res = vb->ty;
    } else {
      res = scrut->ty;
    }
    if (declared && !type_equal(declared, res))
      type_error(e->handler_spec->span, fmt::format("handler returns {} but its specification declares returns {}",
                                                    type_str(res), type_str(declared)));
    std::set<std::string> handled;
    for (auto &br : c->branches) {
      auto it = tp_.effect_sigs.find(br.effect);
      if (it == tp_.effect_sigs.end()) sem_error(br.span, fmt::format("handler for undeclared effect '{}'", br.effect));
      if (!protocol_in_scope(s, br.effect))
        sem_error(br.span, fmt::format("handled effect '{}' has no protocol in scope", br.effect));
      if (!handled.insert(br.effect).second)
        sem_error(br.span, fmt::format("effect '{}' handled twice in one handler", br.effect));
      const EffectSig &sig = it->second;
      bool unit_arg = sig.args.size() == 1 && sig.args[0]->kind == Type::Kind::Unit;
      if (!(unit_arg && br.params.empty()) && br.params.size() != sig.args.size())
        type_error(br.span, fmt::format("effect {} carries {} arguments", br.effect, sig.args.size()));
      Scope inner = s;
      for (size_t i = 0; i < br.params.size(); ++i) {
        if (br.params[i] == "_") continue;
        check_name(br.params[i], br.span);
        inner.vars[br.params[i]] = sig.args[i];
        inner.fns.erase(br.params[i]);
      }
      check_name(br.k, br.span);
      inner.vars.erase(br.k);
      inner.conts[br.k] = ContInfo{br.effect, sig.reply, res};
      auto [body, beff] = expr(br.body, inner, res);
      merge(eff, beff);
      expect_type(res, body->ty, br.body->span, "handler branch");
      br.body = body;
    }
    for (const auto &[x, sp] : seff)
      if (!handled.count(x)) eff.emplace(x, sp);
    if (e->handler_spec) {
      auto hs = std::make_shared<HandlerSpec>(*e->handler_spec);
      TermScope ts = term_scope(s);
      ts.allow_old = true;
      ts.result = res;
      hs->try_ensures.clear();
      for (const auto &t : e->handler_spec->try_ensures) hs->try_ensures.push_back(bool_term(t, ts));
      c->handler_spec = hs;
    }
    c->ty = res;
    return {c, eff};
  }

  TypedProgram tp_;
};

}  // namespace

StateModel build_state_model(const SourceProgram &p) {
  StateModel m;
  for (const auto &d : p.decls) {
    if (d.kind == Decl::Kind::Function) collect_hidden_state(d.function->body);
    if (d.kind != Decl::Kind::State) continue;
    const StateDecl &sd = *d.state;
    if (m.find(sd.name)) sem_error(d.span, fmt::format("duplicate state variable '{}'", sd.name));
    StateVar v;
    v.name = sd.name;
    v.ty = sd.ty;
    v.elem = sd.ty->args[0];
    v.is_array = sd.ty->kind == Type::Kind::Array;
    v.size = sd.size;
    v.init = sd.init;
    if (v.is_array && v.size < 0) sem_error(d.span, "array size must be non-negative");
    m.vars.push_back(std::move(v));
  }
  return m;
}

StateModel build_state_model(const TypedProgram &p) { return p.state; }

TypedProgram typecheck(const SourceProgram &p) { return Checker().run(p); }

TypedProgram check_effect_rows(TypedProgram p) {
  for (const auto &rc : p.row_checks) {
    for (const auto &[eff, span] : rc.escaping) {
      if (!rc.declared.count(eff))
        fail(ErrorKind::Effect, span,
             fmt::format("effect {} escapes '{}' but is not listed in its performs clause", eff, rc.function));
    }
    if (rc.function != "fun") p.effect_rows[rc.function] = rc.declared;
  }
  return p;
}

TypedProgram analyze(const SourceProgram &p) { return check_effect_rows(typecheck(p)); }

}  // namespace effv
