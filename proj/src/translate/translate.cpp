#include "translate/translate.hpp"

#include <deque>
#include <functional>

#include <fmt/format.h>

namespace effv {

TermPtr combine_terms(const std::vector<TermPtr> &ts) { return tm::conj(ts); }

TermPtr unmodified_state(const std::vector<std::string> &vars, const StateModel &m) {
  std::vector<TermPtr> eqs;
  for (const auto &x : vars) {
    const StateVar *sv = m.find(x);
    TypePtr ft = sv ? (sv->is_array ? sv->ty : sv->elem) : nullptr;
    eqs.push_back(tm::eq(tm::field(tm::var("state", Type::state()), x, ft),
                         tm::field(tm::var("state_old", Type::state()), x, ft)));
  }
  return tm::conj(eqs);
}

TypePtr ir_type(const TypePtr &t) {
  if (!t) return t;
  if (t->kind == Type::Kind::Arrow) return Type::lambda(ir_type(t->args[0]), ir_type(t->args[1]));
  if (t->args.empty()) return t;
  auto c = std::make_shared<Type>(*t);
  for (auto &a : c->args) a = ir_type(a);
  return c;
}

TermPtr bind_args(const std::vector<Binder> &params, const TermPtr &arg, const TermPtr &body) {
  if (params.empty()) return body;
  if (params.size() == 1) return tm::let(params[0].first, arg, body);
  std::vector<PatternPtr> subs;
  std::vector<TypePtr> tys;
  for (const auto &[n, t] : params) {
    subs.push_back(n == "_" ? pat_wild() : pat_var(n, t));
    tys.push_back(t);
  }
  return tm::match(arg, {TermCase{pat_tuple(subs, Type::tuple(tys)), body}}, body->ty);
}

namespace {

TermPtr collapse_state_rec(const TermPtr &t, const StateModel &m) {
  if (t->names.size() != m.vars.size() || t->kids.empty()) return t;
  TermPtr base;
  for (size_t i = 0; i < t->kids.size(); ++i) {
    const TermPtr &k = t->kids[i];
    if (k->kind != Term::Kind::Field || k->name != t->names[i] || k->name != m.vars[i].name) return t;
    if (!base) base = k->kids[0];
    else if (!term_equal(base, k->kids[0])) return t;
  }
  return base;
}

TermPtr state_form(const TermPtr &t, const StateModel &m, const TermPtr &cur, const TermPtr &old,
                   const std::set<std::string> &bound) {
  using K = Term::Kind;
  auto field_ty = [&](const std::string &n) {
    const StateVar *sv = m.find(n);
    return sv->is_array ? sv->ty : sv->elem;
  };
  switch (t->kind) {
    case K::Deref: return tm::field(cur, t->name, field_ty(t->name));
    case K::Var:
      if (!bound.count(t->name) && m.find(t->name) && m.find(t->name)->is_array)
        return tm::field(cur, t->name, field_ty(t->name));
      return t;
    case K::Old:
      if (!old) fail(ErrorKind::Translate, t->span, "'old' has no earlier state to refer to here");
      return state_form(t->kids[0], m, old, old, bound);
    case K::Forall:
    case K::Exists: {
      std::set<std::string> b2 = bound;
      for (const auto &[n, _] : t->binders) b2.insert(n);
      auto c = std::make_shared<Term>(*t);
      for (auto &k : c->kids) k = state_form(k, m, cur, old, b2);
      for (auto &g : c->triggers)
        for (auto &x : g) x = state_form(x, m, cur, old, b2);
      return c;
    }
    case K::Let: {
      auto c = std::make_shared<Term>(*t);
      c->kids[0] = state_form(t->kids[0], m, cur, old, bound);
      std::set<std::string> b2 = bound;
      b2.insert(t->name);
      c->kids[1] = state_form(t->kids[1], m, cur, old, b2);
      return c;
    }
    case K::Match: {
      auto c = std::make_shared<Term>(*t);
      c->kids[0] = state_form(t->kids[0], m, cur, old, bound);
      for (auto &cs : c->cases) {
        std::set<std::string> b2 = bound;
        std::vector<std::pair<std::string, TypePtr>> vs;
        pattern_vars(*cs.pat, vs);
        for (const auto &[n, _] : vs) b2.insert(n);
        cs.body = state_form(cs.body, m, cur, old, b2);
      }
      return c;
    }
    default: {
      if (t->kids.empty()) return t;
      auto c = std::make_shared<Term>(*t);
      for (auto &k : c->kids) k = state_form(k, m, cur, old, bound);
      if (t->kind == K::StateRec) return collapse_state_rec(c, m);
      return c;
    }
  }
}

}  // namespace

TermPtr to_state_form(const TermPtr &t, const StateModel &m, const TermPtr &cur, const TermPtr &old) {
  return state_form(t, m, cur, old, {});
}

namespace {

using Mu = std::set<std::string>;

struct ProtoInfo {
  ProtocolPtr pr;
  std::string pre, post, perform;
};

struct ContSite {
  std::string effect;
  std::vector<std::shared_ptr<IrExpr>> *pending;
};

struct Ctx {
  std::map<std::string, ProtocolPtr> protocols;
  std::set<std::string> nu;
  std::map<std::string, Mu> delta;  // local functions
  std::map<std::string, std::vector<Param>> sigs;
  std::map<std::string, ContSite> conts;
  std::set<std::string> performs;
  std::string top;  // enclosing top-level function
};

const TypePtr kState = Type::state();

TermPtr state_var(const char *n) { return tm::var(n, kState); }

class Translator {
 public:
  explicit Translator(const TypedProgram &tp) : tp_(tp) {
    ir_.state = tp.state;
    ir_.types = tp.types;
    ir_.type_order = tp.type_order;
    ir_.ctors = tp.ctors;
    ir_.logic = tp.logic;
  }

  Translation run() {
    // The empty program translates to the empty module, without the prelude.
    if (tp_.program.decls.empty()) trace("TEmpty", {});
    else prelude();
    for (const auto &d : tp_.program.decls) decl(d);
    ir_.sigma = env_.sigma;
    Translation out;
    out.ir = std::move(ir_);
    out.trace = std::move(trace_);
    out.env = std::move(env_);
    return out;
  }

 private:
  int trace(const char *rule, Span s) {
    trace_.entries.push_back(RuleTraceEntry{rule, s, static_cast<int>(trace_.entries.size())});
    return static_cast<int>(trace_.entries.size()) - 1;
  }

  std::vector<std::string> all_state() const { return tp_.state.names(); }

  std::vector<std::string> ordered(const Mu &mu) const {
    std::vector<std::string> out;
    for (const auto &v : tp_.state.vars)
      if (mu.count(v.name)) out.push_back(v.name);
    return out;
  }

  TermPtr cur_state() const { return current_state_term(tp_.state); }

  // ---- declarations -----------------------------------------------------------
  void prelude() {
    IrDecl st;
    st.kind = IrDecl::Kind::Prelude;
    st.name = "state";
    ir_.decls.push_back(st);
    IrDecl ct;
    ct.kind = IrDecl::Kind::Prelude;
    ct.name = "continuation";
    ir_.decls.push_back(ct);

    TypePtr a = Type::named("'a"), b = Type::named("'b");
    TermPtr S = cur_state();
    auto cont = std::make_shared<Routine>();
    cont->name = "continue";
    cont->role = Routine::Role::Perform;
    cont->params = {{"k", Type::cont(a, b), false}, {"arg", a, false}};
    cont->ret = b;
    TermPtr k = tm::var("k", Type::cont(a, b)), arg = tm::var("arg", a);
    cont->requires_ = {tm::valid(k), tm::pre(k, arg, S)};
    cont->ensures = {tm::post(k, arg, tm::old(S), S, tm::var("result", b))};
    cont->writes = {"k._valid"};
    for (const auto &v : tp_.state.vars) cont->writes.push_back(v.name);
    IrDecl cd;
    cd.kind = IrDecl::Kind::Prelude;
    cd.name = "continue";
    cd.routine = cont;
    ir_.decls.push_back(cd);

    auto app = std::make_shared<Routine>();
    app->name = "apply";
    app->role = Routine::Role::Perform;
    app->params = {{"f", Type::lambda(a, b), false}, {"arg", a, false}};
    app->ret = b;
    TermPtr f = tm::var("f", Type::lambda(a, b));
    app->requires_ = {tm::pre(f, arg, S)};
    app->ensures = {tm::post(f, arg, tm::old(S), S, tm::var("result", b))};
    app->writes = all_state();
    IrDecl ad;
    ad.kind = IrDecl::Kind::Prelude;
    ad.name = "apply";
    ad.routine = app;
    ir_.decls.push_back(ad);
  }

  void decl(const Decl &d) {
    switch (d.kind) {
      case Decl::Kind::Type: {
        IrDecl x;
        x.kind = IrDecl::Kind::Type;
        x.name = d.type->name;
        x.type = d.type;
        x.trace = trace("TDecl", d.span);
        ir_.decls.push_back(x);
        break;
      }
      case Decl::Kind::Effect: {
        const EffectDecl &ed = *d.effect;
        if (env_.sigma.count(ed.name))
          fail(ErrorKind::Translate, d.span, fmt::format("effect {} is already declared", ed.name));
        EffectSig sig = effect_type_split(ed.sig);
        env_.sigma[ed.name] = sig;
        IrDecl x;
        x.kind = IrDecl::Kind::Exception;
        x.name = ed.name;
        x.exn_args = sig.args;
        x.trace = trace("TEffect", d.span);
        ir_.decls.push_back(x);
        break;
      }
      case Decl::Kind::Protocol: emit_protocol(d.protocol, trace("TProtocol", d.span)); break;
      case Decl::Kind::State: {
        IrDecl x;
        x.kind = IrDecl::Kind::Global;
        x.name = d.state->name;
        x.global = *tp_.state.find(d.state->name);
        x.trace = trace("TDecl", d.span);
        ir_.decls.push_back(x);
        break;
      }
      case Decl::Kind::Logic: {
        IrDecl x;
        x.kind = IrDecl::Kind::Logic;
        x.name = d.logic->name;
        x.logic = tp_.logic.at(d.logic->name);
        x.trace = trace("TDecl", d.span);
        ir_.decls.push_back(x);
        break;
      }
      case Decl::Kind::Function: {
        const FunctionDecl &fd = *d.function;
        int t = trace("TLet", d.span);
        Ctx ctx;
        ctx.top = fd.name;
        handler_count_ = 0;
        current_body_ = fd.body;
        auto r = function(fd.name, fd.params, fd.ret, fd.spec, fd.rec, fd.body, Routine::Role::Function, ctx,
                          d.span, t, /*global=*/true);
        env_.delta[fd.name] = Mu(r->writes.begin(), r->writes.end());
        global_sigs_[fd.name] = fd.params;
        IrDecl x;
        x.kind = IrDecl::Kind::Routine;
        x.name = fd.name;
        x.routine = r;
        x.trace = t;
        ir_.decls.push_back(x);
        break;
      }
    }
  }

  // P(E, x̄, Σ, term_pre, term_post, mod)
  const ProtoInfo &emit_protocol(const ProtocolPtr &pr, int t) {
    if (auto it = protos_.find(pr.get()); it != protos_.end()) return it->second;
    const EffectSig &sig = env_.sigma.at(pr->effect);
    std::string base = pr->effect;
    for (int n = 2; ir_.logic.count("pre_" + base); ++n) base = fmt::format("{}_{}", pr->effect, n);
    ProtoInfo info{pr, "pre_" + base, "post_" + base, "perform_" + base};

    TypePtr A = pack_args(sig.args);
    std::vector<Binder> xs;
    for (size_t i = 0; i < pr->params.size(); ++i) xs.emplace_back(pr->params[i], sig.args[i]);
    std::vector<Binder> captured;
    for (const auto &[n, ty] : pr->captured) captured.emplace_back(n, ir_type(ty));
    TermPtr arg = tm::var("arg", A);

    auto pre = std::make_shared<LogicDecl>();
    pre->name = info.pre;
    pre->predicate = true;
    pre->params = captured;
    pre->params.emplace_back("arg", A);
    pre->params.emplace_back("state", kState);
    pre->ret = Type::bool_();
    pre->body = bind_args(xs, arg, to_state_form(combine_terms(pr->requires_), tp_.state, state_var("state"), nullptr));

    auto post = std::make_shared<LogicDecl>();
    post->name = info.post;
    post->predicate = true;
    post->params = captured;
    post->params.emplace_back("arg", A);
    post->params.emplace_back("old_state", kState);
    post->params.emplace_back("state", kState);
    post->params.emplace_back("reply", sig.reply);
    post->ret = Type::bool_();
    post->body = bind_args(
        xs, arg, to_state_form(combine_terms(pr->ensures), tp_.state, state_var("state"), state_var("old_state")));

    for (const auto &l : {pre, post}) {
      ir_.logic[l->name] = l;
      IrDecl x;
      x.kind = IrDecl::Kind::Logic;
      x.name = l->name;
      x.logic = l;
      x.trace = t;
      ir_.decls.push_back(x);
    }

    auto perf = std::make_shared<Routine>();
    perf->name = info.perform;
    perf->role = Routine::Role::Perform;
    for (const auto &[n, ty] : captured) perf->params.push_back(IrParam{n, ty, true});
    perf->params.push_back(IrParam{"arg", A, false});
    perf->ret = sig.reply;
    TermPtr S = cur_state();
    perf->requires_ = {pre_app(info, captured, arg, S)};
    std::vector<TermPtr> pargs;
    for (const auto &[n, ty] : captured) pargs.push_back(tm::var(n, ty));
    pargs.push_back(arg);
    pargs.push_back(tm::old(S));
    pargs.push_back(S);
    pargs.push_back(tm::var("result", sig.reply));
    perf->ensures = {tm::app(info.post, pargs, Type::bool_())};
    perf->raises = {RaisesClause{pr->effect, "arg", A, pre_app(info, captured, arg, S)}};
    perf->writes = ordered(Mu(pr->modifies.begin(), pr->modifies.end()));
    perf->writes_explicit = true;
    perf->span = pr->span;
    perf->trace = t;
    IrDecl x;
    x.kind = IrDecl::Kind::Routine;
    x.name = perf->name;
    x.routine = perf;
    x.trace = t;
    ir_.decls.push_back(x);
    if (!pr->modifies.empty()) trace("TModifies", pr->span);
    return protos_[pr.get()] = info;
  }

  static TermPtr pre_app(const ProtoInfo &info, const std::vector<Binder> &captured, const TermPtr &arg,
                         const TermPtr &S) {
    std::vector<TermPtr> args;
    for (const auto &[n, ty] : captured) args.push_back(tm::var(n, ty));
    args.push_back(arg);
    args.push_back(S);
    return tm::app(info.pre, args, Type::bool_());
  }

  ProtocolPtr protocol_for(const Ctx &ctx, const std::string &e) const {
    if (auto it = ctx.protocols.find(e); it != ctx.protocols.end()) return it->second;
    if (auto it = tp_.protocols.find(e); it != tp_.protocols.end()) return it->second;
    return nullptr;
  }

  const ProtoInfo &info_for(const Ctx &ctx, const std::string &e, Span s) {
    ProtocolPtr pr = protocol_for(ctx, e);
    if (!pr) fail(ErrorKind::Translate, s, fmt::format("effect {} has no protocol in scope", e));
    return emit_protocol(pr, -1);
  }

  // TPerformsClause: raises { E arg -> pre_E arg S }
  std::vector<RaisesClause> raises_for(const Ctx &ctx, const std::set<std::string> &performs, Span s) {
    std::vector<RaisesClause> out;
    for (const auto &e : tp_.effect_order) {
      if (!performs.count(e)) continue;
      trace("TPerformsClause", s);
      TypePtr A = pack_args(env_.sigma.at(e).args);
      TermPtr arg = tm::var("arg", A);
      ProtocolPtr pr = protocol_for(ctx, e);
      TermPtr cond = tm::true_();
      if (!pr) pr = nested_protocol(e);
      if (pr && !ctx.protocols.count(e) && !tp_.protocols.count(e)) {
        // Declared by a nested function only: some instance of it holds.
        const ProtoInfo &info = emit_protocol(pr, -1);
        std::vector<Binder> captured;
        for (const auto &[n, ty] : pr->captured) captured.emplace_back(n, ir_type(ty));
        cond = pre_app(info, captured, arg, cur_state());
        if (!captured.empty()) cond = tm::exists(captured, cond);
      } else if (pr) {
        const ProtoInfo &info = emit_protocol(pr, -1);
        std::vector<Binder> captured;
        for (const auto &[n, ty] : pr->captured) captured.emplace_back(n, ir_type(ty));
        cond = pre_app(info, captured, arg, cur_state());
      }
      out.push_back(RaisesClause{e, "arg", A, cond});
    }
    return out;
  }

  ProtocolPtr nested_protocol(const std::string &effect) const {
    ProtocolPtr found;
    std::function<void(const ExprPtr &)> walk = [&](const ExprPtr &e) {
      if (!e || found) return;
      if (e->spec)
        for (const auto &pr : e->spec->protocols)
          if (pr->effect == effect) found = pr;
      for (const auto &k : e->kids) walk(k);
      for (const auto &c : e->cases) walk(c.body);
      for (const auto &b : e->branches) walk(b.body);
      if (e->value_branch) walk(e->value_branch->body);
    };
    walk(current_body_);
    return found;
  }

  static std::vector<IrParam> ir_params(const std::vector<Param> &ps) {
    std::vector<IrParam> out;
    for (const auto &p : ps)
      if (p.name != "()") out.push_back(IrParam{p.name, ir_type(p.ty), p.ghost});
    return out;
  }

  RoutinePtr function(const std::string &name, const std::vector<Param> &params, const TypePtr &ret,
                      const SpecPtr &spec, bool rec, const ExprPtr &body, Routine::Role role, Ctx ctx, Span span,
                      int t, bool global) {
    ctx.performs.clear();
    if (spec) {
      ctx.performs.insert(spec->performs.begin(), spec->performs.end());
      for (const auto &pr : spec->protocols) {
        emit_protocol(pr, trace("TProtocol", pr->span));
        ctx.protocols[pr->effect] = pr;
      }
    }
    for (const auto &p : params) {
      if (p.ty && p.ty->kind == Type::Kind::Arrow) ctx.nu.insert(p.name);
      else ctx.nu.erase(p.name);
      ctx.delta.erase(p.name);
      ctx.sigs.erase(p.name);
    }
    if (rec) ctx.sigs[name] = params;

    auto r = std::make_shared<Routine>();
    r->name = name;
    r->role = role;
    r->params = ir_params(params);
    r->ret = ir_type(ret);
    r->rec = rec;
    r->span = span;
    r->trace = t;
    if (spec) {
      r->requires_ = spec->requires_;
      r->ensures = spec->ensures;
      r->variant = spec->variant;
      r->raises = raises_for(ctx, ctx.performs, spec->span);
      if (!spec->modifies.empty()) {
        trace("TModifies", spec->span);
        r->writes = ordered(Mu(spec->modifies.begin(), spec->modifies.end()));
        r->writes_explicit = true;
      }
    }

    // Δ(f) for a recursive function is the least fixpoint of its own body's μ.
    Mu assumed;
    for (int round = 0;; ++round) {
      Saved saved = save();
      if (rec) {
        if (r->writes_explicit) assumed = Mu(r->writes.begin(), r->writes.end());
        if (global) env_.delta[name] = assumed;
        else ctx.delta[name] = assumed;
      }
      auto [b, mu] = expr(body, ctx, {});
      bool stable = !rec || r->writes_explicit || mu == assumed || round > static_cast<int>(tp_.state.vars.size());
      if (stable) {
        r->body = b;
        if (!r->writes_explicit) r->writes = ordered(mu);
        break;
      }
      restore(saved);
      for (const auto &v : mu) assumed.insert(v);
    }
    return r;
  }

  struct Saved {
    size_t trace_size, decls_size;
    int fresh, handlers;
    std::map<const Protocol *, ProtoInfo> protos;
    std::map<std::string, std::shared_ptr<const LogicDecl>> logic;
  };

  Saved save() const { return {trace_.entries.size(), ir_.decls.size(), fresh_, handler_count_, protos_, ir_.logic}; }

  void restore(const Saved &s) {
    trace_.entries.resize(s.trace_size);
    ir_.decls.resize(s.decls_size);
    fresh_ = s.fresh;
    handler_count_ = s.handlers;
    protos_ = s.protos;
    ir_.logic = s.logic;
  }

  // ---- expressions ------------------------------------------------------------
  using Res = std::pair<IrExprPtr, Mu>;

  static std::shared_ptr<IrExpr> node(IrExpr::Kind k, const ExprPtr &src) {
    auto n = std::make_shared<IrExpr>();
    n->kind = k;
    n->ty = ir_type(src->ty);
    n->span = src->span;
    return n;
  }

  static void bind_local(Ctx &ctx, const std::string &name, const TypePtr &ty) {
    ctx.delta.erase(name);
    ctx.sigs.erase(name);
    ctx.conts.erase(name);
    if (ty && ty->kind == Type::Kind::Arrow) ctx.nu.insert(name);
    else ctx.nu.erase(name);
  }

  Res expr(const ExprPtr &e, const Ctx &ctx, Mu mu) {
    using K = Expr::Kind;
    switch (e->kind) {
      case K::Int: return {ir::lit(tm::int_(e->ival)), mu};
      case K::Bool: return {ir::lit(tm::bool_(e->ival != 0)), mu};
      case K::Unit: return {ir::lit(tm::unit()), mu};
      case K::Var: {
        auto n = node(IrExpr::Kind::Var, e);
        n->name = e->name;
        return {n, mu};
      }
      case K::Deref: {
        auto n = node(IrExpr::Kind::Deref, e);
        n->name = e->name;
        return {n, mu};
      }
      case K::Assign:
      case K::ArrGet:
      case K::ArrSet: {
        auto n = node(e->kind == K::Assign ? IrExpr::Kind::Assign
                                           : e->kind == K::ArrGet ? IrExpr::Kind::ArrGet : IrExpr::Kind::ArrSet,
                      e);
        n->name = e->name;
        for (const auto &k : e->kids) {
          auto [x, m2] = expr(k, ctx, mu);
          n->kids.push_back(x);
          mu = m2;
        }
        if (e->kind != K::ArrGet) mu.insert(e->name);
        return {n, mu};
      }
      case K::Unop: {
        auto n = node(IrExpr::Kind::Unop, e);
        n->name = e->name;
        auto [x, m2] = expr(e->kids[0], ctx, mu);
        n->kids = {x};
        return {n, m2};
      }
      case K::Binop: {
        auto [a, m1] = expr(e->kids[0], ctx, mu);
        auto [b, m2] = expr(e->kids[1], ctx, m1);
        if (e->op == BinOp::And || e->op == BinOp::Or) {
          auto n = node(IrExpr::Kind::If, e);
          IrExprPtr konst = ir::lit(tm::bool_(e->op == BinOp::Or));
          n->kids = e->op == BinOp::And ? std::vector<IrExprPtr>{a, b, konst} : std::vector<IrExprPtr>{a, konst, b};
          return {n, m2};
        }
        auto n = node(IrExpr::Kind::Binop, e);
        n->op = e->op;
        n->kids = {a, b};
        return {n, m2};
      }
      case K::Ctor:
      case K::Tuple: {
        auto n = node(e->kind == K::Ctor ? IrExpr::Kind::Ctor : IrExpr::Kind::Tuple, e);
        n->name = e->name;
        for (const auto &k : e->kids) {
          auto [x, m2] = expr(k, ctx, mu);
          n->kids.push_back(x);
          mu = m2;
        }
        return {n, mu};
      }
      case K::Seq: {
        auto n = node(IrExpr::Kind::Seq, e);
        n->trace = trace("TSeq", e->span);
        auto [a, m1] = expr(e->kids[0], ctx, mu);
        auto [b, m2] = expr(e->kids[1], ctx, m1);
        n->kids = {a, b};
        return {n, m2};
      }
      case K::If: {
        auto n = node(IrExpr::Kind::If, e);
        n->trace = trace("TIf", e->span);
        auto [c, m0] = expr(e->kids[0], ctx, mu);
        auto [a, m1] = expr(e->kids[1], ctx, m0);
        auto [b, m2] = expr(e->kids[2], ctx, m1);
        n->kids = {c, a, b};
        return {n, m2};
      }
      case K::Match: {
        auto n = node(IrExpr::Kind::Match, e);
        n->trace = trace("TMatch", e->span);
        auto [s, m0] = expr(e->kids[0], ctx, mu);
        n->kids = {s};
        mu = m0;
        for (const auto &c : e->cases) {
          Ctx inner = ctx;
          std::vector<std::pair<std::string, TypePtr>> vs;
          pattern_vars(*c.pat, vs);
          for (const auto &[v, ty] : vs) bind_local(inner, v, ty);
          auto [b, m2] = expr(c.body, inner, mu);
          n->cases.push_back(IrCase{c.pat, b});
          mu = m2;
        }
        return {n, mu};
      }
      case K::Let: return let(e, ctx, mu);
      case K::Fun: return fun(e, ctx, mu);
      case K::App: return app(e, ctx, mu);
      case K::Perform: return perform(e, ctx, mu);
      case K::Try: return try_(e, ctx, mu);
      case K::Continue: {
        auto n = node(IrExpr::Kind::Continue, e);
        n->name = e->name;
        auto [x, m2] = expr(e->kids[0], ctx, mu);
        n->kids = {x};
        const ContSite &site = ctx.conts.at(e->name);
        site.pending->push_back(n);
        ProtocolPtr pr = protocol_for(ctx, site.effect);
        if (pr) m2.insert(pr->modifies.begin(), pr->modifies.end());
        return {n, m2};
      }
    }
    fail(ErrorKind::Internal, e->span, "unhandled expression form in translation");
  }

  // TLetIn
  Res let(const ExprPtr &e, const Ctx &ctx, Mu mu) {
    int t = trace("TLetIn", e->span);
    if (e->params.empty()) {
      auto [v, m1] = expr(e->kids[0], ctx, mu);
      Ctx inner = ctx;
      std::string name = e->name == "()" ? "_" : e->name;
      if (name != "_") bind_local(inner, name, e->kids[0]->ty);
      auto [b, m2] = expr(e->kids[1], inner, m1);
      auto n = node(IrExpr::Kind::Let, e);
      n->name = name;
      n->kids = {v, b};
      n->trace = t;
      return {n, m2};
    }
    auto r = function(e->name, e->params, e->ann, e->spec, e->rec, e->kids[0], Routine::Role::Local, ctx, e->span, t,
                      false);
    Ctx inner = ctx;
    bind_local(inner, e->name, nullptr);
    inner.delta[e->name] = Mu(r->writes.begin(), r->writes.end());
    inner.sigs[e->name] = e->params;
    auto [b, m2] = expr(e->kids[1], inner, mu);
    auto n = node(IrExpr::Kind::LetRoutine, e);
    n->routine = r;
    n->kids = {b};
    n->trace = t;
    return {n, m2};
  }

  // TFun, through D
  Res fun(const ExprPtr &e, const Ctx &ctx, Mu mu) {
    int t = trace("TFun", e->span);
    const Param &p = e->params[0];
    std::string name = fmt::format("fun__{}", ++fresh_);
    TypePtr a = ir_type(p.ty), rt = ir_type(e->ann);
    Ctx inner = ctx;
    inner.performs.clear();
    if (e->spec) inner.performs.insert(e->spec->performs.begin(), e->spec->performs.end());
    std::string pname = p.name == "()" ? "_" : p.name;
    if (pname != "_") bind_local(inner, pname, p.ty);
    auto [body, body_mu] = expr(e->kids[0], inner, {});
    (void)body_mu;

    auto f = std::make_shared<Routine>();
    f->name = name;
    f->role = Routine::Role::Lambda;
    f->params = {IrParam{pname, a, false}};
    f->ret = rt;
    f->span = e->span;
    f->trace = t;
    std::vector<TermPtr> req, ens;
    if (e->spec) {
      req = e->spec->requires_;
      ens = e->spec->ensures;
      f->raises = raises_for(inner, inner.performs, e->spec->span);
    }
    f->requires_ = req;
    f->ensures = ens;
    f->writes = all_state();
    f->body = body;

    std::vector<Binder> xs;
    if (pname != "_") xs.emplace_back(pname, a);
    TermPtr term_pre = to_state_form(combine_terms(req), tp_.state, state_var("state"), nullptr);
    TermPtr term_post =
        to_state_form(combine_terms(ens), tp_.state, state_var("state"), state_var("old_state"));
    TypePtr lam = Type::lambda(a, rt);
    auto gen = std::make_shared<Routine>();
    gen->name = "gen_" + name;
    gen->role = Routine::Role::Generator;
    gen->ret = lam;
    gen->span = e->span;
    gen->trace = t;
    gen->ensures = {pre_equiv(tm::var("result", lam), a, bind_args(xs, tm::var("arg", a), term_pre)),
                    post_equiv(lam, a, rt, "old_state", bind_args(xs, tm::var("arg", a), term_post))};

    auto call = ir::call(gen->name, {}, lam);
    auto n = node(IrExpr::Kind::LetRoutine, e);
    n->routine = f;
    n->kids = {ir::let_routine(gen, call)};
    n->trace = t;
    return {n, mu};
  }

  // forall arg state. pre v arg state <-> body
  static TermPtr pre_equiv(const TermPtr &v, const TypePtr &a, const TermPtr &body) {
    TermPtr app = tm::pre(v, tm::var("arg", a), state_var("state"));
    return tm::forall({{"arg", a}, {"state", kState}}, tm::iff(app, body), {{app}});
  }

  // let f = result in forall arg <old> state result. post f arg <old> state result <-> body
  static TermPtr post_equiv(const TypePtr &fty, const TypePtr &a, const TypePtr &r, const char *old_name,
                            const TermPtr &body) {
    TermPtr f = tm::var("f__", fty);
    TermPtr app = tm::post(f, tm::var("arg", a), tm::var(old_name, kState), state_var("state"), tm::var("result", r));
    TermPtr q = tm::forall({{"arg", a}, {old_name, kState}, {"state", kState}, {"result", r}}, tm::iff(app, body),
                           {{app}});
    return tm::let("f__", tm::var("result", fty), q);
  }

  // TApp / TAppDefun
  Res app(const ExprPtr &e, const Ctx &ctx, Mu mu) {
    const std::string &f = e->kids[0]->name;
    if (e->name == "closure" || ctx.nu.count(f)) {
      int t = trace("TAppDefun", e->span);
      if (!ctx.nu.count(f))
        fail(ErrorKind::Translate, e->span, fmt::format("'{}' is applied but is not a defunctionalized value", f));
      auto [x, m1] = expr(e->kids[1], ctx, mu);
      (void)m1;
      auto n = node(IrExpr::Kind::Apply, e);
      n->name = f;
      n->kids = {x};
      n->trace = t;
      Mu all(tp_.state.names().begin(), tp_.state.names().end());
      auto names = tp_.state.names();
      return {n, Mu(names.begin(), names.end())};
    }
    int t = trace("TApp", e->span);
    const std::vector<Param> *params = nullptr;
    if (auto it = ctx.sigs.find(f); it != ctx.sigs.end()) params = &it->second;
    else if (auto it2 = global_sigs_.find(f); it2 != global_sigs_.end()) params = &it2->second;
    else if (auto it3 = tp_.functions.find(f); it3 != tp_.functions.end()) params = &it3->second.params;
    if (!params) fail(ErrorKind::Translate, e->span, fmt::format("call of unknown function '{}'", f));
    auto n = node(IrExpr::Kind::Call, e);
    n->name = f;
    n->trace = t;
    for (size_t i = 1; i < e->kids.size(); ++i) {
      auto [x, m2] = expr(e->kids[i], ctx, mu);
      mu = m2;
      if ((*params)[i - 1].name != "()") n->kids.push_back(x);
    }
    const Mu *d = nullptr;
    if (auto it = ctx.delta.find(f); it != ctx.delta.end()) d = &it->second;
    else if (auto it2 = env_.delta.find(f); it2 != env_.delta.end()) d = &it2->second;
    if (d) mu.insert(d->begin(), d->end());
    return {n, mu};
  }

  // TPerform
  Res perform(const ExprPtr &e, const Ctx &ctx, Mu mu) {
    int t = trace("TPerform", e->span);
    const ProtoInfo &info = info_for(ctx, e->name, e->span);
    const EffectSig &sig = env_.sigma.at(e->name);
    auto n = node(IrExpr::Kind::Call, e);
    n->name = info.perform;
    n->trace = t;
    for (const auto &[c, ty] : info.pr->captured) n->kids.push_back(ir::var(c, ir_type(ty)));
    std::vector<IrExprPtr> args;
    for (const auto &k : e->kids) {
      auto [x, m2] = expr(k, ctx, mu);
      args.push_back(x);
      mu = m2;
    }
    n->kids.push_back(pack(args, sig));
    mu.insert(info.pr->modifies.begin(), info.pr->modifies.end());
    return {n, mu};
  }

  static IrExprPtr pack(const std::vector<IrExprPtr> &args, const EffectSig &sig) {
    if (args.empty()) return ir::lit(tm::unit());
    if (args.size() == 1) return args[0];
    auto t = std::make_shared<IrExpr>();
    t->kind = IrExpr::Kind::Tuple;
    t->kids = args;
    t->ty = pack_args(sig.args);
    return t;
  }

  static TermPtr pack_term(const std::vector<IrParam> &ps, const EffectSig &sig) {
    if (ps.empty()) return tm::unit();
    if (ps.size() == 1) return tm::var(ps[0].name, ps[0].ty);
    std::vector<TermPtr> items;
    for (const auto &p : ps) items.push_back(tm::var(p.name, p.ty));
    return tm::tuple(items, pack_args(sig.args));
  }

  // TTry, through H
  Res try_(const ExprPtr &e, const Ctx &ctx, Mu mu_in) {
    int t = trace("TTry", e->span);
    TypePtr tau = ir_type(e->ty);
    if (!e->handler_spec && !e->branches.empty())
      fail(ErrorKind::Translate, e->span, "handler without a try_ensures specification");
    std::vector<TermPtr> try_ensures = e->handler_spec ? e->handler_spec->try_ensures : std::vector<TermPtr>{};

    auto [scrut, mu] = expr(e->kids[0], ctx, {});
    std::optional<std::pair<IrParam, IrExprPtr>> vb;
    if (e->value_branch) {
      Ctx inner = ctx;
      std::string name = e->value_branch->name;
      if (name != "_") bind_local(inner, name, e->kids[0]->ty);
      auto [b, m2] = expr(e->value_branch->body, inner, mu);
      mu = m2;
      vb = std::make_pair(IrParam{name, ir_type(e->kids[0]->ty), false}, b);
    }

    std::vector<std::shared_ptr<IrExpr>> pending;
    struct Branch {
      const EffectBranch *src;
      const ProtoInfo *info;
      std::vector<IrParam> params;
      IrExprPtr body;
    };
    std::vector<Branch> branches;
    for (const auto &br : e->branches) {
      const ProtoInfo &info = info_for(ctx, br.effect, br.span);
      const EffectSig &sig = env_.sigma.at(br.effect);
      Ctx inner = ctx;
      std::vector<IrParam> ps;
      for (size_t i = 0; i < br.params.size(); ++i) {
        ps.push_back(IrParam{br.params[i], ir_type(sig.args[i]), false});
        if (br.params[i] != "_") bind_local(inner, br.params[i], sig.args[i]);
      }
      bind_local(inner, br.k, nullptr);
      inner.conts[br.k] = ContSite{br.effect, &pending};
      auto [b, m2] = expr(br.body, inner, mu);
      mu = m2;
      branches.push_back(Branch{&br, &info, ps, b});
    }
    const Mu &mu_n1 = mu;
    for (auto &c : pending) {
      const ContSite &site = find_site(e, c);
      ProtocolPtr pr = protocol_for(ctx, site.effect);
      Mu w = mu_n1;
      if (pr) w.insert(pr->modifies.begin(), pr->modifies.end());
      c->writes = ordered(w);
    }

    std::vector<std::string> frame;
    for (const auto &v : tp_.state.vars)
      if (!mu_n1.count(v.name)) frame.push_back(v.name);
    TermPtr term_post = to_state_form(combine_terms(try_ensures), tp_.state, state_var("state"), state_var("state_old"));
    TermPtr invariant = tm::let("state_old", state_var("init_state"),
                                tm::and_(term_post, unmodified_state(frame, tp_.state)));

    std::vector<IrHandler> handlers;
    for (const auto &b : branches) {
      const EffectSig &sig = env_.sigma.at(b.src->effect);
      TypePtr kty = Type::cont(sig.reply, tau);
      auto gen = std::make_shared<Routine>();
      gen->name = "gen_" + b.src->k;
      gen->role = Routine::Role::Generator;
      gen->ret = kty;
      gen->span = b.src->span;
      gen->trace = t;
      std::vector<TermPtr> pargs;
      for (const auto &[c, ty] : b.info->pr->captured) pargs.push_back(tm::var(c, ir_type(ty)));
      pargs.push_back(pack_term(b.params, sig));
      pargs.push_back(state_var("eff_state"));
      pargs.push_back(state_var("state"));
      pargs.push_back(tm::var("arg", sig.reply));
      TermPtr proto_post = tm::app(b.info->post, pargs, Type::bool_());
      gen->ensures = {tm::valid(tm::var("result", kty)), pre_equiv(tm::var("result", kty), sig.reply, proto_post),
                      post_equiv(kty, sig.reply, tau, "irrelevant_old_state", invariant)};
      IrExprPtr body = ir::let(b.src->k, ir::call(gen->name, {}, kty), b.body);
      body = ir::let_routine(gen, body);
      body = ir::let("eff_state", ir::snapshot(), body);
      handlers.push_back(IrHandler{b.src->effect, b.params, body});
    }

    IrExprPtr inner_body;
    if (handlers.empty()) {
      inner_body = vb ? ir::let(vb->first.name, scrut, vb->second) : scrut;
    } else {
      auto tr = std::make_shared<IrExpr>();
      tr->kind = IrExpr::Kind::Try;
      tr->ty = tau;
      tr->span = e->span;
      tr->kids = {scrut};
      tr->value_branch = vb;
      tr->handlers = handlers;
      inner_body = tr;
    }
    auto h = std::make_shared<Routine>();
    h->name = handler_count_++ ? fmt::format("handler__{}", handler_count_) : "handler";
    h->role = Routine::Role::Handler;
    h->ret = tau;
    h->ensures = try_ensures;
    h->raises = raises_for(ctx, ctx.performs, e->span);
    h->writes = ordered(mu_n1);
    h->span = e->span;
    h->trace = t;
    h->body = ir::let("init_state", ir::snapshot(), inner_body);

    auto n = node(IrExpr::Kind::LetRoutine, e);
    n->routine = h;
    n->kids = {ir::call(h->name, {}, tau)};
    n->trace = t;
    Mu out = mu_in;
    out.insert(mu_n1.begin(), mu_n1.end());
    return {n, out};
  }

  // The pending list only holds continues of this try; their effect is recovered
  // from the branch that binds the continuation name.
  const ContSite &find_site(const ExprPtr &e, const std::shared_ptr<IrExpr> &c) {
    for (const auto &br : e->branches)
      if (br.k == c->name) {
        sites_.push_back(ContSite{br.effect, nullptr});
        return sites_.back();
      }
    fail(ErrorKind::Internal, c->span, "continue outside its handler");
  }

  const TypedProgram &tp_;
  IrProgram ir_;
  RuleTrace trace_;
  TransEnv env_;
  std::map<const Protocol *, ProtoInfo> protos_;
  std::map<std::string, std::vector<Param>> global_sigs_;
  std::deque<ContSite> sites_;
  ExprPtr current_body_;
  int fresh_ = 0;
  int handler_count_ = 0;
};

}  // namespace

Translation translate(const TypedProgram &p) { return Translator(p).run(); }

}  // namespace effv
