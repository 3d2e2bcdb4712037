#include <fmt/format.h>

#include <algorithm>
#include <functional>

#include "interp/interp.hpp"

namespace effv {

namespace {

struct EnvNode;
using Env = std::shared_ptr<const EnvNode>;
struct EnvNode {
  std::string name;
  ValuePtr value;
  Env next;
};

Env extend(Env env, const std::string &n, ValuePtr v) {
  if (n == "_" || n == "()") return env;
  return std::make_shared<const EnvNode>(EnvNode{n, std::move(v), std::move(env)});
}

ValuePtr lookup(const Env &env, const std::string &n) {
  for (const EnvNode *e = env.get(); e; e = e->next.get())
    if (e->name == n) return e->value;
  return nullptr;
}

struct RunError {
  RuntimeErrorKind kind;
  std::string message;
};

struct ViolationRaised {
  Violation v;
};

struct EntryPreUnmet {
  std::string clause;
};

}  // namespace

struct Closure {
  std::string fname;  // for diagnostics and blame
  std::vector<Param> params;
  const Expr *body = nullptr;
  Env env;
  std::string self;  // bound to the closure itself on each call (let rec)
  SpecPtr spec;
  std::vector<ValuePtr> applied;
};

namespace {

ValuePtr closure_value(std::shared_ptr<const Closure> c) {
  auto v = std::make_shared<Value>();
  v->kind = Value::Kind::Closure;
  v->clo = std::move(c);
  return v;
}

ValuePtr cont_value(int id) {
  auto v = std::make_shared<Value>();
  v->kind = Value::Kind::Cont;
  v->ival = id;
  return v;
}

ValuePtr state_value(const Store &s) {
  auto v = std::make_shared<Value>();
  v->kind = Value::Kind::State;
  v->state = std::make_shared<const Store>(s);
  return v;
}

ValuePtr pack(const std::vector<ValuePtr> &vals) {
  if (vals.empty()) return val::unit();
  if (vals.size() == 1) return vals[0];
  return val::tuple(vals);
}

// Binds names to a packed value: one name takes it whole, several split a tuple.
Env bind_packed(Env env, const std::vector<std::string> &names, const ValuePtr &v) {
  if (names.size() == 1) return extend(env, names[0], v);
  for (size_t i = 0; i < names.size() && v->kind == Value::Kind::Tuple && i < v->items.size(); ++i)
    env = extend(env, names[i], v->items[i]);
  return env;
}

bool match_pattern(const Pattern &pat, const ValuePtr &v, Env &env) {
  switch (pat.kind) {
    case Pattern::Kind::Wild:
    case Pattern::Kind::Unit: return true;
    case Pattern::Kind::Var: env = extend(env, pat.name, v); return true;
    case Pattern::Kind::Int: return v->kind == Value::Kind::Int && v->ival == pat.ival;
    case Pattern::Kind::Bool: return v->kind == Value::Kind::Bool && v->ival == pat.ival;
    case Pattern::Kind::Ctor:
      if (v->kind != Value::Kind::Ctor || v->name != pat.name || v->items.size() != pat.subs.size()) return false;
      for (size_t i = 0; i < pat.subs.size(); ++i)
        if (!match_pattern(*pat.subs[i], v->items[i], env)) return false;
      return true;
    case Pattern::Kind::Tuple:
      if (v->kind != Value::Kind::Tuple || v->items.size() != pat.subs.size()) return false;
      for (size_t i = 0; i < pat.subs.size(); ++i)
        if (!match_pattern(*pat.subs[i], v->items[i], env)) return false;
      return true;
  }
  return false;
}

std::optional<std::int64_t> arith(BinOp op, std::int64_t a, std::int64_t b) {
  switch (op) {
    case BinOp::Add: return a + b;
    case BinOp::Sub: return a - b;
    case BinOp::Mul: return a * b;
    case BinOp::Div: if (b == 0) return std::nullopt; return a / b;
    case BinOp::Mod: if (b == 0) return std::nullopt; return a % b;
    default: return std::nullopt;
  }
}

std::optional<bool> compare(BinOp op, const ValuePtr &a, const ValuePtr &b) {
  switch (op) {
    case BinOp::Eq:
    case BinOp::Iff: return value_equal(a, b);
    case BinOp::Neq: return !value_equal(a, b);
    default: break;
  }
  if (a->kind != Value::Kind::Int || b->kind != Value::Kind::Int) return std::nullopt;
  switch (op) {
    case BinOp::Lt: return a->ival < b->ival;
    case BinOp::Le: return a->ival <= b->ival;
    case BinOp::Gt: return a->ival > b->ival;
    case BinOp::Ge: return a->ival >= b->ival;
    default: return std::nullopt;
  }
}

struct ContRecord {
  std::vector<struct Frame> segment;
  bool consumed = false;
  Store snapshot;
  std::string effect;
  ProtocolPtr protocol;
  Env protocol_env;  // captured variables and protocol parameters
  Span span;
};

struct Frame {
  enum class K { Collect, Let, Seq, If, Match, Short, Handler, TryExit, PostCheck, ApplyRest };
  Frame(K k, const Expr *e = nullptr, Env env = {}) : k(k), e(e), env(std::move(env)) {}

  K k;
  const Expr *e;
  Env env;
  std::vector<ValuePtr> vals;
  std::shared_ptr<const Store> snapshot;
  std::shared_ptr<const Closure> clo;
};

class Machine {
 public:
  Machine(const TypedProgram &p, const RunOptions &opts) : p_(p), opts_(opts) {
    for (const auto &d : p.program.decls) {
      if (d.kind != Decl::Kind::Function) continue;
      const auto &f = *d.function;
      auto c = std::make_shared<Closure>();
      c->fname = f.name;
      c->params = f.params;
      c->body = f.body.get();
      c->spec = f.spec;
      globals_[f.name] = closure_value(c);
      index_protocols(f.body.get(), f.spec, {});
    }
    for (const auto &v : p.state.vars) max_len_ = std::max<std::int64_t>(max_len_, v.is_array ? v.size : 0);
  }

  RunResult go(const std::string &entry, const std::vector<ValuePtr> &args) {
    RunResult r;
    store_ = opts_.store ? *opts_.store : initial_store(p_);
    auto it = globals_.find(entry);
    try {
      if (it == globals_.end()) throw RunError{RuntimeErrorKind::Other, "no function named '" + entry + "'"};
      entry_call_ = true;
      ValuePtr f = it->second;
      if (args.empty() && !f->clo->params.empty()) {
        // A unit-only parameter list may be called with no arguments.
        std::vector<ValuePtr> units(f->clo->params.size(), val::unit());
        apply(f, units);
      } else {
        apply(f, args);
      }
      entry_call_ = false;
      loop();
      r.status = RunStatus::Value;
      r.value = value_;
    } catch (const RunError &e) {
      r.status = RunStatus::RuntimeError;
      r.error = e.kind;
      r.message = e.message;
    } catch (const ViolationRaised &v) {
      r.status = RunStatus::ContractViolation;
      r.violation = v.v;
      r.message = fmt::format("{} blame: {} {} violated", blame_str(v.v.side), v.v.subject, v.v.clause);
    } catch (const EntryPreUnmet &e) {
      r.status = RunStatus::PreconditionUnmet;
      r.message = "entry precondition does not hold: " + e.clause;
    }
    r.trace = std::move(trace_);
    r.final_store = store_;
    r.steps = steps_;
    r.try_installs = try_installs_;
    r.handler_pushes = handler_pushes_;
    r.performs_handled = performs_handled_;
    r.resumes = resumes_;
    r.checks = checks_;
    r.unchecked = unchecked_;
    return r;
  }

 private:
  // ---- protocol resolution --------------------------------------------------------
  void index_protocols(const Expr *e, const SpecPtr &spec, std::map<std::string, ProtocolPtr> scope) {
    if (!e) return;
    if (spec)
      for (const auto &pr : spec->protocols) scope[pr->effect] = pr;
    walk(e, scope);
  }

  void walk(const Expr *e, const std::map<std::string, ProtocolPtr> &scope) {
    if (e->kind == Expr::Kind::Perform) {
      auto it = scope.find(e->name);
      if (it != scope.end()) perform_protocol_[e] = it->second;
    }
    if ((e->kind == Expr::Kind::Let && !e->params.empty()) || e->kind == Expr::Kind::Fun) {
      index_protocols(e->kids[0].get(), e->spec, scope);
      for (size_t i = 1; i < e->kids.size(); ++i) walk(e->kids[i].get(), scope);
    } else {
      for (const auto &k : e->kids) walk(k.get(), scope);
    }
    for (const auto &c : e->cases) walk(c.body.get(), scope);
    for (const auto &b : e->branches) walk(b.body.get(), scope);
    if (e->value_branch) walk(e->value_branch->body.get(), scope);
  }

  ProtocolPtr protocol_for(const Expr *perform) const {
    auto it = perform_protocol_.find(perform);
    if (it != perform_protocol_.end()) return it->second;
    auto g = p_.protocols.find(perform->name);
    return g == p_.protocols.end() ? nullptr : g->second;
  }

  // ---- the machine ----------------------------------------------------------------
  void eval(const Expr *e, Env env) {
    ctl_expr_ = e;
    ctl_env_ = std::move(env);
    have_value_ = false;
  }
  void ret(ValuePtr v) {
    value_ = std::move(v);
    have_value_ = true;
  }

  void loop() {
    for (;;) {
      if (++steps_ > opts_.fuel) throw RunError{RuntimeErrorKind::FuelExhausted, fmt::format("fuel of {} steps exhausted", opts_.fuel)};
      if (!have_value_) {
        step(ctl_expr_, ctl_env_);
        continue;
      }
      if (stack_.empty()) return;
      Frame f = std::move(stack_.back());
      stack_.pop_back();
      resume(std::move(f), value_);
    }
  }

  void push(Frame f) { stack_.push_back(std::move(f)); }

  void step(const Expr *e, const Env &env) {
    using K = Expr::Kind;
    switch (e->kind) {
      case K::Int: ret(val::int_(e->ival)); return;
      case K::Bool: ret(val::bool_(e->ival != 0)); return;
      case K::Unit: ret(val::unit()); return;
      case K::Var: {
        if (ValuePtr v = lookup(env, e->name)) return ret(v);
        auto g = globals_.find(e->name);
        if (g != globals_.end()) return ret(g->second);
        throw RunError{RuntimeErrorKind::Other, "unbound variable " + e->name};
      }
      case K::Deref: ret(store_.at(e->name)); return;
      case K::Let:
        if (!e->params.empty()) {
          auto c = std::make_shared<Closure>();
          c->fname = e->name;
          c->params = e->params;
          c->body = e->kids[0].get();
          c->env = env;
          c->self = e->rec ? e->name : "";
          c->spec = e->spec;
          return eval(e->kids[1].get(), extend(env, e->name, closure_value(c)));
        }
        push({Frame::K::Let, e, env});
        return eval(e->kids[0].get(), env);
      case K::Fun: {
        auto c = std::make_shared<Closure>();
        c->fname = "fun";
        c->params = e->params;
        c->body = e->kids[0].get();
        c->env = env;
        c->spec = e->spec;
        return ret(closure_value(c));
      }
      case K::If: push({Frame::K::If, e, env}); return eval(e->kids[0].get(), env);
      case K::Seq: push({Frame::K::Seq, e, env}); return eval(e->kids[0].get(), env);
      case K::Match: push({Frame::K::Match, e, env}); return eval(e->kids[0].get(), env);
      case K::Binop:
        if (e->op == BinOp::And || e->op == BinOp::Or || e->op == BinOp::Implies) {
          push({Frame::K::Short, e, env});
          return eval(e->kids[0].get(), env);
        }
        break;
      case K::Try: {
        ++try_installs_;
        ++handler_pushes_;
        Frame exit{Frame::K::TryExit, e, env};
        exit.snapshot = std::make_shared<const Store>(store_);
        push(std::move(exit));
        push({Frame::K::Handler, e, env});
        return eval(e->kids[0].get(), env);
      }
      default: break;
    }
    if (e->kids.empty()) return finish(e, {}, env);
    push({Frame::K::Collect, e, env});
    eval(e->kids[0].get(), env);
  }

  void resume(Frame f, const ValuePtr &v) {
    const Expr *e = f.e;
    switch (f.k) {
      case Frame::K::Collect:
        f.vals.push_back(v);
        if (f.vals.size() < e->kids.size()) {
          const Expr *next = e->kids[f.vals.size()].get();
          Env env = f.env;
          push(std::move(f));
          return eval(next, env);
        }
        return finish(e, f.vals, f.env);
      case Frame::K::Let: return eval(e->kids[1].get(), extend(f.env, e->name, v));
      case Frame::K::Seq: return eval(e->kids[1].get(), f.env);
      case Frame::K::If:
        if (v->ival) return eval(e->kids[1].get(), f.env);
        if (e->kids.size() > 2) return eval(e->kids[2].get(), f.env);
        return ret(val::unit());
      case Frame::K::Match:
        for (const auto &c : e->cases) {
          Env env = f.env;
          if (match_pattern(*c.pat, v, env)) return eval(c.body.get(), env);
        }
        throw RunError{RuntimeErrorKind::MatchFailure, fmt::format("no case matches {} at {}", value_str(v), e->span.str())};
      case Frame::K::Short:
        if (e->op == BinOp::And && !v->ival) return ret(val::bool_(false));
        if (e->op == BinOp::Or && v->ival) return ret(val::bool_(true));
        if (e->op == BinOp::Implies && !v->ival) return ret(val::bool_(true));
        return eval(e->kids[1].get(), f.env);
      case Frame::K::Handler:
        if (e->value_branch) return eval(e->value_branch->body.get(), extend(f.env, e->value_branch->name, v));
        return ret(v);
      case Frame::K::TryExit:
        if (opts_.checked && e->handler_spec)
          for (const auto &t : e->handler_spec->try_ensures)
            check(t, extend(f.env, "result", v), *f.snapshot, Blame::Server, "handler", "try_ensures", e->span);
        return ret(v);
      case Frame::K::PostCheck:
        for (const auto &t : f.clo->spec->ensures)
          check(t, extend(f.env, "result", v), *f.snapshot, Blame::Callee, f.clo->fname, "ensures", t->span);
        return ret(v);
      case Frame::K::ApplyRest: return apply(v, f.vals);
    }
  }

  void finish(const Expr *e, const std::vector<ValuePtr> &vals, const Env &env) {
    using K = Expr::Kind;
    switch (e->kind) {
      case K::Ctor: return ret(val::ctor(e->name, vals));
      case K::Tuple: return ret(val::tuple(vals));
      case K::App: return apply(vals[0], {vals.begin() + 1, vals.end()});
      case K::Assign: store_[e->name] = vals[0]; return ret(val::unit());
      case K::ArrGet: {
        const auto &cells = store_.at(e->name)->items;
        std::int64_t i = vals[0]->ival;
        if (i < 0 || i >= static_cast<std::int64_t>(cells.size()))
          throw RunError{RuntimeErrorKind::IndexOutOfBounds, fmt::format("{}.({}) out of bounds at {}", e->name, i, e->span.str())};
        return ret(cells[i]);
      }
      case K::ArrSet: {
        auto cells = store_.at(e->name)->items;
        std::int64_t i = vals[0]->ival;
        if (i < 0 || i >= static_cast<std::int64_t>(cells.size()))
          throw RunError{RuntimeErrorKind::IndexOutOfBounds, fmt::format("{}.({}) out of bounds at {}", e->name, i, e->span.str())};
        cells[i] = vals[1];
        store_[e->name] = val::array(std::move(cells));
        return ret(val::unit());
      }
      case K::Unop:
        if (e->name == "not") return ret(val::bool_(!vals[0]->ival));
        return ret(val::int_(-vals[0]->ival));
      case K::Binop: {
        if (binop_is_arith(e->op)) {
          auto r = arith(e->op, vals[0]->ival, vals[1]->ival);
          if (!r) throw RunError{RuntimeErrorKind::DivisionByZero, "division by zero at " + e->span.str()};
          return ret(val::int_(*r));
        }
        return ret(val::bool_(compare(e->op, vals[0], vals[1]).value_or(false)));
      }
      case K::Perform: return perform(e, pack(vals), env);
      case K::Continue: return continue_(e, vals[0], env);
      default: throw RunError{RuntimeErrorKind::Other, "cannot evaluate expression at " + e->span.str()};
    }
  }

  void apply(const ValuePtr &f, std::vector<ValuePtr> args) {
    if (f->kind != Value::Kind::Closure) throw RunError{RuntimeErrorKind::Other, "application of a non-function"};
    const Closure &c = *f->clo;
    std::vector<ValuePtr> all = c.applied;
    all.insert(all.end(), args.begin(), args.end());
    if (all.size() < c.params.size()) {
      auto part = std::make_shared<Closure>(c);
      part->applied = std::move(all);
      return ret(closure_value(part));
    }
    std::vector<ValuePtr> extra(all.begin() + c.params.size(), all.end());
    if (!extra.empty()) {
      Frame rest{Frame::K::ApplyRest};
      rest.vals = std::move(extra);
      push(std::move(rest));
    }
    Env env = c.env;
    if (!c.self.empty()) env = extend(env, c.self, f);
    for (size_t i = 0; i < c.params.size(); ++i) env = extend(env, c.params[i].name, all[i]);
    bool entry = entry_call_;
    entry_call_ = false;
    if (opts_.checked && c.spec) {
      for (const auto &t : c.spec->requires_) {
        if (entry) {
          if (truth(t, env, store_, nullptr) == std::optional<bool>(false)) throw EntryPreUnmet{term_str(t)};
          continue;
        }
        check(t, env, store_, Blame::Caller, c.fname, "requires", t->span);
      }
      if (!c.spec->ensures.empty()) {
        Frame post{Frame::K::PostCheck};
        post.env = env;
        post.snapshot = std::make_shared<const Store>(store_);
        post.clo = f->clo;
        push(std::move(post));
      }
    }
    eval(c.body, env);
  }

  void perform(const Expr *e, const ValuePtr &payload, const Env &env) {
    size_t h = stack_.size();
    const EffectBranch *branch = nullptr;
    while (h-- > 0) {
      const Frame &f = stack_[h];
      if (f.k != Frame::K::Handler) continue;
      for (const auto &b : f.e->branches)
        if (b.effect == e->name) branch = &b;
      if (branch) break;
    }
    ContRecord rec;
    rec.effect = e->name;
    rec.snapshot = store_;
    rec.span = e->span;
    rec.protocol = protocol_for(e);
    if (rec.protocol) {
      Env penv;
      for (const auto &[n, _] : rec.protocol->captured)
        if (ValuePtr v = lookup(env, n)) penv = extend(penv, n, v);
      rec.protocol_env = bind_packed(penv, rec.protocol->params, payload);
      if (opts_.checked)
        for (const auto &t : rec.protocol->requires_)
          check(t, rec.protocol_env, store_, Blame::Client, e->name, "protocol requires", t->span);
    }
    int id = static_cast<int>(conts_.size());
    trace_.push_back({TraceEvent::Kind::Perform, e->name, payload, store_, store_, id});
    if (!branch && opts_.ambient_unit_handler) {
      auto sig = p_.effect_sigs.find(e->name);
      if (sig != p_.effect_sigs.end() && sig->second.reply->kind == Type::Kind::Unit) {
        trace_.back().cont = -1;
        return ret(val::unit());
      }
    }
    if (!branch)
      throw RunError{RuntimeErrorKind::UnhandledEffect, fmt::format("unhandled effect {} at {}", e->name, e->span.str())};
    ++performs_handled_;
    const Frame &hf = stack_[h];
    Env benv = bind_packed(hf.env, branch->params, payload);
    benv = extend(benv, branch->k, cont_value(id));
    rec.segment.assign(std::make_move_iterator(stack_.begin() + h), std::make_move_iterator(stack_.end()));
    stack_.erase(stack_.begin() + static_cast<std::ptrdiff_t>(h), stack_.end());
    conts_.push_back(std::move(rec));
    eval(branch->body.get(), benv);
  }

  void continue_(const Expr *e, const ValuePtr &reply, const Env &env) {
    ValuePtr k = lookup(env, e->name);
    if (!k || k->kind != Value::Kind::Cont) throw RunError{RuntimeErrorKind::Other, e->name + " is not a continuation"};
    ContRecord &rec = conts_[k->ival];
    if (rec.consumed)
      throw RunError{RuntimeErrorKind::OneShot,
                     fmt::format("continuation of {} (performed at {}) resumed twice at {}", rec.effect, rec.span.str(),
                                 e->span.str())};
    rec.consumed = true;
    trace_.push_back({TraceEvent::Kind::Continue, rec.effect, reply, rec.snapshot, store_, static_cast<int>(k->ival)});
    if (opts_.checked && rec.protocol) {
      Env penv = extend(rec.protocol_env, "reply", reply);
      for (const auto &t : rec.protocol->ensures)
        check(t, penv, rec.snapshot, Blame::Server, rec.effect, "protocol ensures", t->span);
      for (const auto &v : p_.state.vars) {
        if (std::find(rec.protocol->modifies.begin(), rec.protocol->modifies.end(), v.name) !=
            rec.protocol->modifies.end())
          continue;
        ++checks_;
        if (!value_equal(rec.snapshot.at(v.name), store_.at(v.name)))
          throw ViolationRaised{{Blame::Server, rec.effect, "modifies (" + v.name + " changed)", rec.snapshot, store_, e->span}};
      }
    }
    ++resumes_;
    ++handler_pushes_;
    std::vector<Frame> seg = rec.segment;
    for (auto &f : seg) stack_.push_back(std::move(f));
    ret(reply);
  }

  // ---- contract evaluation --------------------------------------------------------
  void check(const TermPtr &t, const Env &env, const Store &old, Blame side, const std::string &subject,
             const std::string &clause, Span span) {
    auto r = truth(t, env, store_, &old);
    if (!r) {
      ++unchecked_;
      return;
    }
    ++checks_;
    if (!*r) throw ViolationRaised{{side, subject, clause + " " + term_str(t), old, store_, span}};
  }

  std::optional<bool> truth(const TermPtr &t, const Env &env, const Store &now, const Store *old) {
    ValuePtr v = logic(t, env, now, old);
    if (!v || v->kind != Value::Kind::Bool) return std::nullopt;
    return v->ival != 0;
  }

  // Three-valued evaluation of specification terms: nullptr means the term is
  // outside the executable fragment (abstract predicates, unbounded quantifiers).
  ValuePtr logic(const TermPtr &t, const Env &env, const Store &now, const Store *old) {
    using K = Term::Kind;
    auto sub = [&](size_t i) { return logic(t->kids[i], env, now, old); };
    switch (t->kind) {
      case K::Int: return val::int_(t->ival);
      case K::Bool: return val::bool_(t->bval);
      case K::Unit: return val::unit();
      case K::Var: {
        if (ValuePtr v = lookup(env, t->name)) return v;
        auto it = now.find(t->name);
        if (it != now.end()) return it->second;
        return nullptr;
      }
      case K::Deref: {
        auto it = now.find(t->name);
        return it == now.end() ? nullptr : it->second;
      }
      case K::Old: return old ? logic(t->kids[0], env, *old, nullptr) : nullptr;
      case K::Not: {
        ValuePtr a = sub(0);
        return a ? val::bool_(!a->ival) : nullptr;
      }
      case K::Neg: {
        ValuePtr a = sub(0);
        return a ? val::int_(-a->ival) : nullptr;
      }
      case K::Bin: {
        if (binop_is_logic(t->op) && t->op != BinOp::Iff) {
          ValuePtr a = sub(0), b = sub(1);
          auto A = a ? std::optional<bool>(a->ival) : std::nullopt;
          auto B = b ? std::optional<bool>(b->ival) : std::nullopt;
          if (t->op == BinOp::Implies) A = A ? std::optional<bool>(!*A) : std::nullopt;
          if (t->op == BinOp::And) {
            if (A == false || B == false) return val::bool_(false);
            return A && B ? val::bool_(true) : nullptr;
          }
          if (A == true || B == true) return val::bool_(true);
          return A && B ? val::bool_(false) : nullptr;
        }
        ValuePtr a = sub(0), b = sub(1);
        if (!a || !b) return nullptr;
        if (binop_is_arith(t->op)) {
          auto r = arith(t->op, a->ival, b->ival);
          return r ? val::int_(*r) : nullptr;
        }
        auto r = compare(t->op, a, b);
        return r ? val::bool_(*r) : nullptr;
      }
      case K::Ite: {
        ValuePtr c = sub(0);
        if (!c) return nullptr;
        return c->ival ? sub(1) : sub(2);
      }
      case K::Forall:
      case K::Exists: return quantifier(t, env, now, old);
      case K::Let: {
        ValuePtr v = sub(0);
        if (!v) return nullptr;
        return logic(t->kids[1], extend(env, t->name, v), now, old);
      }
      case K::Match: {
        ValuePtr v = sub(0);
        if (!v) return nullptr;
        for (const auto &c : t->cases) {
          Env e2 = env;
          if (match_pattern(*c.pat, v, e2)) return logic(c.body, e2, now, old);
        }
        return nullptr;
      }
      case K::Tuple: {
        std::vector<ValuePtr> xs;
        for (size_t i = 0; i < t->kids.size(); ++i) {
          xs.push_back(sub(i));
          if (!xs.back()) return nullptr;
        }
        return val::tuple(xs);
      }
      case K::Select: {
        ValuePtr a = sub(0), i = sub(1);
        if (!a || !i || a->kind != Value::Kind::Array) return nullptr;
        if (i->ival < 0 || i->ival >= static_cast<std::int64_t>(a->items.size())) return nullptr;
        return a->items[i->ival];
      }
      case K::Length: {
        auto it = now.find(t->name);
        return it == now.end() ? nullptr : val::int_(static_cast<std::int64_t>(it->second->items.size()));
      }
      case K::Valid: {
        ValuePtr k = sub(0);
        if (!k || k->kind != Value::Kind::Cont) return nullptr;
        return val::bool_(!conts_[k->ival].consumed);
      }
      case K::Pre:
      case K::Post: return closure_contract(t, env, now, old);
      case K::Field: {
        ValuePtr s = sub(0);
        if (!s || s->kind != Value::Kind::State) return nullptr;
        auto it = s->state->find(t->name);
        return it == s->state->end() ? nullptr : it->second;
      }
      case K::StateRec: {
        Store s;
        for (size_t i = 0; i < t->names.size(); ++i) {
          ValuePtr v = sub(i);
          if (!v) return nullptr;
          s[t->names[i]] = v;
        }
        return state_value(s);
      }
      case K::App: return application(t, env, now, old);
    }
    return nullptr;
  }

  ValuePtr application(const TermPtr &t, const Env &env, const Store &now, const Store *old) {
    std::vector<ValuePtr> args;
    for (const auto &k : t->kids) {
      args.push_back(logic(k, env, now, old));
      if (!args.back()) return nullptr;
    }
    const std::string &f = t->name;
    if (f == "[]" || f == "::" || p_.ctors.count(f)) return val::ctor(f, args);
    auto it = p_.logic.find(f);
    if (it == p_.logic.end() || !it->second->body) return nullptr;
    if (++logic_depth_ > 10000) {
      --logic_depth_;
      return nullptr;
    }
    Env e;
    for (size_t i = 0; i < args.size(); ++i) e = extend(e, it->second->params[i].first, args[i]);
    ValuePtr r = logic(it->second->body, e, now, old);
    --logic_depth_;
    return r;
  }

  // Integers range over the index set of the state arrays, or [-16, 16].
  ValuePtr quantifier(const TermPtr &t, const Env &env, const Store &now, const Store *old) {
    bool forall = t->kind == Term::Kind::Forall;
    std::vector<std::vector<ValuePtr>> domains;
    for (const auto &[n, ty] : t->binders) {
      std::vector<ValuePtr> d;
      switch (ty ? ty->kind : Type::Kind::Arrow) {
        case Type::Kind::Int: {
          std::int64_t lo = max_len_ > 0 ? 0 : -16, hi = max_len_ > 0 ? max_len_ - 1 : 16;
          for (std::int64_t i = lo; i <= hi; ++i) d.push_back(val::int_(i));
          break;
        }
        case Type::Kind::Bool: d = {val::bool_(false), val::bool_(true)}; break;
        case Type::Kind::Unit: d = {val::unit()}; break;
        default: return nullptr;
      }
      domains.push_back(std::move(d));
    }
    bool unknown = false;
    std::vector<size_t> idx(domains.size(), 0);
    for (;;) {
      Env e = env;
      for (size_t i = 0; i < idx.size(); ++i) e = extend(e, t->binders[i].first, domains[i][idx[i]]);
      auto r = truth(t->kids[0], e, now, old);
      if (!r) unknown = true;
      else if (*r != forall) return val::bool_(!forall);
      size_t i = 0;
      while (i < idx.size() && ++idx[i] == domains[i].size()) idx[i++] = 0;
      if (i == idx.size()) break;
    }
    return unknown ? nullptr : val::bool_(forall);
  }

  ValuePtr closure_contract(const TermPtr &t, const Env &env, const Store &now, const Store *old) {
    ValuePtr f = logic(t->kids[0], env, now, old);
    ValuePtr arg = logic(t->kids[1], env, now, old);
    if (!f || !arg || f->kind != Value::Kind::Closure) return nullptr;
    const Closure &c = *f->clo;
    if (c.params.size() != c.applied.size() + 1) return nullptr;
    Env e = c.env;
    for (size_t i = 0; i < c.applied.size(); ++i) e = extend(e, c.params[i].name, c.applied[i]);
    e = extend(e, c.params.back().name, arg);
    auto state_of = [&](size_t i) -> const Store * {
      ValuePtr s = logic(t->kids[i], env, now, old);
      return s && s->kind == Value::Kind::State ? s->state.get() : nullptr;
    };
    if (t->kind == Term::Kind::Pre) {
      const Store *s = state_of(2);
      if (!s) return nullptr;
      if (!c.spec) return val::bool_(true);
      bool unknown = false;
      for (const auto &r : c.spec->requires_) {
        auto v = truth(r, e, *s, nullptr);
        if (v == false) return val::bool_(false);
        unknown = unknown || !v;
      }
      return unknown ? nullptr : val::bool_(true);
    }
    const Store *s_old = state_of(2), *s_new = state_of(3);
    ValuePtr res = logic(t->kids[4], env, now, old);
    if (!s_old || !s_new || !res) return nullptr;
    if (!c.spec) return nullptr;  // an unspecified closure may do anything it likes
    bool unknown = false;
    for (const auto &r : c.spec->ensures) {
      auto v = truth(r, extend(e, "result", res), *s_new, s_old);
      if (v == false) return val::bool_(false);
      unknown = unknown || !v;
    }
    return unknown ? nullptr : val::bool_(true);
  }

  const TypedProgram &p_;
  RunOptions opts_;
  std::map<std::string, ValuePtr> globals_;
  std::map<const Expr *, ProtocolPtr> perform_protocol_;
  std::int64_t max_len_ = 0;

  Store store_;
  std::vector<Frame> stack_;
  std::vector<ContRecord> conts_;
  std::vector<TraceEvent> trace_;
  const Expr *ctl_expr_ = nullptr;
  Env ctl_env_;
  ValuePtr value_;
  bool have_value_ = false;
  bool entry_call_ = false;
  int logic_depth_ = 0;

  std::uint64_t steps_ = 0, try_installs_ = 0, handler_pushes_ = 0, performs_handled_ = 0, resumes_ = 0;
  std::uint64_t checks_ = 0, unchecked_ = 0;
};

// Initializers are closed expressions; evaluate them with an empty program.
ValuePtr eval_init(const TypedProgram &p, const ExprPtr &e) {
  static const RunOptions opts{};
  TypedProgram tiny;
  tiny.types = p.types;
  tiny.ctors = p.ctors;
  auto f = std::make_shared<FunctionDecl>();
  f->name = "init";
  f->body = e;
  Decl d;
  d.kind = Decl::Kind::Function;
  d.function = f;
  tiny.program.decls.push_back(d);
  RunOptions o = opts;
  o.store = Store{};
  RunResult r = Machine(tiny, o).go("init", {});
  if (r.status != RunStatus::Value) fail(ErrorKind::Runtime, e->span, "state initializer failed: " + r.message);
  return r.value;
}

}  // namespace

Store initial_store(const TypedProgram &p) {
  Store s;
  for (const auto &v : p.state.vars) {
    ValuePtr init = eval_init(p, v.init);
    s[v.name] = v.is_array ? val::array(std::vector<ValuePtr>(static_cast<size_t>(v.size), init)) : init;
  }
  return s;
}

RunResult run(const TypedProgram &p, const std::string &entry, const std::vector<ValuePtr> &args,
              const RunOptions &opts) {
  return Machine(p, opts).go(entry, args);
}

RunResult run_checked(const TypedProgram &p, const std::string &entry, const std::vector<ValuePtr> &args,
                      RunOptions opts) {
  opts.checked = true;
  return Machine(p, opts).go(entry, args);
}

std::vector<EffectEvent> enumerate_effects(const TypedProgram &p, const std::string &entry,
                                           const std::vector<ValuePtr> &args, const RunOptions &opts) {
  RunOptions o = opts;
  o.ambient_unit_handler = true;
  RunResult r = run(p, entry, args, o);
  if (r.status != RunStatus::Value) fail(ErrorKind::Runtime, {}, r.message);
  std::vector<EffectEvent> out;
  for (const auto &e : r.trace)
    if (e.kind == TraceEvent::Kind::Perform) out.push_back({e.effect, e.payload, e.before, e.cont < 0});
  return out;
}

}  // namespace effv
