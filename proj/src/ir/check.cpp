#include <fmt/format.h>

#include "ir/ir.hpp"

namespace effv {

namespace {

bool has_arrow(const TypePtr &t) {
  if (!t) return false;
  if (t->kind == Type::Kind::Arrow) return true;
  for (const auto &a : t->args)
    if (has_arrow(a)) return true;
  return false;
}

class WfChecker {
 public:
  explicit WfChecker(const IrProgram &p) : p_(p) {
    for (const auto &v : p.state.vars)
      if (v.is_array) arrays_.insert(v.name);
  }

  std::vector<IrDiagnostic> run() {
    for (const auto &d : p_.decls) {
      switch (d.kind) {
        case IrDecl::Kind::Logic: {
          routine_ = d.logic->name;
          std::set<std::string> scope;
          for (const auto &[n, t] : d.logic->params) {
            scope.insert(n);
            type(t, d.trace);
          }
          if (d.logic->body) term(d.logic->body, scope, d.trace);
          break;
        }
        case IrDecl::Kind::Exception:
          for (const auto &t : d.exn_args) type(t, d.trace);
          exceptions_.insert(d.name);
          break;
        case IrDecl::Kind::Routine:
        case IrDecl::Kind::Prelude:
          if (!d.routine) break;
          if (d.kind == IrDecl::Kind::Routine) routine(*d.routine, {}, globals_);
          globals_[d.routine->name] = d.routine;
          break;
        default: break;
      }
    }
    return std::move(out_);
  }

 private:
  void report(std::string msg, int trace) { out_.push_back(IrDiagnostic{std::move(msg), routine_, trace}); }

  void type(const TypePtr &t, int trace) {
    if (has_arrow(t)) report(fmt::format("higher-order type {} in first-order output", type_str(t)), trace);
  }

  void term(const TermPtr &t, const std::set<std::string> &scope, int trace) {
    if (!t) return;
    for (const auto &v : free_vars(t))
      if (!scope.count(v) && !arrays_.count(v)) report(fmt::format("unbound name '{}' in specification", v), trace);
    rewrite(t, [&](const TermPtr &x) -> TermPtr {
      if (x->kind == Term::Kind::Pre && x->kids.size() != 3)
        report(fmt::format("pre applied to {} arguments, expected 3", x->kids.size()), trace);
      if (x->kind == Term::Kind::Post && x->kids.size() != 5)
        report(fmt::format("post applied to {} arguments, expected 5", x->kids.size()), trace);
      if ((x->kind == Term::Kind::Deref || x->kind == Term::Kind::Length) && !p_.state.find(x->name))
        report(fmt::format("unknown state variable '{}'", x->name), trace);
      if (x->kind == Term::Kind::App && !x->kids.empty() && !p_.logic.count(x->name) && !p_.ctors.count(x->name) &&
          x->name != "::")
        report(fmt::format("unknown logic symbol '{}'", x->name), trace);
      return nullptr;
    });
  }

  void routine(const Routine &r, std::set<std::string> scope, std::map<std::string, RoutinePtr> routines) {
    std::string saved = routine_;
    routine_ = r.name;
    for (const auto &p : r.params) {
      type(p.ty, r.trace);
      scope.insert(p.name);
    }
    type(r.ret, r.trace);
    for (const auto &t : r.requires_) term(t, scope, r.trace);
    if (r.variant) term(r.variant, scope, r.trace);
    std::set<std::string> post = scope;
    post.insert("result");
    for (const auto &t : r.ensures) term(t, post, r.trace);
    for (const auto &rc : r.raises) {
      if (!exceptions_.count(rc.exn)) report(fmt::format("raises clause names unknown exception {}", rc.exn), r.trace);
      std::set<std::string> s2 = scope;
      s2.insert(rc.binder);
      term(rc.cond, s2, r.trace);
    }
    for (const auto &w : r.writes)
      if (!p_.state.find(w)) report(fmt::format("writes clause names unknown state '{}'", w), r.trace);
    if (r.body) {
      if (r.rec) routines[r.name] = std::make_shared<Routine>(r);
      expr(r.body, scope, routines);
      std::set<std::string> allowed(r.writes.begin(), r.writes.end());
      for (const auto &w : written_vars(r.body, routines, p_.state))
        if (!allowed.count(w))
          report(fmt::format("routine {} writes '{}' outside its writes clause", r.name, w), r.trace);
    }
    routine_ = saved;
  }

  void expr(const IrExprPtr &e, const std::set<std::string> &scope, const std::map<std::string, RoutinePtr> &rs) {
    using K = IrExpr::Kind;
    type(e->ty, e->trace);
    auto state_name = [&](bool array) {
      const StateVar *v = p_.state.find(e->name);
      if (!v || v->is_array != array) report(fmt::format("unknown state variable '{}'", e->name), e->trace);
    };
    auto bound = [&](const std::string &n) {
      if (!scope.count(n)) report(fmt::format("unbound variable '{}'", n), e->trace);
    };
    switch (e->kind) {
      case K::Var: bound(e->name); break;
      case K::Deref:
      case K::Assign: state_name(false); break;
      case K::ArrGet:
      case K::ArrSet: state_name(true); break;
      case K::Let: {
        expr(e->kids[0], scope, rs);
        std::set<std::string> s2 = scope;
        s2.insert(e->name);
        expr(e->kids[1], s2, rs);
        return;
      }
      case K::LetRoutine: {
        routine(*e->routine, scope, rs);
        auto rs2 = rs;
        rs2[e->routine->name] = e->routine;
        expr(e->kids[0], scope, rs2);
        return;
      }
      case K::Match: {
        expr(e->kids[0], scope, rs);
        for (const auto &c : e->cases) {
          std::set<std::string> s2 = scope;
          std::vector<std::pair<std::string, TypePtr>> vs;
          pattern_vars(*c.pat, vs);
          for (const auto &[n, _] : vs) s2.insert(n);
          expr(c.body, s2, rs);
        }
        return;
      }
      case K::Call:
        if (!rs.count(e->name)) report(fmt::format("call of unknown routine '{}'", e->name), e->trace);
        else if (rs.at(e->name)->params.size() != e->kids.size())
          report(fmt::format("routine '{}' called with {} arguments", e->name, e->kids.size()), e->trace);
        break;
      case K::Apply:
      case K::Continue: {
        bound(e->name);
        break;
      }
      case K::Try: {
        expr(e->kids[0], scope, rs);
        if (e->value_branch) {
          std::set<std::string> s2 = scope;
          s2.insert(e->value_branch->first.name);
          expr(e->value_branch->second, s2, rs);
        }
        for (const auto &h : e->handlers) {
          if (!exceptions_.count(h.exn)) report(fmt::format("handler for unknown exception {}", h.exn), e->trace);
          std::set<std::string> s2 = scope;
          for (const auto &p : h.params) s2.insert(p.name);
          expr(h.body, s2, rs);
        }
        return;
      }
      case K::Assume: term(e->term, scope, e->trace); break;
      default: break;
    }
    for (const auto &k : e->kids) expr(k, scope, rs);
  }

  const IrProgram &p_;
  std::set<std::string> arrays_;
  std::set<std::string> exceptions_;
  std::map<std::string, RoutinePtr> globals_;
  std::string routine_;
  std::vector<IrDiagnostic> out_;
};

void collect_writes(const IrExprPtr &e, std::map<std::string, RoutinePtr> scope, const StateModel &state,
                    std::set<std::string> &out) {
  using K = IrExpr::Kind;
  switch (e->kind) {
    case K::Assign:
    case K::ArrSet: out.insert(e->name); break;
    case K::Call:
      if (auto it = scope.find(e->name); it != scope.end()) out.insert(it->second->writes.begin(), it->second->writes.end());
      break;
    case K::Apply:
      for (const auto &v : state.vars) out.insert(v.name);
      break;
    case K::Continue: out.insert(e->writes.begin(), e->writes.end()); break;
    case K::LetRoutine: scope[e->routine->name] = e->routine; break;
    default: break;
  }
  for (const auto &k : e->kids) collect_writes(k, scope, state, out);
  for (const auto &c : e->cases) collect_writes(c.body, scope, state, out);
  for (const auto &h : e->handlers) collect_writes(h.body, scope, state, out);
  if (e->value_branch) collect_writes(e->value_branch->second, scope, state, out);
}

}  // namespace

std::vector<IrDiagnostic> wf_check(const IrProgram &p) { return WfChecker(p).run(); }

std::set<std::string> written_vars(const IrExprPtr &e, const std::map<std::string, RoutinePtr> &scope,
                                   const StateModel &state) {
  std::set<std::string> out;
  collect_writes(e, scope, state, out);
  return out;
}

}  // namespace effv
