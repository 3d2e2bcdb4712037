#include <fmt/format.h>

#include "ir/ir.hpp"

namespace effv {

namespace ir {
namespace {
std::shared_ptr<IrExpr> mk(IrExpr::Kind k, TypePtr ty = nullptr) {
  auto e = std::make_shared<IrExpr>();
  e->kind = k;
  e->ty = std::move(ty);
  return e;
}
}  // namespace

IrExprPtr lit(TermPtr t) {
  auto e = mk(IrExpr::Kind::Lit, t->ty);
  e->term = std::move(t);
  return e;
}
IrExprPtr var(std::string n, TypePtr ty) {
  auto e = mk(IrExpr::Kind::Var, std::move(ty));
  e->name = std::move(n);
  return e;
}
IrExprPtr let(std::string n, IrExprPtr v, IrExprPtr body) {
  auto e = mk(IrExpr::Kind::Let, body->ty);
  e->name = std::move(n);
  e->kids = {std::move(v), std::move(body)};
  return e;
}
IrExprPtr seq(IrExprPtr a, IrExprPtr b) {
  auto e = mk(IrExpr::Kind::Seq, b->ty);
  e->kids = {std::move(a), std::move(b)};
  return e;
}
IrExprPtr call(std::string f, std::vector<IrExprPtr> args, TypePtr ty) {
  auto e = mk(IrExpr::Kind::Call, std::move(ty));
  e->name = std::move(f);
  e->kids = std::move(args);
  return e;
}
IrExprPtr let_routine(RoutinePtr r, IrExprPtr body) {
  auto e = mk(IrExpr::Kind::LetRoutine, body->ty);
  e->routine = std::move(r);
  e->kids = {std::move(body)};
  return e;
}
IrExprPtr assume(TermPtr t) {
  auto e = mk(IrExpr::Kind::Assume, Type::unit());
  e->term = std::move(t);
  return e;
}
IrExprPtr snapshot() { return mk(IrExpr::Kind::Snapshot, Type::state()); }
}  // namespace ir

namespace {

std::string ind(int n) { return std::string(static_cast<size_t>(n) * 2, ' '); }

std::string param_str(const IrParam &p) {
  std::string s = "(" + p.name + " : " + type_str(p.ty) + ")";
  if (p.ghost) s = "(ghost " + s.substr(1);
  return s;
}

class Printer {
 public:
  std::string routine(const Routine &r, int d, const char *head) {
    std::string s = ind(d) + head + " " + r.name;
    if (r.params.empty()) s += " ()";
    for (const auto &p : r.params) s += " " + param_str(p);
    s += " : " + type_str(r.ret) + "\n";
    if (r.variant) s += ind(d + 1) + "variant { " + term_str(r.variant) + " }\n";
    for (const auto &t : r.requires_) s += ind(d + 1) + "requires { " + term_str(t) + " }\n";
    for (const auto &t : r.ensures) s += ind(d + 1) + "ensures { " + term_str(t) + " }\n";
    for (const auto &rc : r.raises)
      s += ind(d + 1) + "raises { " + rc.exn + " " + rc.binder + " -> " + term_str(rc.cond) + " }\n";
    if (!r.writes.empty() || r.writes_explicit) s += ind(d + 1) + (r.writes.empty() ? "writes {}" : "writes { " + join(r.writes) + " }") + "\n";
    if (r.body) s += ind(d) + "=\n" + expr(r.body, d + 1) + "\n";
    return s;
  }

  std::string expr(const IrExprPtr &e, int d) { return ind(d) + inline_(e, d); }

 private:
  static std::string join(const std::vector<std::string> &xs) {
    std::string s;
    for (size_t i = 0; i < xs.size(); ++i) s += (i ? ", " : "") + xs[i];
    return s;
  }

  static bool atomic(const IrExprPtr &e) {
    using K = IrExpr::Kind;
    return e->kind == K::Lit || e->kind == K::Var || e->kind == K::Deref || e->kind == K::Snapshot ||
           e->kind == K::Tuple || (e->kind == K::Ctor && e->kids.empty());
  }

  std::string arg(const IrExprPtr &e, int d) {
    std::string s = inline_(e, d);
    return atomic(e) ? s : "(" + s + ")";
  }

  // Text of e when it starts at the current column of indentation level d.
  std::string inline_(const IrExprPtr &e, int d) {
    using K = IrExpr::Kind;
    switch (e->kind) {
      case K::Lit: return term_str(e->term);
      case K::Var: return e->name;
      case K::Deref: return "!" + e->name;
      case K::Assign: return e->name + " := " + arg(e->kids[0], d);
      case K::ArrGet: return e->name + "[" + inline_(e->kids[0], d) + "]";
      case K::ArrSet: return e->name + "[" + inline_(e->kids[0], d) + "] <- " + arg(e->kids[1], d);
      case K::Unop: return e->name + " " + arg(e->kids[0], d);
      case K::Binop: return arg(e->kids[0], d) + " " + binop_str(e->op) + " " + arg(e->kids[1], d);
      case K::Ctor: {
        if (e->kids.empty()) return e->name;
        if (e->name == "::") return arg(e->kids[0], d) + " :: " + arg(e->kids[1], d);
        std::string s = e->name + " (";
        for (size_t i = 0; i < e->kids.size(); ++i) s += (i ? ", " : "") + inline_(e->kids[i], d);
        return s + ")";
      }
      case K::Tuple: {
        std::string s = "(";
        for (size_t i = 0; i < e->kids.size(); ++i) s += (i ? ", " : "") + inline_(e->kids[i], d);
        return s + ")";
      }
      case K::Let:
        return "let " + e->name + " = " + inline_(e->kids[0], d + 1) + " in\n" + expr(e->kids[1], d);
      case K::LetRoutine: {
        const Routine &r = *e->routine;
        std::string head = r.body ? (r.rec ? "let rec" : "let") : "val";
        std::string s = routine(r, d, head.c_str());
        s.erase(0, static_cast<size_t>(d) * 2);
        return s + ind(d) + "in\n" + expr(e->kids[0], d);
      }
      case K::If:
        return "if " + inline_(e->kids[0], d + 1) + " then\n" + expr(e->kids[1], d + 1) + "\n" + ind(d) +
               "else\n" + expr(e->kids[2], d + 1);
      case K::Seq: return inline_(e->kids[0], d) + ";\n" + expr(e->kids[1], d);
      case K::Match: {
        std::string s = "match " + inline_(e->kids[0], d + 1) + " with\n";
        for (const auto &c : e->cases) s += ind(d) + "| " + pattern_str(*c.pat) + " ->\n" + expr(c.body, d + 2) + "\n";
        return s + ind(d) + "end";
      }
      case K::Call: {
        std::string s = e->name;
        if (e->kids.empty()) s += " ()";
        for (const auto &k : e->kids) s += " " + arg(k, d);
        return s;
      }
      case K::Apply: return "apply " + e->name + " " + arg(e->kids[0], d);
      case K::Continue: return "continue " + e->name + " " + arg(e->kids[0], d);
      case K::Try: {
        std::string s = "try\n";
        if (e->value_branch) {
          const auto &[p, body] = *e->value_branch;
          s += ind(d + 1) + "let " + p.name + " = " + inline_(e->kids[0], d + 2) + " in\n" + expr(body, d + 1);
        } else {
          s += expr(e->kids[0], d + 1);
        }
        s += "\n" + ind(d) + "with\n";
        for (const auto &h : e->handlers) {
          s += ind(d) + "| " + h.exn;
          for (const auto &p : h.params) s += " " + p.name;
          s += " ->\n" + expr(h.body, d + 2) + "\n";
        }
        return s + ind(d) + "end";
      }
      case K::Assume: return "assume { " + term_str(e->term) + " }";
      case K::Snapshot: return "snapshot";
    }
    return "?";
  }
};

std::string decl_str(const IrProgram &p, const IrDecl &d) {
  Printer pr;
  switch (d.kind) {
    case IrDecl::Kind::Prelude: {
      if (d.name == "state") {
        std::string s = "type state = {";
        for (size_t i = 0; i < p.state.vars.size(); ++i)
          s += fmt::format("{} mutable _{} : {}", i ? ";" : "", p.state.vars[i].name,
                           type_str(p.state.vars[i].is_array ? p.state.vars[i].ty : p.state.vars[i].elem));
        return s + (p.state.vars.empty() ? "}\n" : " }\n");
      }
      if (d.name == "continuation")
        return "type continuation 'a 'b = abstract { mutable _valid : bool }\n"
               "type lambda 'a 'b\n"
               "predicate pre (f : 'f) (arg : 'a) (state : state)\n"
               "predicate post (f : 'f) (arg : 'a) (old_state : state) (state : state) (result : 'b)\n";
      if (d.name == "continue" || d.name == "apply") return pr.routine(*d.routine, 0, "val");
      return "";
    }
    case IrDecl::Kind::Type: {
      std::string s = "type " + d.type->name + " =";
      for (const auto &c : d.type->ctors) {
        s += " | " + c.name;
        if (!c.args.empty()) {
          s += " of ";
          for (size_t i = 0; i < c.args.size(); ++i) s += (i ? " * " : "") + type_str(c.args[i]);
        }
      }
      return s + "\n";
    }
    case IrDecl::Kind::State: return "";
    case IrDecl::Kind::Exception: {
      std::string s = "exception " + d.name;
      for (const auto &t : d.exn_args) s += " " + (t->kind == Type::Kind::Tuple || t->kind == Type::Kind::Arrow
                                                      ? "(" + type_str(t) + ")"
                                                      : type_str(t));
      return s + "\n";
    }
    case IrDecl::Kind::Logic: {
      const LogicDecl &l = *d.logic;
      std::string s = l.predicate ? "predicate " : "function ";
      s += l.name;
      for (const auto &[n, t] : l.params) s += " (" + n + " : " + type_str(t) + ")";
      if (!l.predicate) s += " : " + type_str(l.ret);
      if (l.body) s += " =\n  " + term_str(l.body);
      return s + "\n";
    }
    case IrDecl::Kind::Global: {
      const StateVar &v = *d.global;
      if (v.is_array) return fmt::format("val {} : {} (* length {} *)\n", v.name, type_str(v.ty), v.size);
      return fmt::format("val {} : {}\n", v.name, type_str(v.ty));
    }
    case IrDecl::Kind::Routine: {
      const Routine &r = *d.routine;
      const char *head = r.body ? (r.rec ? "let rec" : "let") : "val";
      return pr.routine(r, 0, head);
    }
  }
  return "";
}

}  // namespace

std::string print_routine(const Routine &r) { return Printer().routine(r, 0, r.body ? "let" : "val"); }

std::string print_ir(const IrProgram &p) {
  std::string out;
  for (const auto &d : p.decls) {
    std::string s = decl_str(p, d);
    if (s.empty()) continue;
    if (!out.empty()) out += "\n";
    out += s;
  }
  return out;
}

}  // namespace effv
