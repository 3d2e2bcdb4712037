#include "surface/printer.hpp"

#include <fmt/format.h>

namespace effv {

namespace {

enum Prec { kSeq = 0, kStmt, kOr, kAnd, kCmp, kCons, kAdd, kMul, kUnary, kApp, kAtom };

int binop_level(BinOp op) {
  switch (op) {
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

bool is_open(const Expr &e) {
  switch (e.kind) {
    case Expr::Kind::Let:
    case Expr::Kind::Fun:
    case Expr::Kind::If:
    case Expr::Kind::Match:
    case Expr::Kind::Try:
    case Expr::Kind::Assign:
    case Expr::Kind::ArrSet: return true;
    default: return false;
  }
}

std::string indent_str(int n) { return std::string(static_cast<size_t>(n) * 2, ' '); }

std::string param_str(const Param &p) {
  if (p.name == "()") return "()";
  std::string s = fmt::format("({} : {})", p.name, type_str(p.ty));
  if (p.ghost) s = fmt::format("({} [@ghost])", s);
  return s;
}

std::string params_str(const std::vector<Param> &ps) {
  std::string s;
  for (const auto &p : ps) s += " " + param_str(p);
  return s;
}

std::string protocol_clauses(const Protocol &pr, const std::string &sep) {
  std::string s;
  for (const auto &t : pr.requires_) s += sep + "requires " + term_str(t);
  for (const auto &t : pr.ensures) s += sep + "ensures " + term_str(t);
  if (!pr.modifies.empty()) {
    s += sep + "modifies ";
    for (size_t i = 0; i < pr.modifies.size(); ++i) s += (i ? ", " : "") + pr.modifies[i];
  }
  return s;
}

std::string protocol_head(const Protocol &pr) {
  std::string s = "protocol " + pr.effect;
  for (const auto &x : pr.params) s += " " + x;
  return s;
}

std::string spec_body(const SpecClauses &s, const std::string &sep) {
  std::vector<std::string> lines;
  for (const auto &t : s.requires_) lines.push_back("requires " + term_str(t));
  for (const auto &t : s.ensures) lines.push_back("ensures " + term_str(t));
  if (!s.modifies.empty()) {
    std::string m = "modifies ";
    for (size_t i = 0; i < s.modifies.size(); ++i) m += (i ? ", " : "") + s.modifies[i];
    lines.push_back(m);
  }
  if (!s.performs.empty()) {
    std::string m = "performs ";
    for (size_t i = 0; i < s.performs.size(); ++i) m += (i ? ", " : "") + s.performs[i];
    lines.push_back(m);
  }
  if (s.variant) lines.push_back("variant " + term_str(s.variant));
  for (const auto &pr : s.protocols) {
    if (pr->braced)
      lines.push_back(protocol_head(*pr) + " {" + protocol_clauses(*pr, sep + "  ") + " }");
    else
      lines.push_back(protocol_head(*pr) + " :" + protocol_clauses(*pr, sep + "  "));
  }
  std::string out;
  for (size_t i = 0; i < lines.size(); ++i) out += (i ? sep : "") + lines[i];
  return out;
}

class Printer {
 public:
  std::string expr(const ExprPtr &e, int ctx, bool tail, int ind) {
    std::string s = raw(e, ctx, tail, ind);
    return s;
  }

 private:
  // Prints `e`, wrapping in parentheses when its precedence is below `ctx`
  // or when an open construct would swallow following text.
  std::string raw(const ExprPtr &e, int ctx, bool tail, int ind) {
    int prec = level(*e);
    bool wrap = prec < ctx || (!tail && is_open(*e));
    if (wrap) {
      if (e->kind == Expr::Kind::Seq || is_open(*e))
        return "begin\n" + indent_str(ind + 1) + body(e, kSeq, true, ind + 1) + "\n" + indent_str(ind) + "end";
      return "(" + body(e, kSeq, true, ind) + ")";
    }
    return body(e, ctx, tail, ind);
  }

  int level(const Expr &e) const {
    switch (e.kind) {
      case Expr::Kind::Seq: return kSeq;
      case Expr::Kind::Let:
      case Expr::Kind::Fun:
      case Expr::Kind::If:
      case Expr::Kind::Match:
      case Expr::Kind::Try:
      case Expr::Kind::Assign:
      case Expr::Kind::ArrSet: return kStmt;
      case Expr::Kind::Binop: return binop_level(e.op);
      case Expr::Kind::Ctor:
        if (e.name == "::") return kCons;
        if (e.kids.empty()) return kAtom;
        return kApp;
      case Expr::Kind::Unop: return kUnary;
      case Expr::Kind::Int: return e.ival < 0 ? kUnary : kAtom;
      case Expr::Kind::App:
      case Expr::Kind::Perform:
      case Expr::Kind::Continue: return kApp;
      default: return kAtom;
    }
  }

  std::string nl(int ind) { return "\n" + indent_str(ind); }

  std::string body(const ExprPtr &e, int ctx, bool tail, int ind) {
    using K = Expr::Kind;
    (void)ctx;
    switch (e->kind) {
      case K::Int: return std::to_string(e->ival);
      case K::Bool: return e->ival ? "true" : "false";
      case K::Unit: return "()";
      case K::Var: return e->name;
      case K::Deref: return "!" + e->name;
      case K::Assign: return e->name + " := " + raw(e->kids[0], kStmt, tail, ind);
      case K::ArrGet: return e->name + ".(" + raw(e->kids[0], kSeq, true, ind) + ")";
      case K::ArrSet:
        return e->name + ".(" + raw(e->kids[0], kSeq, true, ind) + ") <- " + raw(e->kids[1], kStmt, tail, ind);
      case K::Unop:
        if (e->name == "not") return "not " + raw(e->kids[0], kUnary, false, ind);
        return "- " + raw(e->kids[0], kUnary, false, ind);
      case K::Binop: {
        int p = binop_level(e->op);
        int lp = p, rp = p + 1;
        if (e->op == BinOp::And || e->op == BinOp::Or) {
          lp = p + 1;
          rp = p;
        }
        if (binop_is_compare(e->op)) lp = rp = p + 1;
        return raw(e->kids[0], lp, false, ind) + " " + binop_str(e->op) + " " + raw(e->kids[1], rp, false, ind);
      }
      case K::Ctor: {
        if (e->name == "[]") return "[]";
        if (e->name == "::")
          return raw(e->kids[0], kCons + 1, false, ind) + " :: " + raw(e->kids[1], kCons, false, ind);
        if (e->kids.empty()) return e->name;
        if (e->kids.size() == 1) return e->name + " " + raw(e->kids[0], kAtom, false, ind);
        std::string s = e->name + " (";
        for (size_t i = 0; i < e->kids.size(); ++i) s += (i ? ", " : "") + raw(e->kids[i], kOr, false, ind);
        return s + ")";
      }
      case K::Tuple: {
        std::string s = "(";
        for (size_t i = 0; i < e->kids.size(); ++i) s += (i ? ", " : "") + raw(e->kids[i], kOr, false, ind);
        return s + ")";
      }
      case K::App: {
        std::string s = raw(e->kids[0], kAtom, false, ind);
        for (size_t i = 1; i < e->kids.size(); ++i) s += " " + raw(e->kids[i], kAtom, false, ind);
        return s;
      }
      case K::Perform: {
        if (e->kids.empty()) return "perform " + e->name;
        std::string s = "perform (" + e->name;
        for (const auto &k : e->kids) s += " " + raw(k, kAtom, false, ind);
        return s + ")";
      }
      case K::Continue: return "continue " + e->name + " " + raw(e->kids[0], kAtom, false, ind);
      case K::Seq:
        return raw(e->kids[0], kStmt, false, ind) + ";" + nl(ind) + raw(e->kids[1], kSeq, tail, ind);
      case K::Let: {
        std::string s = std::string("let ") + (e->rec ? "rec " : "") + e->name + params_str(e->params);
        if (e->ann) s += " : " + type_str(e->ann);
        s += " =" + nl(ind + 1) + raw(e->kids[0], kSeq, true, ind + 1);
        if (e->spec) s += nl(ind) + "(*@ " + spec_body(*e->spec, nl(ind + 2)) + " *)";
        s += nl(ind) + "in" + nl(ind) + raw(e->kids[1], kSeq, tail, ind);
        return s;
      }
      case K::Fun: {
        std::string s = "fun";
        if (e->spec) s += " (*@ " + spec_body(*e->spec, nl(ind + 2)) + " *)";
        s += params_str(e->params);
        if (e->ann) s += " : " + ann_str(e->ann);
        return s + " ->" + nl(ind + 1) + raw(e->kids[0], kSeq, tail, ind + 1);
      }
      case K::If: {
        std::string s = "if " + raw(e->kids[0], kSeq, true, ind) + " then " ;
        bool has_else = e->kids[2]->kind != K::Unit;
        s += raw(e->kids[1], kStmt, !has_else && tail, ind);
        if (has_else) s += " else " + raw(e->kids[2], kStmt, tail, ind);
        return s;
      }
      case K::Match: {
        std::string s = "match " + raw(e->kids[0], kSeq, true, ind) + " with";
        for (size_t i = 0; i < e->cases.size(); ++i) {
          bool last = i + 1 == e->cases.size();
          s += nl(ind) + "| " + pattern_str(*e->cases[i].pat) + " ->" + nl(ind + 2) +
               raw(e->cases[i].body, kSeq, last && tail, ind + 2);
        }
        return s;
      }
      case K::Try: {
        std::string s = "try " + raw(e->kids[0], kSeq, true, ind) + " with";
        size_t n = e->branches.size() + (e->value_branch ? 1 : 0);
        size_t i = 0;
        for (const auto &br : e->branches) {
          bool last = ++i == n;
          s += nl(ind) + "| effect ";
          if (br.params.empty()) {
            s += br.effect;
          } else {
            s += "(" + br.effect;
            for (const auto &x : br.params) s += " " + x;
            s += ")";
          }
          s += " " + br.k + " ->" + nl(ind + 2) + raw(br.body, kSeq, last && tail && !e->handler_spec, ind + 2);
        }
        if (e->value_branch)
          s += nl(ind) + "| " + e->value_branch->name + " ->" + nl(ind + 2) +
               raw(e->value_branch->body, kSeq, tail && !e->handler_spec, ind + 2);
        if (e->handler_spec) {
          std::vector<std::string> lines;
          for (const auto &t : e->handler_spec->try_ensures) lines.push_back("try_ensures " + term_str(t));
          if (e->handler_spec->returns) lines.push_back("returns " + type_str(e->handler_spec->returns));
          s += nl(ind) + "(*@ ";
          for (size_t j = 0; j < lines.size(); ++j) s += (j ? nl(ind + 2) : "") + lines[j];
          s += " *)";
        }
        return s;
      }
    }
    return "()";
  }

  // Lambda result annotations are parsed without a top-level arrow.
  static std::string ann_str(const TypePtr &t) {
    if (t->kind == Type::Kind::Arrow) return "(" + type_str(t) + ")";
    return type_str(t);
  }
};

std::string ctor_arg_str(const TypePtr &t) {
  std::string s = type_str(t);
  if (t->kind == Type::Kind::Arrow || t->kind == Type::Kind::Tuple) return "(" + s + ")";
  return s;
}

std::string decl_str(const Decl &d) {
  Printer pr;
  switch (d.kind) {
    case Decl::Kind::Type: {
      std::string s = "type " + d.type->name + " =";
      for (size_t i = 0; i < d.type->ctors.size(); ++i) {
        const auto &c = d.type->ctors[i];
        s += (i ? " | " : " ") + c.name;
        if (!c.args.empty()) {
          s += " of ";
          for (size_t j = 0; j < c.args.size(); ++j) s += (j ? " * " : "") + ctor_arg_str(c.args[j]);
        }
      }
      return s;
    }
    case Decl::Kind::Effect: return "effect " + d.effect->name + " : " + type_str(d.effect->sig);
    case Decl::Kind::Protocol: {
      const Protocol &p = *d.protocol;
      if (p.braced) return "(*@ " + protocol_head(p) + " {" + protocol_clauses(p, "\n    ") + " } *)";
      return "(*@ " + protocol_head(p) + " :" + protocol_clauses(p, "\n    ") + " *)";
    }
    case Decl::Kind::State: {
      const StateDecl &s = *d.state;
      std::string init = pr.expr(s.init, kAtom, false, 0);
      if (s.ty->kind == Type::Kind::Array)
        return fmt::format("let {} : {} = Array.make {} {}", s.name, type_str(s.ty), s.size, init);
      return fmt::format("let {} : {} = ref {}", s.name, type_str(s.ty), init);
    }
    case Decl::Kind::Function: {
      const FunctionDecl &f = *d.function;
      std::string s = std::string("let ") + (f.rec ? "rec " : "") + f.name + params_str(f.params);
      if (f.ret) s += " : " + type_str(f.ret);
      s += " =\n  " + pr.expr(f.body, kSeq, true, 1);
      if (f.spec) s += "\n(*@ " + spec_body(*f.spec, "\n    ") + " *)";
      return s;
    }
    case Decl::Kind::Logic: {
      const LogicDecl &l = *d.logic;
      std::string s = std::string("(*@ ") + (l.predicate ? "predicate " : "function ") + l.name;
      for (const auto &[n, t] : l.params) s += fmt::format(" ({} : {})", n, type_str(t));
      if (!l.predicate) s += " : " + type_str(l.ret);
      if (l.body) s += " =\n      " + term_str(l.body);
      return s + " *)";
    }
  }
  return "";
}

bool types_eq(const TypePtr &a, const TypePtr &b) {
  if (!a || !b) return !a && !b;
  return type_equal(a, b);
}

bool terms_eq(const std::vector<TermPtr> &a, const std::vector<TermPtr> &b) {
  if (a.size() != b.size()) return false;
  for (size_t i = 0; i < a.size(); ++i)
    if (!term_equal(a[i], b[i])) return false;
  return true;
}

bool protocol_eq(const Protocol &a, const Protocol &b) {
  return a.effect == b.effect && a.params == b.params && terms_eq(a.requires_, b.requires_) &&
         terms_eq(a.ensures, b.ensures) && a.modifies == b.modifies && a.local == b.local && a.braced == b.braced;
}

bool spec_eq(const SpecPtr &a, const SpecPtr &b) {
  bool ae = !a || a->empty(), be = !b || b->empty();
  if (ae || be) return ae && be;
  if (!terms_eq(a->requires_, b->requires_) || !terms_eq(a->ensures, b->ensures) || a->modifies != b->modifies ||
      a->performs != b->performs || !term_equal(a->variant, b->variant) ||
      a->protocols.size() != b->protocols.size())
    return false;
  for (size_t i = 0; i < a->protocols.size(); ++i)
    if (!protocol_eq(*a->protocols[i], *b->protocols[i])) return false;
  return true;
}

bool params_eq(const std::vector<Param> &a, const std::vector<Param> &b) {
  if (a.size() != b.size()) return false;
  for (size_t i = 0; i < a.size(); ++i)
    if (a[i].name != b[i].name || a[i].ghost != b[i].ghost || !types_eq(a[i].ty, b[i].ty)) return false;
  return true;
}

bool pattern_eq(const PatternPtr &a, const PatternPtr &b) {
  if (a->kind != b->kind || a->name != b->name || a->ival != b->ival || a->subs.size() != b->subs.size())
    return false;
  for (size_t i = 0; i < a->subs.size(); ++i)
    if (!pattern_eq(a->subs[i], b->subs[i])) return false;
  return true;
}

}  // namespace

std::string expr_str(const ExprPtr &e) { return Printer().expr(e, kSeq, true, 0); }

std::string spec_str(const SpecClauses &s) { return "(*@ " + spec_body(s, "\n    ") + " *)"; }

std::string pretty_print(const SourceProgram &p) {
  std::string out;
  for (const auto &d : p.decls) {
    if (!out.empty()) out += "\n";
    out += decl_str(d) + "\n";
  }
  return out;
}

bool expr_equal(const ExprPtr &a, const ExprPtr &b) {
  if (a == b) return true;
  if (!a || !b) return false;
  if (a->kind != b->kind || a->name != b->name || a->ival != b->ival || a->rec != b->rec ||
      a->kids.size() != b->kids.size() || a->cases.size() != b->cases.size() ||
      a->branches.size() != b->branches.size() || a->value_branch.has_value() != b->value_branch.has_value())
    return false;
  if (a->kind == Expr::Kind::Binop && a->op != b->op) return false;
  if (!params_eq(a->params, b->params) || !types_eq(a->ann, b->ann) || !spec_eq(a->spec, b->spec)) return false;
  for (size_t i = 0; i < a->kids.size(); ++i)
    if (!expr_equal(a->kids[i], b->kids[i])) return false;
  for (size_t i = 0; i < a->cases.size(); ++i)
    if (!pattern_eq(a->cases[i].pat, b->cases[i].pat) || !expr_equal(a->cases[i].body, b->cases[i].body))
      return false;
  for (size_t i = 0; i < a->branches.size(); ++i) {
    const auto &x = a->branches[i], &y = b->branches[i];
    if (x.effect != y.effect || x.params != y.params || x.k != y.k || !expr_equal(x.body, y.body)) return false;
  }
  if (a->value_branch &&
      (a->value_branch->name != b->value_branch->name || !expr_equal(a->value_branch->body, b->value_branch->body)))
    return false;
  const auto &ha = a->handler_spec, &hb = b->handler_spec;
  if (!ha || !hb) return !ha && !hb;
  return terms_eq(ha->try_ensures, hb->try_ensures) && types_eq(ha->returns, hb->returns);
}

bool program_equal(const SourceProgram &a, const SourceProgram &b) {
  if (a.decls.size() != b.decls.size()) return false;
  for (size_t i = 0; i < a.decls.size(); ++i) {
    const Decl &x = a.decls[i], &y = b.decls[i];
    if (x.kind != y.kind) return false;
    switch (x.kind) {
      case Decl::Kind::Type: {
        if (x.type->name != y.type->name || x.type->ctors.size() != y.type->ctors.size()) return false;
        for (size_t j = 0; j < x.type->ctors.size(); ++j) {
          const auto &c = x.type->ctors[j], &d = y.type->ctors[j];
          if (c.name != d.name || c.args.size() != d.args.size()) return false;
          for (size_t k = 0; k < c.args.size(); ++k)
            if (!type_equal(c.args[k], d.args[k])) return false;
        }
        break;
      }
      case Decl::Kind::Effect:
        if (x.effect->name != y.effect->name || !type_equal(x.effect->sig, y.effect->sig)) return false;
        break;
      case Decl::Kind::Protocol:
        if (!protocol_eq(*x.protocol, *y.protocol)) return false;
        break;
      case Decl::Kind::State:
        if (x.state->name != y.state->name || !type_equal(x.state->ty, y.state->ty) ||
            x.state->size != y.state->size || !expr_equal(x.state->init, y.state->init))
          return false;
        break;
      case Decl::Kind::Function: {
        const auto &f = *x.function, &g = *y.function;
        if (f.name != g.name || f.rec != g.rec || !params_eq(f.params, g.params) || !types_eq(f.ret, g.ret) ||
            !expr_equal(f.body, g.body) || !spec_eq(f.spec, g.spec))
          return false;
        break;
      }
      case Decl::Kind::Logic: {
        const auto &f = *x.logic, &g = *y.logic;
        if (f.name != g.name || f.predicate != g.predicate || f.params.size() != g.params.size() ||
            !types_eq(f.ret, g.ret) || !term_equal(f.body, g.body))
          return false;
        for (size_t j = 0; j < f.params.size(); ++j)
          if (f.params[j].first != g.params[j].first || !type_equal(f.params[j].second, g.params[j].second))
            return false;
        break;
      }
    }
  }
  return true;
}

}  // namespace effv
