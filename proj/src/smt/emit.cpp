#include <fmt/format.h>

#include <functional>
#include <sstream>

#include "smt/smt.hpp"

namespace effv {

namespace {

using K = Term::Kind;

const std::set<std::string> kReserved = {
    "and", "or", "not", "=>", "ite", "let", "forall", "exists", "match", "true", "false", "select", "store",
    "div", "mod", "abs", "distinct", "Int", "Bool", "Array", "as", "par", "_", "!", "tdiv", "tmod", "valid",
    "unit", "mk_state", "State", "Unit", "Clo", "assert", "check-sat", "declare-fun", "define-fun"};

bool simple_char(char c) {
  return std::isalnum(static_cast<unsigned char>(c)) || std::string_view("~!@$%^&*_-+=<>.?/").find(c) !=
                                                            std::string_view::npos;
}

std::string symbol(const std::string &n) {
  if (kReserved.count(n)) return n + "!v";
  bool simple = !n.empty() && !std::isdigit(static_cast<unsigned char>(n[0]));
  for (char c : n) simple = simple && simple_char(c);
  return simple ? n : "|" + n + "|";
}

std::string join(const std::vector<std::string> &xs, const char *sep = " ") {
  std::string s;
  for (size_t i = 0; i < xs.size(); ++i) s += (i ? sep : "") + xs[i];
  return s;
}

class Emitter {
 public:
  Emitter(const IrProgram &p, const std::string &where) : p_(p), where_(where) {
    for (const auto &n : p.type_order) declare_named(n);
    for (const auto &v : p.state.vars) sort(v.is_array ? v.ty : v.elem);
  }

  std::string script(const VC &vc, const std::string &logic) {
    std::vector<Binder> consts;
    TermPtr body = vc.goal;
    if (body->kind == K::Forall) {
      consts = body->binders;
      body = body->kids[0];
    }
    std::vector<std::string> decls;
    for (const auto &[n, ty] : consts) decls.push_back(fmt::format("(declare-const {} {})", symbol(n), sort(ty)));
    std::string goal = term(body);
    std::string logic_text = logic_decls();
    std::string size_text = size_used_ ? size_decls() : "";

    std::string out = fmt::format("; vc {} [{}] {}\n(set-logic {})\n", vc.id, obligation_str(vc.kind), vc.routine,
                                  logic);
    out += datatype_decls();
    out += "(declare-sort Clo 0)\n";
    if (valid_used_) out += "(declare-fun valid (Clo) Bool)\n";
    for (const auto &[name, a] : pres_) out += fmt::format("(declare-fun {} (Clo {} State) Bool)\n", name, a);
    for (const auto &[name, ar] : posts_)
      out += fmt::format("(declare-fun {} (Clo {} State State {}) Bool)\n", name, ar.first, ar.second);
    if (tdiv_used_ || tmod_used_)
      out += "(define-fun tdiv ((a Int) (b Int)) Int\n"
             "  (ite (>= a 0) (ite (> b 0) (div a b) (- (div a (- b))))\n"
             "                (ite (> b 0) (- (div (- a) b)) (div (- a) (- b)))))\n";
    if (tmod_used_) out += "(define-fun tmod ((a Int) (b Int)) Int (- a (* b (tdiv a b))))\n";
    out += size_text;
    out += logic_text;
    for (const auto &d : decls) out += d + "\n";
    out += "(assert (not " + goal + "))\n(check-sat)\n";
    return out;
  }

 private:
  [[noreturn]] void unsupported(const std::string &what, Span s) const {
    fail(ErrorKind::Smt, s, fmt::format("cannot encode {} in SMT-LIB (vc {})", what, where_));
  }

  // ---- sorts --------------------------------------------------------------------
  std::string tag(const TypePtr &t) {
    switch (t->kind) {
      case Type::Kind::Int: return "Int";
      case Type::Kind::Bool: return "Bool";
      case Type::Kind::Unit: return "Unit";
      case Type::Kind::Named: return t->name;
      case Type::Kind::List: return "List_" + tag(t->args[0]);
      case Type::Kind::Tuple: {
        std::vector<std::string> xs;
        for (const auto &a : t->args) xs.push_back(tag(a));
        return "Tup_" + join(xs, "_");
      }
      case Type::Kind::Array: return "Arr_" + tag(t->args[0]);
      case Type::Kind::State: return "State";
      case Type::Kind::Arrow:
      case Type::Kind::Cont:
      case Type::Kind::Lambda: return "Clo";
      default: unsupported("type " + type_str(t), {});
    }
  }

  std::string sort(const TypePtr &t) {
    if (!t) unsupported("an untyped term", {});
    switch (t->kind) {
      case Type::Kind::Named: declare_named(t->name); return "t_" + t->name;
      case Type::Kind::List: {
        std::string n = tag(t);
        if (!datatypes_.count(n)) {
          datatypes_[n] = "";
          order_.push_back(n);
          std::string e = sort(t->args[0]), te = tag(t->args[0]);
          datatypes_[n] = fmt::format("((nil_{0}) (cons_{0} (hd_{0} {1}) (tl_{0} {2})))", te, e, n);
          dt_fields_[n] = {{"nil_" + te, {}}, {"cons_" + te, {t->args[0], t}}};
        }
        return n;
      }
      case Type::Kind::Tuple: {
        std::string n = tag(t);
        if (!datatypes_.count(n)) {
          datatypes_[n] = "";
          order_.push_back(n);
          std::vector<std::string> fs;
          for (size_t i = 0; i < t->args.size(); ++i) fs.push_back(fmt::format("({}_{} {})", n, i, sort(t->args[i])));
          datatypes_[n] = fmt::format("((mk_{} {}))", n, join(fs));
          dt_fields_[n] = {{"mk_" + n, t->args}};
        }
        return n;
      }
      case Type::Kind::Unit: unit_used_ = true; return "Unit";
      case Type::Kind::Array: return "(Array Int " + sort(t->args[0]) + ")";
      default: return tag(t);
    }
  }

  void declare_named(const std::string &name) {
    std::string n = "t_" + name;
    if (datatypes_.count(n)) return;
    auto it = p_.types.find(name);
    if (it == p_.types.end()) unsupported("unknown type " + name, {});
    datatypes_[n] = "";
    order_.push_back(n);
    std::vector<std::string> cs;
    std::vector<std::pair<std::string, std::vector<TypePtr>>> fields;
    for (const auto &c : it->second->ctors) {
      std::vector<std::string> fs;
      for (size_t i = 0; i < c.args.size(); ++i) fs.push_back(fmt::format("(s_{}_{} {})", c.name, i, sort(c.args[i])));
      cs.push_back(fs.empty() ? "(c_" + c.name + ")" : fmt::format("(c_{} {})", c.name, join(fs)));
      fields.emplace_back("c_" + c.name, c.args);
    }
    datatypes_[n] = "(" + join(cs) + ")";
    dt_fields_[n] = fields;
  }

  std::string datatype_decls() {
    std::vector<std::string> names, bodies;
    if (unit_used_ || true) {
      names.push_back("(Unit 0)");
      bodies.push_back("((unit))");
    }
    for (const auto &n : order_) {
      names.push_back("(" + n + " 0)");
      bodies.push_back(datatypes_.at(n));
    }
    std::string out = fmt::format("(declare-datatypes ({}) ({}))\n", join(names), join(bodies));
    std::vector<std::string> fs;
    for (const auto &v : p_.state.vars) fs.push_back(fmt::format("(state_{} {})", v.name, sort(v.is_array ? v.ty : v.elem)));
    out += fmt::format("(declare-datatypes ((State 0)) (((mk_state{}{}))))\n", fs.empty() ? "" : " ", join(fs));
    return out;
  }

  std::string size_decls() {
    std::vector<std::string> heads, bodies;
    auto size_of = [&](const TypePtr &t, const std::string &x) -> std::string {
      if (t->kind == Type::Kind::Named || t->kind == Type::Kind::List || t->kind == Type::Kind::Tuple)
        return fmt::format("(size_{} {})", sort(t), x);
      return "";
    };
    for (const auto &n : order_) {
      heads.push_back(fmt::format("(size_{} ((x {})) Int)", n, n));
      const auto &ctors = dt_fields_.at(n);
      std::string acc;
      for (size_t i = ctors.size(); i-- > 0;) {
        const auto &[c, args] = ctors[i];
        std::vector<std::string> parts{"1"};
        for (size_t j = 0; j < args.size(); ++j) {
          std::string sel = n.rfind("List_", 0) == 0 ? (j == 0 ? "hd_" : "tl_") + n.substr(5)
                            : n.rfind("Tup_", 0) == 0 ? fmt::format("{}_{}", n, j)
                                                      : fmt::format("s_{}_{}", c.substr(2), j);
          std::string s = size_of(args[j], fmt::format("({} x)", sel));
          if (!s.empty()) parts.push_back(s);
        }
        std::string v = parts.size() == 1 ? "1" : "(+ " + join(parts) + ")";
        acc = acc.empty() ? v : fmt::format("(ite ((_ is {}) x) {} {})", c, v, acc);
      }
      bodies.push_back(acc);
    }
    std::string out = fmt::format("(define-funs-rec ({}) ({}))\n", join(heads), join(bodies));
    // Holds by structural induction, which the solver does not attempt.
    for (const auto &n : order_) out += fmt::format("(assert (forall ((x {0})) (>= (size_{0} x) 1)))\n", n);
    return out;
  }

  // ---- logic declarations -------------------------------------------------------
  std::string logic_decls() {
    // Bodies may mention further logic symbols; emit until closed.
    std::map<std::string, std::string> text;
    std::map<std::string, std::set<std::string>> deps;
    std::vector<std::string> work(logic_used_.begin(), logic_used_.end());
    while (!work.empty()) {
      std::string n = work.back();
      work.pop_back();
      if (text.count(n)) continue;
      const LogicDecl &l = *p_.logic.at(n);
      std::set<std::string> before = logic_used_;
      logic_used_.clear();
      std::string body = l.body ? term(l.body) : "";
      deps[n] = logic_used_;
      for (const auto &d : logic_used_)
        if (!text.count(d)) work.push_back(d);
      logic_used_.insert(before.begin(), before.end());
      text[n] = body;
    }
    // Strongly connected components, dependencies first.
    std::map<std::string, int> index, low;
    std::set<std::string> on_stack;
    std::vector<std::string> stack;
    std::vector<std::vector<std::string>> sccs;
    int counter = 0;
    std::function<void(const std::string &)> visit = [&](const std::string &v) {
      index[v] = low[v] = counter++;
      stack.push_back(v);
      on_stack.insert(v);
      for (const auto &w : deps[v]) {
        if (!index.count(w)) {
          visit(w);
          low[v] = std::min(low[v], low[w]);
        } else if (on_stack.count(w)) {
          low[v] = std::min(low[v], index[w]);
        }
      }
      if (low[v] == index[v]) {
        std::vector<std::string> scc;
        std::string w;
        do {
          w = stack.back();
          stack.pop_back();
          on_stack.erase(w);
          scc.push_back(w);
        } while (w != v);
        std::sort(scc.begin(), scc.end());
        sccs.push_back(scc);
      }
    };
    for (const auto &[n, _] : text)
      if (!index.count(n)) visit(n);

    std::string out;
    for (const auto &scc : sccs) {
      auto head = [&](const std::string &n) {
        const LogicDecl &l = *p_.logic.at(n);
        std::vector<std::string> ps;
        for (const auto &[x, ty] : l.params) ps.push_back(fmt::format("({} {})", symbol(x), sort(ty)));
        return std::make_pair("(" + join(ps) + ")", l.predicate ? std::string("Bool") : sort(l.ret));
      };
      bool rec = scc.size() > 1 || deps[scc[0]].count(scc[0]);
      if (!rec) {
        const std::string &n = scc[0];
        auto [ps, ret] = head(n);
        if (text[n].empty()) {
          std::vector<std::string> sorts;
          for (const auto &[x, ty] : p_.logic.at(n)->params) sorts.push_back(sort(ty));
          out += fmt::format("(declare-fun l_{} ({}) {})\n", n, join(sorts), ret);
        } else {
          out += fmt::format("(define-fun l_{} {} {}\n  {})\n", n, ps, ret, text[n]);
        }
        continue;
      }
      std::vector<std::string> heads, bodies;
      for (const auto &n : scc) {
        auto [ps, ret] = head(n);
        heads.push_back(fmt::format("(l_{} {} {})", n, ps, ret));
        bodies.push_back(text[n]);
      }
      out += fmt::format("(define-funs-rec ({})\n  ({}))\n", join(heads), join(bodies, "\n   "));
    }
    return out;
  }

  // ---- terms --------------------------------------------------------------------
  std::string ctor_symbol(const std::string &c, const TypePtr &ty) {
    if (c == "[]") return "nil_" + tag(ty->args[0]);
    if (c == "::") return "cons_" + tag(ty->args[0]);
    return "c_" + c;
  }

  TypePtr ctor_arg_type(const std::string &c, size_t i, const TypePtr &scrut) const {
    if (c == "::") return i == 0 ? scrut->args[0] : scrut;
    return p_.ctors.at(c).args.at(i);
  }

  std::string selector(const std::string &c, size_t i, const TypePtr &scrut) {
    if (c == "::") return (i == 0 ? "hd_" : "tl_") + tag(scrut->args[0]);
    return fmt::format("s_{}_{}", c, i);
  }

  std::string app(const std::string &f, const std::vector<std::string> &args) {
    return args.empty() ? f : "(" + f + " " + join(args) + ")";
  }

  std::vector<std::string> kids(const TermPtr &t) {
    std::vector<std::string> out;
    for (const auto &k : t->kids) out.push_back(term(k));
    return out;
  }

  // Condition and bindings for a pattern against the SMT expression x.
  void pattern(const Pattern &pat, const std::string &x, const TypePtr &ty, std::vector<std::string> &conds,
               std::vector<std::pair<std::string, std::string>> &binds) {
    switch (pat.kind) {
      case Pattern::Kind::Wild:
      case Pattern::Kind::Unit: return;
      case Pattern::Kind::Var: binds.emplace_back(symbol(pat.name), x); return;
      case Pattern::Kind::Int:
        conds.push_back(fmt::format("(= {} {})", x, pat.ival < 0 ? fmt::format("(- {})", -pat.ival)
                                                                   : std::to_string(pat.ival)));
        return;
      case Pattern::Kind::Bool: conds.push_back(pat.ival ? x : "(not " + x + ")"); return;
      case Pattern::Kind::Ctor:
        sort(ty);
        conds.push_back(fmt::format("((_ is {}) {})", ctor_symbol(pat.name, ty), x));
        for (size_t i = 0; i < pat.subs.size(); ++i)
          pattern(*pat.subs[i], fmt::format("({} {})", selector(pat.name, i, ty), x), ctor_arg_type(pat.name, i, ty),
                  conds, binds);
        return;
      case Pattern::Kind::Tuple: {
        std::string n = sort(ty);
        for (size_t i = 0; i < pat.subs.size(); ++i)
          pattern(*pat.subs[i], fmt::format("({}_{} {})", n, i, x), ty->args[i], conds, binds);
        return;
      }
    }
  }

  std::string binders(const std::vector<Binder> &bs) {
    std::vector<std::string> xs;
    for (const auto &[n, ty] : bs) xs.push_back(fmt::format("({} {})", symbol(n), sort(ty)));
    return join(xs);
  }

  std::string term(const TermPtr &t) {
    switch (t->kind) {
      case K::Int: return t->ival < 0 ? fmt::format("(- {})", -t->ival) : std::to_string(t->ival);
      case K::Bool: return t->bval ? "true" : "false";
      case K::Unit: unit_used_ = true; return "unit";
      case K::Var: return symbol(t->name);
      case K::Not: return "(not " + term(t->kids[0]) + ")";
      case K::Neg: return "(- " + term(t->kids[0]) + ")";
      case K::Bin: {
        std::string a = term(t->kids[0]), b = term(t->kids[1]);
        const char *op = nullptr;
        switch (t->op) {
          case BinOp::Add: op = "+"; break;
          case BinOp::Sub: op = "-"; break;
          case BinOp::Mul: op = "*"; break;
          case BinOp::Div: tdiv_used_ = true; op = "tdiv"; break;
          case BinOp::Mod: tmod_used_ = true; op = "tmod"; break;
          case BinOp::Eq:
          case BinOp::Iff: op = "="; break;
          case BinOp::Neq: return fmt::format("(not (= {} {}))", a, b);
          case BinOp::Lt: op = "<"; break;
          case BinOp::Le: op = "<="; break;
          case BinOp::Gt: op = ">"; break;
          case BinOp::Ge: op = ">="; break;
          case BinOp::And: op = "and"; break;
          case BinOp::Or: op = "or"; break;
          case BinOp::Implies: op = "=>"; break;
        }
        return fmt::format("({} {} {})", op, a, b);
      }
      case K::Ite: return app("ite", kids(t));
      case K::Forall:
      case K::Exists: {
        std::string body = term(t->kids[0]);
        std::vector<std::string> pats;
        for (const auto &g : t->triggers) {
          std::vector<std::string> xs;
          for (const auto &x : g) xs.push_back(term(x));
          pats.push_back(":pattern (" + join(xs) + ")");
        }
        if (!pats.empty()) body = "(! " + body + " " + join(pats) + ")";
        return fmt::format("({} ({}) {})", t->kind == K::Forall ? "forall" : "exists", binders(t->binders), body);
      }
      case K::Let: return fmt::format("(let (({} {})) {})", symbol(t->name), term(t->kids[0]), term(t->kids[1]));
      case K::Match: {
        std::string x = fmt::format("m!{}", ++fresh_);
        std::string acc;
        for (size_t i = t->cases.size(); i-- > 0;) {
          std::vector<std::string> conds;
          std::vector<std::pair<std::string, std::string>> binds;
          pattern(*t->cases[i].pat, x, t->kids[0]->ty, conds, binds);
          std::string body = term(t->cases[i].body);
          if (!binds.empty()) {
            std::vector<std::string> bs;
            for (const auto &[n, e] : binds) bs.push_back(fmt::format("({} {})", n, e));
            body = fmt::format("(let ({}) {})", join(bs), body);
          }
          if (acc.empty() || conds.empty()) {
            acc = body;
          } else {
            std::string c = conds.size() == 1 ? conds[0] : "(and " + join(conds) + ")";
            acc = fmt::format("(ite {} {} {})", c, body, acc);
          }
        }
        return fmt::format("(let (({} {})) {})", x, term(t->kids[0]), acc);
      }
      case K::Tuple: {
        std::string n = sort(t->ty);
        return app("mk_" + n, kids(t));
      }
      case K::Select: return app("select", kids(t));
      case K::Length: {
        const StateVar *v = p_.state.find(t->name);
        return std::to_string(v ? v->size : 0);
      }
      case K::Valid: valid_used_ = true; return app("valid", kids(t));
      case K::Pre: {
        std::string a = sort(t->kids[1]->ty);
        std::string n = "pre_" + tag(t->kids[1]->ty);
        pres_[n] = a;
        return app(n, kids(t));
      }
      case K::Post: {
        std::string a = sort(t->kids[1]->ty), r = sort(t->kids[4]->ty);
        std::string n = "post_" + tag(t->kids[1]->ty) + "_" + tag(t->kids[4]->ty);
        posts_[n] = {a, r};
        return app(n, kids(t));
      }
      case K::Field: return fmt::format("(state_{} {})", t->name, term(t->kids[0]));
      case K::StateRec: {
        std::vector<std::string> vals;
        for (const auto &v : p_.state.vars)
          for (size_t i = 0; i < t->names.size(); ++i)
            if (t->names[i] == v.name) vals.push_back(term(t->kids[i]));
        return app("mk_state", vals);
      }
      case K::App: return application(t);
      case K::Deref:
      case K::Old: unsupported("a program-level state reference", t->span);
    }
    unsupported("an unknown term", t->span);
  }

  std::string application(const TermPtr &t) {
    const std::string &f = t->name;
    if (f == "[]" || f == "::" || p_.ctors.count(f)) {
      sort(t->ty);
      return app(ctor_symbol(f, t->ty), kids(t));
    }
    if (f.rfind("is:", 0) == 0) {
      const TypePtr &ty = t->kids[0]->ty;
      sort(ty);
      return fmt::format("((_ is {}) {})", ctor_symbol(f.substr(3), ty), term(t->kids[0]));
    }
    if (f.rfind("sel:", 0) == 0) {
      auto colon = f.rfind(':');
      std::string c = f.substr(4, colon - 4);
      size_t i = std::stoul(f.substr(colon + 1));
      const TypePtr &ty = t->kids[0]->ty;
      sort(ty);
      return fmt::format("({} {})", selector(c, i, ty), term(t->kids[0]));
    }
    if (f.rfind("proj:", 0) == 0) {
      std::string n = sort(t->kids[0]->ty);
      return fmt::format("({}_{} {})", n, f.substr(5), term(t->kids[0]));
    }
    if (f == "store") return app("store", kids(t));
    if (f == "size") {
      size_used_ = true;
      return fmt::format("(size_{} {})", sort(t->kids[0]->ty), term(t->kids[0]));
    }
    if (p_.logic.count(f)) {
      logic_used_.insert(f);
      return app("l_" + f, kids(t));
    }
    unsupported("unknown function '" + f + "'", t->span);
  }

  const IrProgram &p_;
  std::string where_;
  std::map<std::string, std::string> datatypes_;
  std::map<std::string, std::vector<std::pair<std::string, std::vector<TypePtr>>>> dt_fields_;
  std::vector<std::string> order_;
  std::map<std::string, std::string> pres_;
  std::map<std::string, std::pair<std::string, std::string>> posts_;
  std::set<std::string> logic_used_;
  bool unit_used_ = false, valid_used_ = false, tdiv_used_ = false, tmod_used_ = false, size_used_ = false;
  int fresh_ = 0;
};

}  // namespace

std::string emit_smtlib(const VC &vc, const IrProgram &p, const std::string &logic) {
  return Emitter(p, vc.id).script(vc, logic);
}

}  // namespace effv
