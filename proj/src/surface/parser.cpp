#include "surface/parser.hpp"

#include <fmt/format.h>

#include <set>

#include "surface/lexer.hpp"

namespace effv {

namespace {

bool is_cmp_sym(const Token &t) {
  return t.kind == Token::Kind::Sym &&
         (t.text == "=" || t.text == "<>" || t.text == "<" || t.text == "<=" || t.text == ">" || t.text == ">=");
}

BinOp cmp_op(const std::string &s) {
  if (s == "=") return BinOp::Eq;
  if (s == "<>") return BinOp::Neq;
  if (s == "<") return BinOp::Lt;
  if (s == "<=") return BinOp::Le;
  if (s == ">") return BinOp::Gt;
  return BinOp::Ge;
}

const std::set<std::string> kKeywords = {
    "let", "rec", "in", "fun", "if", "then", "else", "match", "with", "try", "effect", "perform", "continue",
    "begin", "end", "true", "false", "not", "mod", "type", "of", "ref"};

const std::set<std::string> kClauseWords = {"requires", "ensures", "modifies", "performs", "variant",
                                            "try_ensures", "returns", "protocol", "function", "predicate"};

class Parser {
 public:
  explicit Parser(std::vector<Token> toks) : toks_(std::move(toks)) {}

  SourceProgram program() {
    SourceProgram p;
    while (!at_eof()) parse_top(p);
    return p;
  }

  TermPtr standalone_term() {
    TermPtr t = term();
    if (!at_eof()) error("end of input");
    return t;
  }

  TypePtr standalone_type() {
    TypePtr t = type();
    if (!at_eof()) error("end of input");
    return t;
  }

 private:
  // ---- token plumbing ---------------------------------------------------
  const Token &peek(size_t off = 0) const {
    size_t i = std::min(pos_ + off, toks_.size() - 1);
    return toks_[i];
  }
  bool at_eof() const { return peek().kind == Token::Kind::Eof; }
  const Token &advance() {
    expected_.clear();
    const Token &t = toks_[pos_];
    if (pos_ + 1 < toks_.size()) ++pos_;
    last_ = t.span;
    return t;
  }
  bool check_sym(std::string_view s) {
    expected_.insert(fmt::format("'{}'", s));
    return peek().sym(s);
  }
  bool check_kw(std::string_view s) {
    expected_.insert(fmt::format("'{}'", s));
    return peek().ident(s);
  }
  bool accept_sym(std::string_view s) {
    if (!check_sym(s)) return false;
    advance();
    return true;
  }
  bool accept_kw(std::string_view s) {
    if (!check_kw(s)) return false;
    advance();
    return true;
  }
  void expect_sym(std::string_view s) {
    if (!accept_sym(s)) error();
  }
  void expect_kw(std::string_view s) {
    if (!accept_kw(s)) error();
  }
  bool check_spec_open() {
    expected_.insert("'(*@'");
    return peek().kind == Token::Kind::SpecOpen;
  }
  bool is_keyword(const Token &t) const { return t.kind == Token::Kind::Ident && kKeywords.count(t.text); }
  bool is_clause_word(const Token &t) const {
    return t.kind == Token::Kind::Ident && kClauseWords.count(t.text);
  }

  std::string ident(const char *what = "identifier") {
    expected_.insert(what);
    const Token &t = peek();
    if (t.kind != Token::Kind::Ident || is_keyword(t)) error();
    return advance().text;
  }
  std::string uident(const char *what = "capitalized identifier") {
    expected_.insert(what);
    if (peek().kind != Token::Kind::UIdent) error();
    return advance().text;
  }

  [[noreturn]] void error(std::string expected = {}) {
    if (!expected.empty()) expected_.insert(expected);
    std::string exp;
    for (const auto &e : expected_) {
      if (!exp.empty()) exp += ", ";
      exp += e;
    }
    const Token &t = peek();
    std::string found = t.kind == Token::Kind::Eof ? "end of input" : fmt::format("'{}'", t.text);
    fail(ErrorKind::Syntax, t.span, fmt::format("unexpected {}; expected one of: {}", found, exp));
  }

  Span from(Span start) const {
    start.end_line = last_.end_line;
    start.end_col = last_.end_col;
    return start;
  }

  // ---- types ------------------------------------------------------------
  TypePtr type() {
    TypePtr a = tuple_type();
    if (accept_sym("->")) return Type::arrow(a, type());
    return a;
  }
  TypePtr tuple_type() {
    std::vector<TypePtr> ts{app_type()};
    while (accept_sym("*")) ts.push_back(app_type());
    return ts.size() == 1 ? ts[0] : Type::tuple(ts);
  }
  TypePtr app_type() {
    TypePtr t = atom_type();
    for (;;) {
      if (accept_kw("ref"))
        t = Type::ref(t);
      else if (accept_kw("array"))
        t = Type::array(t);
      else if (accept_kw("list"))
        t = Type::list(t);
      else
        return t;
    }
  }
  TypePtr atom_type() {
    if (accept_sym("(")) {
      TypePtr t = type();
      expect_sym(")");
      return t;
    }
    expected_.insert("type");
    const Token &t = peek();
    if (t.kind != Token::Kind::Ident || is_keyword(t) || t.text == "array" || t.text == "list") error();
    advance();
    if (t.text == "int") return Type::int_();
    if (t.text == "bool") return Type::bool_();
    if (t.text == "unit") return Type::unit();
    return Type::named(t.text);
  }

  // ---- top level --------------------------------------------------------
  void parse_top(SourceProgram &p) {
    Span start = peek().span;
    if (accept_kw("type")) {
      auto td = std::make_shared<TypeDecl>();
      td->name = ident("type name");
      expect_sym("=");
      accept_sym("|");
      do {
        Constructor c;
        c.name = uident("constructor");
        if (accept_kw("of")) {
          c.args.push_back(app_type());
          while (accept_sym("*")) c.args.push_back(app_type());
        }
        td->ctors.push_back(std::move(c));
      } while (accept_sym("|"));
      Decl d;
      d.kind = Decl::Kind::Type;
      d.span = from(start);
      d.type = td;
      p.decls.push_back(std::move(d));
      return;
    }
    if (accept_kw("effect")) {
      auto ed = std::make_shared<EffectDecl>();
      ed->name = uident("effect name");
      expect_sym(":");
      ed->sig = type();
      for (const auto &d : p.decls)
        if (d.kind == Decl::Kind::Effect && d.effect->name == ed->name)
          fail(ErrorKind::Semantic, from(start), fmt::format("duplicate effect '{}'", ed->name));
      Decl d;
      d.kind = Decl::Kind::Effect;
      d.span = from(start);
      d.effect = ed;
      p.decls.push_back(std::move(d));
      return;
    }
    if (check_kw("let")) {
      parse_top_let(p);
      return;
    }
    if (check_spec_open()) {
      advance();
      while (!check_spec_close()) parse_top_spec_item(p);
      advance();
      return;
    }
    error();
  }

  bool check_spec_close() {
    expected_.insert("'*)'");
    return peek().kind == Token::Kind::SpecClose;
  }

  void parse_top_spec_item(SourceProgram &p) {
    Span start = peek().span;
    if (accept_kw("protocol")) {
      auto pr = protocol_body(start, false);
      bool known = false;
      for (const auto &d : p.decls) {
        if (d.kind == Decl::Kind::Effect && d.effect->name == pr->effect) known = true;
        if (d.kind == Decl::Kind::Protocol && d.protocol->effect == pr->effect)
          fail(ErrorKind::Semantic, pr->span,
               fmt::format("conflicting protocols for effect '{}'", pr->effect));
      }
      if (!known)
        fail(ErrorKind::Semantic, pr->span, fmt::format("protocol for undeclared effect '{}'", pr->effect));
      Decl d;
      d.kind = Decl::Kind::Protocol;
      d.span = pr->span;
      d.protocol = pr;
      p.decls.push_back(std::move(d));
      return;
    }
    if (check_kw("function") || check_kw("predicate")) {
      bool pred = advance().text == "predicate";
      auto ld = std::make_shared<LogicDecl>();
      ld->predicate = pred;
      ld->name = ident("logic function name");
      while (accept_sym("(")) {
        std::string n = ident();
        expect_sym(":");
        ld->params.emplace_back(n, type());
        expect_sym(")");
      }
      if (pred) {
        ld->ret = Type::bool_();
      } else {
        expect_sym(":");
        ld->ret = type();
      }
      if (accept_sym("=")) ld->body = term();
      Decl d;
      d.kind = Decl::Kind::Logic;
      d.span = from(start);
      d.logic = ld;
      p.decls.push_back(std::move(d));
      return;
    }
    error();
  }

  std::shared_ptr<const Protocol> protocol_body(Span start, bool local) {
    auto pr = std::make_shared<Protocol>();
    pr->local = local;
    pr->effect = uident("effect name");
    while (peek().kind == Token::Kind::Ident && !is_clause_word(peek()) && !is_keyword(peek()))
      pr->params.push_back(advance().text);
    bool braced = false;
    if (accept_sym("{")) {
      braced = true;
    } else {
      expect_sym(":");
    }
    pr->braced = braced;
    for (;;) {
      if (accept_kw("requires")) {
        pr->requires_.push_back(term());
      } else if (accept_kw("ensures")) {
        pr->ensures.push_back(term());
      } else if (accept_kw("modifies")) {
        do pr->modifies.push_back(ident()); while (accept_sym(","));
      } else {
        break;
      }
    }
    if (braced) expect_sym("}");
    pr->span = from(start);
    return pr;
  }

  void parse_top_let(SourceProgram &p) {
    Span start = peek().span;
    expect_kw("let");
    bool rec = accept_kw("rec");
    std::string name = ident("binding name");
    std::vector<Param> params = param_list();
    TypePtr ann;
    if (accept_sym(":")) ann = type();
    expect_sym("=");
    if (params.empty()) {
      if (rec) error("parameter");
      auto sd = std::make_shared<StateDecl>();
      sd->name = name;
      sd->ty = ann;
      if (accept_kw("ref")) {
        if (!ann || ann->kind != Type::Kind::Ref)
          fail(ErrorKind::Syntax, from(start), "reference definition needs a `t ref` annotation");
        sd->init = atom_expr();
      } else if (peek().kind == Token::Kind::UIdent && peek().text == "Array") {
        advance();
        expect_sym(".");
        expect_kw("make");
        expected_.insert("array size");
        if (peek().kind != Token::Kind::Int) error();
        sd->size = std::stoll(advance().text);
        sd->init = atom_expr();
        if (!ann || ann->kind != Type::Kind::Array)
          fail(ErrorKind::Syntax, from(start), "array definition needs a `t array` annotation");
      } else {
        error("'ref' or 'Array.make'");
      }
      Decl d;
      d.kind = Decl::Kind::State;
      d.span = from(start);
      d.state = sd;
      p.decls.push_back(std::move(d));
      return;
    }
    auto fd = std::make_shared<FunctionDecl>();
    fd->name = name;
    fd->rec = rec;
    fd->params = std::move(params);
    fd->ret = ann;
    fd->body = seq_expr();
    if (check_spec_open()) fd->spec = spec_block();
    Decl d;
      d.kind = Decl::Kind::Function;
      d.span = from(start);
    d.function = fd;
    p.decls.push_back(std::move(d));
  }

  std::vector<Param> param_list() {
    std::vector<Param> ps;
    while (check_sym("(")) {
      Span start = peek().span;
      advance();
      Param prm;
      if (accept_sym(")")) {
        prm.name = "()";
        prm.ty = Type::unit();
        prm.span = from(start);
        ps.push_back(prm);
        continue;
      }
      if (check_sym("(")) {
        // ((x : t) [@ghost])
        advance();
        prm = typed_param();
        expect_sym(")");
        ghost_attr(prm);
        expect_sym(")");
      } else {
        prm = typed_param();
        ghost_attr(prm);
        expect_sym(")");
        ghost_attr(prm);
      }
      prm.span = from(start);
      ps.push_back(prm);
    }
    return ps;
  }

  Param typed_param() {
    Param prm;
    if (accept_sym("_"))
      prm.name = "_";
    else
      prm.name = ident("parameter");
    expect_sym(":");
    prm.ty = type();
    return prm;
  }

  void ghost_attr(Param &prm) {
    if (accept_sym("[@")) {
      expect_kw("ghost");
      expect_sym("]");
      prm.ghost = true;
    }
  }

  // ---- specification blocks ----------------------------------------------
  SpecPtr spec_block() {
    Span start = peek().span;
    advance();  // (*@
    auto sp = std::make_shared<SpecClauses>();
    for (;;) {
      Span cs = peek().span;
      if (accept_kw("requires")) {
        sp->requires_.push_back(term());
      } else if (accept_kw("ensures")) {
        sp->ensures.push_back(term());
      } else if (accept_kw("modifies")) {
        do sp->modifies.push_back(ident()); while (accept_sym(","));
      } else if (accept_kw("performs")) {
        do sp->performs.push_back(uident("effect name")); while (accept_sym(","));
      } else if (accept_kw("variant")) {
        if (sp->variant) fail(ErrorKind::Syntax, cs, "duplicate variant clause");
        sp->variant = term();
      } else if (accept_kw("protocol")) {
        sp->protocols.push_back(protocol_body(cs, true));
      } else {
        break;
      }
    }
    if (!check_spec_close()) error();
    advance();
    sp->span = from(start);
    return sp;
  }

  bool next_is_handler_spec() const {
    return peek().kind == Token::Kind::SpecOpen &&
           (peek(1).ident("try_ensures") || peek(1).ident("returns"));
  }

  HandlerSpecPtr handler_spec() {
    Span start = peek().span;
    advance();
    auto hs = std::make_shared<HandlerSpec>();
    for (;;) {
      if (accept_kw("try_ensures")) {
        hs->try_ensures.push_back(term());
      } else if (accept_kw("returns")) {
        hs->returns = type();
      } else {
        break;
      }
    }
    if (!check_spec_close()) error();
    advance();
    hs->span = from(start);
    return hs;
  }

  // ---- expressions ------------------------------------------------------
  static std::shared_ptr<Expr> mk(Expr::Kind k, Span s) {
    auto e = std::make_shared<Expr>();
    e->kind = k;
    e->span = s;
    return e;
  }

  ExprPtr seq_expr() {
    Span start = peek().span;
    ExprPtr a = stmt_expr();
    if (accept_sym(";")) {
      if (ends_sequence()) return a;
      auto e = mk(Expr::Kind::Seq, start);
      e->kids = {a, seq_expr()};
      e->span = from(start);
      return e;
    }
    return a;
  }

  bool ends_sequence() const {
    const Token &t = peek();
    return t.kind == Token::Kind::Eof || t.kind == Token::Kind::SpecOpen || t.kind == Token::Kind::SpecClose ||
           t.ident("end") || t.ident("in") || t.sym(")") || t.sym("|");
  }

  ExprPtr stmt_expr() {
    Span start = peek().span;
    if (accept_kw("let")) {
      auto e = mk(Expr::Kind::Let, start);
      e->rec = accept_kw("rec");
      if (accept_sym("_")) {
        e->name = "_";
      } else if (check_sym("(") && peek(1).sym(")")) {
        advance();
        advance();
        e->name = "()";
      } else {
        e->name = ident("binding name");
      }
      e->params = param_list();
      if (accept_sym(":")) e->ann = type();
      expect_sym("=");
      ExprPtr bound = seq_expr();
      if (check_spec_open()) e->spec = spec_block();
      expect_kw("in");
      e->kids = {bound, seq_expr()};
      e->span = from(start);
      return e;
    }
    if (accept_kw("fun")) {
      auto e = mk(Expr::Kind::Fun, start);
      if (check_spec_open()) e->spec = spec_block();
      e->params = param_list();
      if (e->params.empty()) error("parameter");
      if (accept_sym(":")) e->ann = tuple_type();
      expect_sym("->");
      e->kids = {seq_expr()};
      e->span = from(start);
      return e;
    }
    if (accept_kw("if")) {
      auto e = mk(Expr::Kind::If, start);
      ExprPtr c = seq_expr();
      expect_kw("then");
      ExprPtr a = stmt_expr();
      ExprPtr b;
      if (accept_kw("else")) {
        b = stmt_expr();
      } else {
        b = mk(Expr::Kind::Unit, last_);
      }
      e->kids = {c, a, b};
      e->span = from(start);
      return e;
    }
    if (accept_kw("match")) {
      auto e = mk(Expr::Kind::Match, start);
      e->kids = {seq_expr()};
      expect_kw("with");
      accept_sym("|");
      do {
        MatchCase mc;
        mc.pat = pattern();
        expect_sym("->");
        mc.body = seq_expr();
        e->cases.push_back(std::move(mc));
      } while (accept_sym("|"));
      e->span = from(start);
      return e;
    }
    if (accept_kw("try")) {
      auto e = mk(Expr::Kind::Try, start);
      e->kids = {seq_expr()};
      expect_kw("with");
      accept_sym("|");
      do {
        Span bs = peek().span;
        if (accept_kw("effect")) {
          EffectBranch br;
          if (accept_sym("(")) {
            br.effect = uident("effect name");
            while (peek().kind == Token::Kind::Ident && !is_keyword(peek())) br.params.push_back(advance().text);
            expect_sym(")");
          } else {
            br.effect = uident("effect name");
          }
          br.k = ident("continuation name");
          expect_sym("->");
          br.body = seq_expr();
          br.span = from(bs);
          e->branches.push_back(std::move(br));
        } else {
          ValueBranch vb;
          vb.name = accept_sym("_") ? "_" : ident("value name");
          expect_sym("->");
          vb.body = seq_expr();
          if (e->value_branch) fail(ErrorKind::Syntax, from(bs), "duplicate value branch");
          e->value_branch = std::move(vb);
        }
      } while (accept_sym("|"));
      if (next_is_handler_spec()) e->handler_spec = handler_spec();
      e->span = from(start);
      return e;
    }
    return assign_expr();
  }

  ExprPtr assign_expr() {
    Span start = peek().span;
    ExprPtr lhs = or_expr();
    if (accept_sym(":=")) {
      if (lhs->kind != Expr::Kind::Var) fail(ErrorKind::Syntax, lhs->span, "left side of ':=' must be a name");
      auto e = mk(Expr::Kind::Assign, start);
      e->name = lhs->name;
      e->kids = {stmt_expr()};
      e->span = from(start);
      return e;
    }
    if (accept_sym("<-")) {
      if (lhs->kind != Expr::Kind::ArrGet) fail(ErrorKind::Syntax, lhs->span, "left side of '<-' must be a.(i)");
      auto e = mk(Expr::Kind::ArrSet, start);
      e->name = lhs->name;
      e->kids = {lhs->kids[0], stmt_expr()};
      e->span = from(start);
      return e;
    }
    return lhs;
  }

  ExprPtr binop(BinOp op, ExprPtr a, ExprPtr b, Span start) {
    auto e = mk(Expr::Kind::Binop, start);
    e->op = op;
    e->kids = {std::move(a), std::move(b)};
    e->span = from(start);
    return e;
  }

  ExprPtr or_expr() {
    Span start = peek().span;
    ExprPtr a = and_expr();
    if (accept_sym("||")) return binop(BinOp::Or, a, or_expr(), start);
    return a;
  }
  ExprPtr and_expr() {
    Span start = peek().span;
    ExprPtr a = cmp_expr();
    if (accept_sym("&&")) return binop(BinOp::And, a, and_expr(), start);
    return a;
  }
  ExprPtr cmp_expr() {
    Span start = peek().span;
    ExprPtr a = cons_expr();
    expected_.insert("comparison");
    if (is_cmp_sym(peek())) {
      BinOp op = cmp_op(advance().text);
      return binop(op, a, cons_expr(), start);
    }
    return a;
  }
  ExprPtr cons_expr() {
    Span start = peek().span;
    ExprPtr a = add_expr();
    if (accept_sym("::")) {
      auto e = mk(Expr::Kind::Ctor, start);
      e->name = "::";
      e->kids = {a, cons_expr()};
      e->span = from(start);
      return e;
    }
    return a;
  }
  ExprPtr add_expr() {
    Span start = peek().span;
    ExprPtr a = mul_expr();
    for (;;) {
      if (accept_sym("+"))
        a = binop(BinOp::Add, a, mul_expr(), start);
      else if (accept_sym("-"))
        a = binop(BinOp::Sub, a, mul_expr(), start);
      else
        return a;
    }
  }
  ExprPtr mul_expr() {
    Span start = peek().span;
    ExprPtr a = unary_expr();
    for (;;) {
      if (accept_sym("*"))
        a = binop(BinOp::Mul, a, unary_expr(), start);
      else if (accept_sym("/"))
        a = binop(BinOp::Div, a, unary_expr(), start);
      else if (accept_kw("mod"))
        a = binop(BinOp::Mod, a, unary_expr(), start);
      else
        return a;
    }
  }
  ExprPtr unary_expr() {
    Span start = peek().span;
    if (accept_sym("-")) {
      ExprPtr x = unary_expr();
      if (x->kind == Expr::Kind::Int && x->ival >= 0 && !x->span.empty() && x->span.line == start.line &&
          x->span.col == start.col + 1) {
        auto lit = std::make_shared<Expr>(*x);
        lit->ival = -x->ival;
        lit->span = from(start);
        return lit;
      }
      auto e = mk(Expr::Kind::Unop, start);
      e->name = "-";
      e->kids = {x};
      e->span = from(start);
      return e;
    }
    if (accept_kw("not")) {
      auto e = mk(Expr::Kind::Unop, start);
      e->name = "not";
      e->kids = {unary_expr()};
      e->span = from(start);
      return e;
    }
    return app_expr();
  }

  bool starts_atom() const {
    const Token &t = peek();
    switch (t.kind) {
      case Token::Kind::Int:
      case Token::Kind::UIdent: return true;
      case Token::Kind::Ident:
        return !is_keyword(t) || t.text == "true" || t.text == "false" || t.text == "begin";
      case Token::Kind::Sym: return t.text == "(" || t.text == "!" || t.text == "[";
      default: return false;
    }
  }

  ExprPtr app_expr() {
    Span start = peek().span;
    if (accept_kw("perform")) {
      auto e = mk(Expr::Kind::Perform, start);
      if (accept_sym("(")) {
        e->name = uident("effect name");
        while (starts_atom()) e->kids.push_back(atom_expr());
        expect_sym(")");
      } else {
        e->name = uident("effect name");
      }
      e->span = from(start);
      return e;
    }
    if (accept_kw("ref")) {
      // Only meaningful at top level; sema reports it as hidden state.
      auto e = mk(Expr::Kind::App, start);
      auto f = mk(Expr::Kind::Var, start);
      f->name = "ref";
      e->kids = {f, atom_expr()};
      e->span = from(start);
      return e;
    }
    if (peek().kind == Token::Kind::UIdent && peek().text == "Array" && peek(1).sym(".")) {
      advance();
      advance();
      expect_kw("make");
      auto e = mk(Expr::Kind::App, start);
      auto f = mk(Expr::Kind::Var, start);
      f->name = "Array.make";
      e->kids = {f, atom_expr(), atom_expr()};
      e->span = from(start);
      return e;
    }
    if (accept_kw("continue")) {
      auto e = mk(Expr::Kind::Continue, start);
      e->name = ident("continuation name");
      e->kids = {atom_expr()};
      e->span = from(start);
      return e;
    }
    if (peek().kind == Token::Kind::UIdent) {
      auto e = mk(Expr::Kind::Ctor, start);
      e->name = advance().text;
      if (starts_atom()) {
        ExprPtr arg = atom_expr();
        if (arg->kind == Expr::Kind::Tuple)
          e->kids = arg->kids;
        else
          e->kids = {arg};
      }
      e->span = from(start);
      return e;
    }
    ExprPtr f = atom_expr();
    if (!starts_atom()) return (f);
    auto e = mk(Expr::Kind::App, start);
    e->kids.push_back((f));
    while (starts_atom()) e->kids.push_back((atom_expr()));
    e->span = from(start);
    return e;
  }

  ExprPtr atom_expr() {
    ExprPtr a = atom_base();
    while (check_sym(".(")) {
      Span start = a->span;
      advance();
      if (a->kind != Expr::Kind::Var) fail(ErrorKind::Syntax, a->span, "array access needs a named array");
      auto e = mk(Expr::Kind::ArrGet, start);
      e->name = a->name;
      e->kids = {seq_expr()};
      expect_sym(")");
      e->span = from(start);
      a = e;
    }
    return a;
  }

  ExprPtr atom_base() {
    Span start = peek().span;
    const Token &t = peek();
    if (t.kind == Token::Kind::Int) {
      auto e = mk(Expr::Kind::Int, start);
      e->ival = std::stoll(advance().text);
      e->span = from(start);
      return e;
    }
    if (accept_kw("true") || accept_kw("false")) {
      auto e = mk(Expr::Kind::Bool, start);
      e->ival = toks_[pos_ - 1].text == "true";
      e->span = from(start);
      return e;
    }
    if (accept_kw("begin")) {
      if (accept_kw("end")) return mk(Expr::Kind::Unit, from(start));
      ExprPtr e = seq_expr();
      expect_kw("end");
      return e;
    }
    if (accept_sym("!")) {
      auto e = mk(Expr::Kind::Deref, start);
      e->name = ident("reference name");
      e->span = from(start);
      return e;
    }
    if (accept_sym("[")) {
      expect_sym("]");
      auto e = mk(Expr::Kind::Ctor, start);
      e->name = "[]";
      e->span = from(start);
      return e;
    }
    if (accept_sym("(")) {
      if (accept_sym(")")) return mk(Expr::Kind::Unit, from(start));
      ExprPtr first = seq_expr();
      if (check_sym(",")) {
        auto e = mk(Expr::Kind::Tuple, start);
        e->kids.push_back(first);
        while (accept_sym(",")) e->kids.push_back(or_expr());
        expect_sym(")");
        e->span = from(start);
        return e;
      }
      expect_sym(")");
      return first;
    }
    if (t.kind == Token::Kind::UIdent) {
      auto e = mk(Expr::Kind::Ctor, start);
      e->name = advance().text;
      e->span = from(start);
      return e;
    }
    expected_.insert("expression");
    if (t.kind == Token::Kind::Ident && !is_keyword(t)) {
      auto e = mk(Expr::Kind::Var, start);
      e->name = advance().text;
      e->span = from(start);
      return e;
    }
    error();
  }

  // ---- patterns ---------------------------------------------------------
  PatternPtr pattern() {
    Span start = peek().span;
    PatternPtr a = app_pattern();
    if (accept_sym("::")) return pat_ctor("::", {a, pattern()}, nullptr, from(start));
    return a;
  }
  PatternPtr app_pattern() {
    Span start = peek().span;
    if (peek().kind == Token::Kind::UIdent) {
      std::string n = advance().text;
      std::vector<PatternPtr> subs;
      if (starts_atom_pattern()) {
        PatternPtr arg = atom_pattern();
        if (arg->kind == Pattern::Kind::Tuple)
          subs = arg->subs;
        else
          subs = {arg};
      }
      return pat_ctor(n, std::move(subs), nullptr, from(start));
    }
    return atom_pattern();
  }
  bool starts_atom_pattern() const {
    const Token &t = peek();
    return t.kind == Token::Kind::Int || t.kind == Token::Kind::UIdent ||
           (t.kind == Token::Kind::Ident && (!is_keyword(t) || t.text == "true" || t.text == "false")) ||
           t.sym("_") || t.sym("(") || t.sym("[");
  }
  PatternPtr atom_pattern() {
    Span start = peek().span;
    if (accept_sym("_")) return pat_wild(from(start));
    if (accept_sym("[")) {
      expect_sym("]");
      return pat_ctor("[]", {}, nullptr, from(start));
    }
    if (peek().kind == Token::Kind::Int) {
      auto p = std::make_shared<Pattern>();
      p->kind = Pattern::Kind::Int;
      p->ival = std::stoll(advance().text);
      p->span = from(start);
      return p;
    }
    if (accept_kw("true") || accept_kw("false")) {
      auto p = std::make_shared<Pattern>();
      p->kind = Pattern::Kind::Bool;
      p->ival = toks_[pos_ - 1].text == "true";
      p->span = from(start);
      return p;
    }
    if (accept_sym("(")) {
      if (accept_sym(")")) {
        auto p = std::make_shared<Pattern>();
        p->kind = Pattern::Kind::Unit;
        p->span = from(start);
        return p;
      }
      std::vector<PatternPtr> subs{pattern()};
      while (accept_sym(",")) subs.push_back(pattern());
      expect_sym(")");
      if (subs.size() == 1) return subs[0];
      return pat_tuple(std::move(subs), nullptr, from(start));
    }
    if (peek().kind == Token::Kind::UIdent) return pat_ctor(advance().text, {}, nullptr, from(start));
    return pat_var(ident("pattern"), nullptr, from(start));
  }

  // ---- terms ------------------------------------------------------------
  TermPtr set_span(TermPtr t, Span start) {
    auto c = std::make_shared<Term>(*t);
    c->span = from(start);
    return c;
  }

  TermPtr term() {
    Span start = peek().span;
    if (check_kw("forall") || check_kw("exists")) {
      bool all = advance().text == "forall";
      std::vector<Binder> bs;
      do {
        std::string n = ident("bound variable");
        TypePtr ty = Type::int_();
        if (accept_sym(":")) ty = type();
        bs.emplace_back(n, ty);
      } while (accept_sym(","));
      std::vector<std::vector<TermPtr>> trig;
      if (accept_sym("[")) {
        do {
          trig.emplace_back();
          do trig.back().push_back(term()); while (accept_sym(","));
        } while (accept_sym("|"));
        expect_sym("]");
      }
      expect_sym(".");
      TermPtr body = term();
      TermPtr r = all ? tm::forall(bs, body, trig) : tm::exists(bs, body);
      return set_span(r, start);
    }
    if (accept_kw("let")) {
      std::string n = ident("bound variable");
      expect_sym("=");
      TermPtr v = term();
      expect_kw("in");
      return set_span(tm::let(n, v, term()), start);
    }
    if (accept_kw("if")) {
      TermPtr c = term();
      expect_kw("then");
      TermPtr a = term();
      expect_kw("else");
      TermPtr b = term();
      return set_span(tm::ite(c, a, b), start);
    }
    return impl_term();
  }

  TermPtr impl_term() {
    Span start = peek().span;
    TermPtr a = or_term();
    if (accept_sym("->")) return set_span(tm::implies(a, term()), start);
    if (accept_sym("<->")) return set_span(tm::iff(a, or_term()), start);
    return a;
  }
  TermPtr or_term() {
    Span start = peek().span;
    TermPtr a = and_term();
    if (accept_sym("||")) return set_span(tm::or_(a, or_term()), start);
    return a;
  }
  TermPtr and_term() {
    Span start = peek().span;
    TermPtr a = not_term();
    if (accept_sym("&&")) return set_span(tm::and_(a, and_term()), start);
    return a;
  }
  TermPtr not_term() {
    Span start = peek().span;
    if (accept_kw("not")) return set_span(tm::not_(not_term()), start);
    return cmp_term();
  }
  TermPtr cmp_term() {
    Span start = peek().span;
    TermPtr a = cons_term();
    expected_.insert("comparison");
    if (is_cmp_sym(peek())) {
      BinOp op = cmp_op(advance().text);
      return set_span(tm::bin(op, a, cons_term()), start);
    }
    return a;
  }
  TermPtr cons_term() {
    Span start = peek().span;
    TermPtr a = add_term();
    if (accept_sym("::")) return set_span(tm::app("::", {a, cons_term()}), start);
    return a;
  }
  TermPtr add_term() {
    Span start = peek().span;
    TermPtr a = mul_term();
    for (;;) {
      if (accept_sym("+"))
        a = set_span(tm::bin(BinOp::Add, a, mul_term()), start);
      else if (accept_sym("-"))
        a = set_span(tm::bin(BinOp::Sub, a, mul_term()), start);
      else
        return a;
    }
  }
  TermPtr mul_term() {
    Span start = peek().span;
    TermPtr a = unary_term();
    for (;;) {
      if (accept_sym("*"))
        a = set_span(tm::bin(BinOp::Mul, a, unary_term()), start);
      else if (accept_sym("/"))
        a = set_span(tm::bin(BinOp::Div, a, unary_term()), start);
      else if (accept_kw("mod"))
        a = set_span(tm::bin(BinOp::Mod, a, unary_term()), start);
      else
        return a;
    }
  }
  TermPtr unary_term() {
    Span start = peek().span;
    if (accept_sym("-")) {
      TermPtr x = unary_term();
      if (x->kind == Term::Kind::Int && x->ival >= 0) return set_span(tm::int_(-x->ival), start);
      return set_span(tm::neg(x), start);
    }
    return app_term();
  }

  bool starts_atom_term() const {
    const Token &t = peek();
    switch (t.kind) {
      case Token::Kind::Int:
      case Token::Kind::UIdent: return true;
      case Token::Kind::Ident:
        if (is_clause_word(t)) return false;
        if (t.text == "true" || t.text == "false" || t.text == "match") return true;
        return !is_keyword(t) && t.text != "old" && t.text != "forall" && t.text != "exists" &&
               t.text != "valid" && t.text != "pre" && t.text != "post" && t.text != "length";
      case Token::Kind::Sym: return t.text == "(" || t.text == "!" || t.text == "[" || t.text == "{";
      default: return false;
    }
  }

  TermPtr app_term() {
    Span start = peek().span;
    if (accept_kw("old")) return set_span(tm::old(postfix_term()), start);
    if (accept_kw("length")) return set_span(tm::length(ident("array name")), start);
    if (accept_kw("valid")) return set_span(tm::valid(postfix_term()), start);
    if (check_kw("pre") || check_kw("post")) {
      bool is_pre = advance().text == "pre";
      std::vector<TermPtr> args;
      while (starts_atom_term()) args.push_back(postfix_term());
      auto t = std::make_shared<Term>();
      t->kind = is_pre ? Term::Kind::Pre : Term::Kind::Post;
      t->kids = std::move(args);
      t->ty = Type::bool_();
      size_t lo = is_pre ? 2 : 3, hi = is_pre ? 3 : 5;
      if (t->kids.size() < lo || t->kids.size() > hi)
        fail(ErrorKind::Syntax, from(start), fmt::format("'{}' takes {} to {} arguments", is_pre ? "pre" : "post", lo, hi));
      t->span = from(start);
      return t;
    }
    if (peek().kind == Token::Kind::UIdent) {
      std::string n = advance().text;
      std::vector<TermPtr> args;
      if (starts_atom_term()) {
        TermPtr a = postfix_term();
        if (a->kind == Term::Kind::Tuple)
          args = a->kids;
        else
          args = {a};
      }
      return set_span(tm::app(n, std::move(args)), start);
    }
    TermPtr f = postfix_term();
    if (f->kind == Term::Kind::Var && starts_atom_term()) {
      std::vector<TermPtr> args;
      while (starts_atom_term()) args.push_back((postfix_term()));
      return set_span(tm::app(f->name, std::move(args)), start);
    }
    return (f);
  }

  TermPtr postfix_term() {
    Span start = peek().span;
    TermPtr a = atom_term();
    for (;;) {
      if (accept_sym("[")) {
        TermPtr i = term();
        expect_sym("]");
        a = set_span(tm::select((a), i), start);
      } else if (check_sym(".") && peek(1).kind == Token::Kind::Ident && peek(1).text.size() > 1 &&
                 peek(1).text[0] == '_') {
        advance();
        std::string f = advance().text.substr(1);
        a = set_span(tm::field((a), f), start);
      } else {
        return a;
      }
    }
  }

  TermPtr atom_term() {
    Span start = peek().span;
    const Token &t = peek();
    if (t.kind == Token::Kind::Int) return set_span(tm::int_(std::stoll(advance().text)), start);
    if (accept_kw("true")) return set_span(tm::bool_(true), start);
    if (accept_kw("false")) return set_span(tm::bool_(false), start);
    if (accept_sym("!")) return set_span(tm::deref(ident("reference name")), start);
    if (accept_sym("[")) {
      expect_sym("]");
      return set_span(tm::app("[]", {}), start);
    }
    if (accept_sym("{")) {
      std::vector<std::string> names;
      std::vector<TermPtr> vals;
      if (!accept_sym("}")) {
        do {
          expected_.insert("state field");
          if (peek().kind != Token::Kind::Ident || peek().text.size() < 2 || peek().text[0] != '_') error();
          names.push_back(advance().text.substr(1));
          expect_sym("=");
          vals.push_back(term());
        } while (accept_sym(";"));
        expect_sym("}");
      }
      return set_span(tm::state_rec(names, vals), start);
    }
    if (accept_kw("match")) {
      TermPtr scrut = term();
      expect_kw("with");
      accept_sym("|");
      std::vector<TermCase> cases;
      do {
        PatternPtr p = pattern();
        expect_sym("->");
        cases.push_back({p, term()});
      } while (accept_sym("|"));
      expect_kw("end");
      return set_span(tm::match(scrut, std::move(cases)), start);
    }
    if (accept_sym("(")) {
      if (accept_sym(")")) return set_span(tm::unit(), start);
      TermPtr first = term();
      if (check_sym(",")) {
        std::vector<TermPtr> items{first};
        while (accept_sym(",")) items.push_back(term());
        expect_sym(")");
        return set_span(tm::tuple(items), start);
      }
      expect_sym(")");
      return first;
    }
    if (t.kind == Token::Kind::UIdent) return set_span(tm::app(advance().text, {}), start);
    expected_.insert("term");
    if (t.kind == Token::Kind::Ident && !is_keyword(t) && !is_clause_word(t))
      return set_span(tm::var(advance().text), start);
    error();
  }

  std::vector<Token> toks_;
  size_t pos_ = 0;
  Span last_;
  std::set<std::string> expected_;
};

}  // namespace

SourceProgram parse_program(std::string_view text) { return Parser(lex(text)).program(); }

TermPtr parse_term(std::string_view text) { return Parser(lex(text)).standalone_term(); }

TypePtr parse_type(std::string_view text) { return Parser(lex(text)).standalone_type(); }

}  // namespace effv
