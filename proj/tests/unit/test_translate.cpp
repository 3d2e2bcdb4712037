#include <doctest.h>

#include <functional>
#include <map>

#include "sema/sema.hpp"
#include "surface/parser.hpp"
#include "support.hpp"
#include "translate/translate.hpp"

using namespace effv;
using namespace effv::test;

namespace {

Translation tr(const std::string &src) { return translate(analyze(parse_program(src))); }

const IrDecl &decl(const IrProgram &p, const std::string &name) {
  for (const auto &d : p.decls)
    if (d.name == name) return d;
  throw std::runtime_error("no decl " + name);
}

const Routine &routine(const IrProgram &p, const std::string &name) { return *decl(p, name).routine; }

void each_expr(const IrExprPtr &e, const std::function<void(const IrExpr &)> &f) {
  if (!e) return;
  f(*e);
  if (e->routine) each_expr(e->routine->body, f);
  for (const auto &k : e->kids) each_expr(k, f);
  for (const auto &c : e->cases) each_expr(c.body, f);
  for (const auto &h : e->handlers) each_expr(h.body, f);
  if (e->value_branch) each_expr(e->value_branch->second, f);
}

std::vector<const Routine *> nested_routines(const Routine &r) {
  std::vector<const Routine *> out;
  each_expr(r.body, [&](const IrExpr &e) {
    if (e.kind == IrExpr::Kind::LetRoutine) out.push_back(e.routine.get());
  });
  return out;
}

// Truth value of a term built from boolean variables, literals and /\.
bool eval_bool(const TermPtr &t, const std::map<std::string, bool> &env) {
  switch (t->kind) {
    case Term::Kind::Bool: return is_true(t);
    case Term::Kind::Var: return env.at(t->name);
    case Term::Kind::Bin:
      REQUIRE(t->op == BinOp::And);
      return eval_bool(t->kids[0], env) && eval_bool(t->kids[1], env);
    default: FAIL("unexpected term " << term_str(t)); return false;
  }
}

const char *kThreeVars = R"(
let a : int ref = ref 0
let b : int ref = ref 0
let c : int array = Array.make 3 0
)";

}  // namespace

TEST_CASE("combine_terms agrees with conjunction for every list up to length 4") {
  const std::vector<std::string> atoms{"x", "y", "true", "false"};
  for (size_t len = 0; len <= 4; ++len) {
    size_t total = 1;
    for (size_t i = 0; i < len; ++i) total *= atoms.size();
    for (size_t code = 0; code < total; ++code) {
      std::vector<TermPtr> ts;
      for (size_t i = 0, c = code; i < len; ++i, c /= atoms.size()) {
        const std::string &a = atoms[c % atoms.size()];
        ts.push_back(a == "true" ? tm::true_() : a == "false" ? tm::false_() : tm::var(a, Type::bool_()));
      }
      TermPtr s = combine_terms(ts);
      for (int bits = 0; bits < 4; ++bits) {
        std::map<std::string, bool> env{{"x", bits & 1}, {"y", (bits & 2) != 0}};
        bool expect = true;
        for (const auto &t : ts) expect = expect && eval_bool(t, env);
        CHECK(eval_bool(s, env) == expect);
      }
    }
  }
  CHECK(is_true(combine_terms({})));
}

TEST_CASE("unmodified_state equates exactly the listed fields") {
  auto model = analyze(parse_program(kThreeVars)).state;
  const std::vector<std::string> names{"a", "b", "c"};
  for (int mask = 0; mask < 8; ++mask) {
    std::vector<std::string> vars;
    for (int i = 0; i < 3; ++i)
      if (mask & (1 << i)) vars.push_back(names[static_cast<size_t>(i)]);
    TermPtr o = unmodified_state(vars, model);
    if (vars.empty()) {
      CHECK(is_true(o));
      continue;
    }
    std::vector<std::string> seen;
    std::function<void(const TermPtr &)> walk = [&](const TermPtr &t) {
      if (t->kind == Term::Kind::Bin && t->op == BinOp::And) {
        walk(t->kids[0]);
        walk(t->kids[1]);
        return;
      }
      REQUIRE(t->kind == Term::Kind::Bin);
      REQUIRE(t->op == BinOp::Eq);
      const TermPtr &l = t->kids[0], &r = t->kids[1];
      REQUIRE(l->kind == Term::Kind::Field);
      REQUIRE(r->kind == Term::Kind::Field);
      CHECK(l->name == r->name);
      CHECK(l->kids[0]->name == "state");
      CHECK(r->kids[0]->name == "state_old");
      CHECK(l->ty);
      seen.push_back(l->name);
    };
    walk(o);
    CHECK(seen == vars);
  }
}

TEST_CASE("to_state_form reads the right state") {
  auto model = analyze(parse_program(kThreeVars)).state;
  TermPtr cur = tm::var("state", Type::state()), old = tm::var("old_state", Type::state());
  TermPtr t = tm::eq(tm::deref("a", Type::int_()), tm::old(tm::deref("a", Type::int_())));
  CHECK(term_str(to_state_form(t, model, cur, old)) == "state._a = old_state._a");
  CHECK_THROWS_AS(to_state_form(t, model, cur, nullptr), Error);

  TermPtr arr = tm::select(tm::var("c", Type::array(Type::int_())), tm::int_(0), Type::int_());
  CHECK(term_str(to_state_form(arr, model, cur, old)) == "state._c[0]");

  // A bound name shadowing an array is left alone.
  TermPtr q = tm::forall({{"c", Type::int_()}}, tm::eq(tm::var("c", Type::int_()), tm::int_(1)));
  CHECK(term_str(to_state_form(q, model, cur, old)) == term_str(q));

  // The full current-state record collapses back to the state value.
  TermPtr s = current_state_term(model);
  CHECK(term_str(to_state_form(s, model, cur, old)) == "state");
  CHECK(term_str(to_state_form(tm::old(s), model, cur, old)) == "old_state");
}

TEST_CASE("ir_type removes every arrow") {
  std::vector<TypePtr> base{Type::int_(), Type::bool_(), Type::unit()};
  std::function<bool(const TypePtr &)> has_arrow = [&](const TypePtr &t) {
    if (t->kind == Type::Kind::Arrow) return true;
    for (const auto &a : t->args)
      if (has_arrow(a)) return true;
    return false;
  };
  std::vector<TypePtr> all = base;
  for (int depth = 0; depth < 2; ++depth) {
    std::vector<TypePtr> next = all;
    for (const auto &a : all)
      for (const auto &b : base) {
        next.push_back(Type::arrow(a, b));
        next.push_back(Type::list(Type::arrow(b, a)));
        next.push_back(Type::tuple({a, b}));
      }
    all = next;
  }
  for (const auto &t : all) {
    TypePtr u = ir_type(t);
    CHECK_FALSE(has_arrow(u));
    if (!has_arrow(t)) CHECK(type_equal(t, u));
  }
  CHECK(type_str(ir_type(Type::arrow(Type::int_(), Type::arrow(Type::int_(), Type::bool_())))) ==
        "lambda int (lambda int bool)");
}

TEST_CASE("bind_args binds zero, one or several names") {
  TermPtr body = tm::var("x", Type::int_());
  TermPtr arg = tm::var("arg", Type::int_());
  CHECK(bind_args({}, arg, body) == body);
  CHECK(term_str(bind_args({{"x", Type::int_()}}, arg, body)) == "let x = arg in x");
  TermPtr pair = tm::var("arg", Type::tuple({Type::int_(), Type::int_()}));
  TermPtr m = bind_args({{"x", Type::int_()}, {"y", Type::int_()}}, pair, body);
  CHECK(m->kind == Term::Kind::Match);
  CHECK(term_str(m) == "match arg with | (x, y) -> x end");
}

TEST_CASE("effects become exceptions carrying their arguments") {
  auto t = tr(R"(
effect A : int -> bool -> int
effect B : unit
(*@ protocol A x y : ensures true *)
(*@ protocol B : ensures true *)
)");
  const IrDecl &a = decl(t.ir, "A");
  CHECK(a.kind == IrDecl::Kind::Exception);
  REQUIRE(a.exn_args.size() == 2);
  CHECK(type_str(a.exn_args[0]) == "int");
  CHECK(type_str(a.exn_args[1]) == "bool");
  CHECK(type_str(t.env.sigma.at("A").reply) == "int");
  CHECK(type_str(decl(t.ir, "B").exn_args[0]) == "unit");
  const Routine &pa = routine(t.ir, "perform_A");
  REQUIRE(pa.params.size() == 1);
  CHECK(type_str(pa.params[0].ty) == "int * bool");
  CHECK(term_str(t.ir.logic.at("pre_A")->body) == "match arg with | (x, y) -> true end");
}

TEST_CASE("xchg protocol yields pre, post and an abstract perform") {
  auto t = translate(analyze(parse_program(corpus("xchg"))));
  const auto &pre = *t.ir.logic.at("pre_XCHG");
  const auto &post = *t.ir.logic.at("post_XCHG");
  REQUIRE(pre.params.size() == 2);
  CHECK(pre.params[0].first == "arg");
  CHECK(pre.params[1].first == "state");
  REQUIRE(post.params.size() == 4);
  CHECK(post.params[1].first == "old_state");
  CHECK(post.params[3].first == "reply");
  CHECK(term_str(post.body) == "let x = arg in state._p = x && reply = old_state._p");

  const Routine &perf = routine(t.ir, "perform_XCHG");
  CHECK_FALSE(perf.body);
  CHECK(term_str(perf.requires_[0]) == "pre_XCHG arg {_p = !p}");
  CHECK(term_str(perf.ensures[0]) == "post_XCHG arg (old {_p = !p}) {_p = !p} result");
  REQUIRE(perf.raises.size() == 1);
  CHECK(perf.raises[0].exn == "XCHG");
  CHECK(perf.writes == std::vector<std::string>{"p"});

  const Routine &x = routine(t.ir, "xchg");
  REQUIRE(x.raises.size() == 1);
  CHECK(term_str(x.raises[0].cond) == "pre_XCHG arg {_p = !p}");
  CHECK(x.writes == std::vector<std::string>{"p"});
}

TEST_CASE("xchg server becomes a handler routine with a continuation generator") {
  auto t = translate(analyze(parse_program(corpus("xchg"))));
  const Routine &server = routine(t.ir, "server");
  CHECK(server.writes == std::vector<std::string>{"p"});
  auto inner = nested_routines(server);
  REQUIRE(inner.size() == 2);
  const Routine &h = *inner[0];
  CHECK(h.name == "handler");
  CHECK(h.role == Routine::Role::Handler);
  CHECK(h.params.empty());
  CHECK(h.writes == std::vector<std::string>{"p"});
  CHECK(term_str(h.ensures[0]) == "!p = old !p && result = 42");
  const Routine &gen = *inner[1];
  CHECK(gen.name == "gen_k");
  CHECK(gen.role == Routine::Role::Generator);
  CHECK_FALSE(gen.body);
  CHECK(type_str(gen.ret) == "continuation int int");
  REQUIRE(gen.ensures.size() == 3);
  CHECK(term_str(gen.ensures[0]) == "valid result");
  CHECK(term_str(gen.ensures[1]).find("post_XCHG n eff_state state arg") != std::string::npos);

  int tries = 0, continues = 0;
  each_expr(server.body, [&](const IrExpr &e) {
    if (e.kind == IrExpr::Kind::Try) {
      ++tries;
      REQUIRE(e.handlers.size() == 1);
      CHECK(e.handlers[0].exn == "XCHG");
      CHECK(e.handlers[0].params.size() == 1);
    }
    if (e.kind == IrExpr::Kind::Continue) {
      ++continues;
      CHECK(e.writes == std::vector<std::string>{"p"});
    }
  });
  CHECK(tries == 1);
  CHECK(continues == 1);
}

TEST_CASE("continue may write what the rest of the handler writes") {
  auto t = tr(R"(
let p : int ref = ref 0
let q : int ref = ref 0
effect E : int
(*@ protocol E : ensures true modifies p *)
let f () : int =
  try perform E with
  | effect E k -> let v = continue k 1 in q := 2; v
  (*@ try_ensures true returns int *)
)");
  const Routine &f = routine(t.ir, "f");
  each_expr(f.body, [&](const IrExpr &e) {
    if (e.kind == IrExpr::Kind::Continue) CHECK(e.writes == std::vector<std::string>{"p", "q"});
  });
  CHECK(f.writes == std::vector<std::string>{"p", "q"});
  CHECK(wf_check(t.ir).empty());
}

TEST_CASE("recursive functions get the fixpoint of their writes") {
  auto t = tr(R"(
let x : int ref = ref 0
let y : int ref = ref 0
let rec f (n : int) : unit =
  if n > 0 then (y := 1; f (n - 1)) else x := 1
(*@ variant n *)
let g () : unit = f 3
)");
  CHECK(routine(t.ir, "f").writes == std::vector<std::string>{"x", "y"});
  CHECK(routine(t.ir, "g").writes == std::vector<std::string>{"x", "y"});
  CHECK(wf_check(t.ir).empty());
}

TEST_CASE("lambdas are defunctionalized into a routine and a generator") {
  auto t = translate(analyze(parse_program(corpus("references"))));
  const Routine &env = routine(t.ir, "create_env");
  CHECK(type_str(env.ret) == "lambda int int");
  std::vector<std::string> names;
  for (const auto *r : nested_routines(env)) names.push_back(r->name);
  CHECK(std::count(names.begin(), names.end(), "fun__1") == 1);
  CHECK(std::count(names.begin(), names.end(), "gen_fun__1") == 1);
  int applies = 0;
  each_expr(routine(t.ir, "main").body, [&](const IrExpr &e) { applies += e.kind == IrExpr::Kind::Apply; });
  CHECK(applies == 1);
}

TEST_CASE("local protocols take their captured variables as parameters") {
  auto t = translate(analyze(parse_program(corpus("koda_ruskey"))));
  const Routine &perf = routine(t.ir, "perform_Yield");
  REQUIRE(perf.params.size() == 3);
  CHECK(perf.params[0].ghost);
  CHECK(perf.params[1].ghost);
  CHECK_FALSE(perf.params[2].ghost);
  CHECK(t.ir.logic.at("pre_Yield")->params.size() == 4);
  CHECK(t.ir.logic.at("post_Yield")->params.size() == 6);
  const Routine &kr = routine(t.ir, "koda_ruskey");
  REQUIRE(kr.raises.size() == 1);
  CHECK(term_str(kr.raises[0].cond).find("pre_Yield baton f arg") != std::string::npos);
  CHECK(kr.writes == std::vector<std::string>{"bits"});
}

TEST_CASE("every corpus translation is well formed") {
  for (const auto &f : corpus_files()) {
    CAPTURE(f.filename().string());
    auto t = translate(analyze(parse_program(slurp(f))));
    auto diags = wf_check(t.ir);
    for (const auto &d : diags) MESSAGE(d.routine << ": " << d.message);
    CHECK(diags.empty());
  }
}

TEST_CASE("the well-formedness check catches broken output") {
  auto t = translate(analyze(parse_program(corpus("xchg"))));
  SUBCASE("post with four arguments") {
    for (auto &d : t.ir.decls)
      if (d.name == "perform_XCHG") {
        auto r = std::make_shared<Routine>(*d.routine);
        TermPtr s = current_state_term(t.ir.state);
        auto bad = std::make_shared<Term>(*tm::post(tm::var("arg", Type::int_()), tm::var("arg", Type::int_()), s, s,
                                                    tm::var("result", Type::int_())));
        bad->kids.pop_back();
        r->ensures = {bad};
        d.routine = r;
      }
    auto diags = wf_check(t.ir);
    REQUIRE(diags.size() == 1);
    CHECK(diags[0].message.find("expected 5") != std::string::npos);
  }
  SUBCASE("a write missing from the writes clause") {
    for (auto &d : t.ir.decls)
      if (d.name == "server") {
        auto r = std::make_shared<Routine>(*d.routine);
        r->writes.clear();
        d.routine = r;
      }
    auto diags = wf_check(t.ir);
    REQUIRE(diags.size() == 1);
    CHECK(diags[0].message.find("outside its writes clause") != std::string::npos);
  }
  SUBCASE("an arrow type left behind") {
    for (auto &d : t.ir.decls)
      if (d.name == "xchg") {
        auto r = std::make_shared<Routine>(*d.routine);
        r->ret = Type::arrow(Type::int_(), Type::int_());
        d.routine = r;
      }
    CHECK_FALSE(wf_check(t.ir).empty());
  }
}

TEST_CASE("every rule-bearing construct leaves one trace entry") {
  for (const auto &f : corpus_files()) {
    CAPTURE(f.filename().string());
    auto tp = analyze(parse_program(slurp(f)));
    std::map<std::string, int> expect;
    std::function<void(const ExprPtr &)> walk = [&](const ExprPtr &e) {
      if (!e) return;
      switch (e->kind) {
        case Expr::Kind::Let: ++expect["TLetIn"]; break;
        case Expr::Kind::Fun: ++expect["TFun"]; break;
        case Expr::Kind::App: ++expect["TApp*"]; break;
        case Expr::Kind::Perform: ++expect["TPerform"]; break;
        case Expr::Kind::Try: ++expect["TTry"]; break;
        case Expr::Kind::If: ++expect["TIf"]; break;
        case Expr::Kind::Seq: ++expect["TSeq"]; break;
        case Expr::Kind::Match: ++expect["TMatch"]; break;
        default: break;
      }
      for (const auto &k : e->kids) walk(k);
      for (const auto &c : e->cases) walk(c.body);
      for (const auto &b : e->branches) walk(b.body);
      if (e->value_branch) walk(e->value_branch->body);
    };
    for (const auto &d : tp.program.decls) {
      if (d.kind == Decl::Kind::Function) {
        ++expect["TLet"];
        walk(d.function->body);
      }
      if (d.kind == Decl::Kind::Effect) ++expect["TEffect"];
    }
    std::map<std::string, int> got;
    for (const auto &e : translate(tp).trace.entries) {
      std::string r = e.rule == "TApp" || e.rule == "TAppDefun" ? "TApp*" : e.rule;
      ++got[r];
    }
    for (const auto &[rule, n] : expect) {
      CAPTURE(rule);
      CHECK(got[rule] == n);
    }
  }
  auto empty = translate(analyze(parse_program("")));
  CHECK(empty.trace.entries.at(0).rule == "TEmpty");
  CHECK(print_ir(empty.ir).empty());
}
