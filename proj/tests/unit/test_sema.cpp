#include <doctest.h>

#include "sema/sema.hpp"
#include "surface/parser.hpp"
#include "support.hpp"

using namespace effv;
using namespace effv::test;

namespace {

const Expr *find_expr(const ExprPtr &e, Expr::Kind k) {
  if (!e) return nullptr;
  if (e->kind == k) return e.get();
  for (const auto &c : e->kids)
    if (auto r = find_expr(c, k)) return r;
  for (const auto &c : e->cases)
    if (auto r = find_expr(c.body, k)) return r;
  for (const auto &b : e->branches)
    if (auto r = find_expr(b.body, k)) return r;
  if (e->value_branch) return find_expr(e->value_branch->body, k);
  return nullptr;
}

const FunctionDecl &function(const TypedProgram &tp, const std::string &name) {
  for (const auto &d : tp.program.decls)
    if (d.kind == Decl::Kind::Function && d.function->name == name) return *d.function;
  throw std::runtime_error("no function " + name);
}

ErrorKind error_of(const std::string &src) {
  try {
    analyze(parse_program(src));
  } catch (const Error &e) {
    return e.kind();
  }
  return ErrorKind::Internal;
}

}  // namespace

TEST_CASE("every corpus program is accepted") {
  for (const auto &f : corpus_files()) {
    CAPTURE(f.filename().string());
    CHECK_NOTHROW(analyze(parse_program(slurp(f))));
  }
}

TEST_CASE("xchg: perform and continue are typed at the reply type") {
  auto tp = analyze(parse_program(corpus("xchg")));
  auto perform = find_expr(function(tp, "xchg").body, Expr::Kind::Perform);
  REQUIRE(perform);
  CHECK(type_str(perform->ty) == "int");
  auto cont = find_expr(function(tp, "server").body, Expr::Kind::Continue);
  REQUIRE(cont);
  CHECK(type_str(cont->ty) == "int");
  CHECK(tp.effect_rows.at("xchg") == std::set<std::string>{"XCHG"});
  CHECK(tp.effect_rows.at("server").empty());
}

TEST_CASE("state models") {
  auto x = analyze(parse_program(corpus("xchg")));
  REQUIRE(x.state.vars.size() == 1);
  CHECK(x.state.vars[0].name == "p");
  CHECK(type_str(x.state.vars[0].ty) == "int ref");

  auto kr = analyze(parse_program(corpus("koda_ruskey")));
  REQUIRE(kr.state.vars.size() == 1);
  CHECK(kr.state.vars[0].name == "bits");
  CHECK(type_str(kr.state.vars[0].ty) == "color array");

  CHECK(analyze(parse_program("let f (x : int) : int = x + 1")).state.vars.empty());
}

TEST_CASE("returns annotation is checked") {
  CHECK(error_of(R"(
effect E : int
(*@ protocol E : ensures true *)
let f () : bool =
  try perform E = 0 with
  | effect E k -> continue k 1
  (*@ try_ensures true returns int *)
)") == ErrorKind::Type);
}

TEST_CASE("escaping effects must be declared") {
  auto src = corpus("koda_ruskey");
  auto pos = src.rfind("performs Yield");
  REQUIRE(pos != std::string::npos);
  src.erase(pos, std::string("performs Yield").size());
  CHECK(error_of(src) == ErrorKind::Effect);
  CHECK(error_of(R"(
effect E : int
(*@ protocol E : ensures true *)
let f () : int = perform E
)") == ErrorKind::Effect);
}

TEST_CASE("continuations are second class") {
  CHECK(error_of(R"(
effect E : int
(*@ protocol E : ensures true *)
let f () : int =
  try perform E with
  | effect E k -> let j = k in 0
  (*@ try_ensures true returns int *)
)") == ErrorKind::Type);
  CHECK(error_of("let f () : int = continue k 1") == ErrorKind::Type);
}

TEST_CASE("hidden state and reserved names are rejected") {
  CHECK(error_of("let f () : int = let r = ref 0 in 1") == ErrorKind::Semantic);
  CHECK(error_of("let pre_x () : int = 1") == ErrorKind::Semantic);
  CHECK(error_of("let f (a__b : int) : int = a__b") == ErrorKind::Semantic);
}

TEST_CASE("perform needs a protocol in scope") {
  CHECK(error_of(R"(
effect E : int
let f () : int = perform E
(*@ performs E *)
)") == ErrorKind::Semantic);
}

TEST_CASE("protocol preconditions may not mention reply or old") {
  CHECK(error_of(R"(
effect E : int
(*@ protocol E : requires reply = 0 *)
)") == ErrorKind::Semantic);
}

TEST_CASE("local protocols capture the parameters they mention") {
  auto tp = analyze(parse_program(corpus("koda_ruskey")));
  bool found = false;
  std::function<void(const ExprPtr &)> walk = [&](const ExprPtr &e) {
    if (!e) return;
    if (e->kind == Expr::Kind::Let && e->spec)
      for (const auto &pr : e->spec->protocols) {
        found = true;
        std::set<std::string> names;
        for (const auto &[n, _] : pr->captured) names.insert(n);
        CHECK(names == std::set<std::string>{"baton", "f"});
      }
    for (const auto &k : e->kids) walk(k);
  };
  walk(function(tp, "koda_ruskey").body);
  CHECK(found);
}
