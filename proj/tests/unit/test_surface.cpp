#include <doctest.h>

#include "surface/parser.hpp"
#include "surface/printer.hpp"
#include "support.hpp"

using namespace effv;

using namespace effv::test;

TEST_CASE("effect declaration") {
  auto p = parse_program("effect XCHG : int -> int");
  REQUIRE(p.decls.size() == 1);
  CHECK(p.decls[0].kind == Decl::Kind::Effect);
  CHECK(p.decls[0].effect->name == "XCHG");
  CHECK(type_str(p.decls[0].effect->sig) == "int -> int");
}

TEST_CASE("empty program") {
  auto p = parse_program("");
  CHECK(p.decls.empty());
  CHECK(pretty_print(p).empty());
}

TEST_CASE("protocol printing starts with its head") {
  auto p = parse_program("effect XCHG : int -> int\n(*@ protocol XCHG x :\n ensures !p = x && reply = old !p\n modifies p *)");
  std::string s = pretty_print(p);
  CHECK(s.find("(*@ protocol XCHG x :") != std::string::npos);
}

TEST_CASE("syntax errors carry location and expected tokens") {
  try {
    parse_program("let f (x : int) : int =\n  x +");
    FAIL("expected a syntax error");
  } catch (const Error &e) {
    CHECK(e.kind() == ErrorKind::Syntax);
    CHECK(e.span().line == 2);
    CHECK(e.message().find("expected one of") != std::string::npos);
  }
}

TEST_CASE("duplicate effects and stray protocols are rejected") {
  CHECK_THROWS_AS(parse_program("effect A : int\neffect A : unit"), Error);
  CHECK_THROWS_AS(parse_program("(*@ protocol B : ensures true *)"), Error);
  CHECK_THROWS_AS(parse_program("effect A : int\n(*@ protocol A : ensures true *)\n(*@ protocol A : ensures true *)"),
                  Error);
}

TEST_CASE("xchg listing shape") {
  auto p = parse_program(slurp(std::string(EFFV_TEST_DIR) + "/corpus/xchg.eff"));
  int refs = 0, effects = 0, protocols = 0, functions = 0;
  for (const auto &d : p.decls) {
    refs += d.kind == Decl::Kind::State;
    effects += d.kind == Decl::Kind::Effect;
    protocols += d.kind == Decl::Kind::Protocol;
    functions += d.kind == Decl::Kind::Function;
  }
  CHECK(refs == 1);
  CHECK(effects == 1);
  CHECK(protocols == 1);
  CHECK(functions == 2);
  const auto &server = *p.decls.back().function;
  REQUIRE(server.body->kind == Expr::Kind::Try);
  REQUIRE(server.body->handler_spec);
  CHECK(server.body->handler_spec->try_ensures.size() == 1);
  CHECK(type_str(server.body->handler_spec->returns) == "int");
}

TEST_CASE("corpus round-trips through the printer") {
  for (const auto &f : corpus_files()) {
    CAPTURE(f.string());
    auto p1 = parse_program(slurp(f));
    std::string printed = pretty_print(p1);
    SourceProgram p2;
    try {
      p2 = parse_program(printed);
    } catch (const Error &e) {
      FAIL_CHECK(e.what() << "\n" << printed);
      continue;
    }
    CHECK(program_equal(p1, p2));
    CHECK(pretty_print(p2) == printed);
  }
}

TEST_CASE("terms") {
  CHECK(term_str(parse_term("a && b -> c || d")) == "a && b -> c || d");
  CHECK(term_str(parse_term("forall x : int, y. x < y -> f x y")) == "forall x : int, y : int. x < y -> f x y");
  CHECK(term_str(parse_term("old !p + bits[i]")) == "old !p + bits[i]");
  CHECK(term_str(parse_term("match s with | [] -> true | x :: r -> p x end")) ==
        "match s with | [] -> true | x :: r -> p x end");
  CHECK(term_str(parse_term("N (1, E, E)")) == "N (1, E, E)");
}

namespace {

// Direct transcription of the splitting recursion.
EffectSig split_ref(const TypePtr &t) {
  if (t->kind != Type::Kind::Arrow) return {{Type::unit()}, t};
  const TypePtr &rest = t->args[1];
  if (rest->kind != Type::Kind::Arrow) return {{t->args[0]}, rest};
  EffectSig s = split_ref(rest);
  s.args.insert(s.args.begin(), t->args[0]);
  return s;
}

// Every type of exactly `size` constructors over int, bool, unit, list, tuple and arrow.
std::vector<TypePtr> types_of_size(int size) {
  std::vector<TypePtr> out;
  if (size == 1) return {Type::int_(), Type::bool_(), Type::unit()};
  for (const auto &t : types_of_size(size - 1)) out.push_back(Type::list(t));
  for (int l = 1; l < size - 1; ++l)
    for (const auto &a : types_of_size(l))
      for (const auto &b : types_of_size(size - 1 - l)) {
        out.push_back(Type::arrow(a, b));
        out.push_back(Type::tuple({a, b}));
      }
  return out;
}

}  // namespace

TEST_CASE("effect_type_split matches its recursion on every type up to size 4") {
  std::size_t n = 0;
  for (int size = 1; size <= 4; ++size)
    for (const auto &t : types_of_size(size)) {
      CAPTURE(type_str(t));
      EffectSig got = effect_type_split(t), want = split_ref(t);
      REQUIRE(got.args.size() == want.args.size());
      for (size_t i = 0; i < got.args.size(); ++i) CHECK(type_equal(got.args[i], want.args[i]));
      CHECK(type_equal(got.reply, want.reply));
      ++n;
    }
  CHECK(n == 84);
  auto s = effect_type_split(Type::arrow(Type::int_(), Type::arrow(Type::bool_(), Type::unit())));
  CHECK(s.args.size() == 2);
  CHECK(type_str(s.reply) == "unit");
}
