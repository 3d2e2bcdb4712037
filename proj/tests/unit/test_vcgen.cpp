#include <doctest.h>

#include <map>
#include <random>
#include <set>

#include "sema/sema.hpp"
#include "surface/parser.hpp"
#include "support.hpp"
#include "translate/translate.hpp"
#include "vcgen/vcgen.hpp"

using namespace effv;
using namespace effv::test;

namespace {

struct Gen {
  Translation t;
  std::vector<VC> vcs;
};

Gen gen(const std::string &src) {
  Gen g{translate(analyze(parse_program(src))), {}};
  g.vcs = gen_vcs(g.t.ir);
  return g;
}

std::vector<const VC *> nontrivial_of(const std::vector<VC> &vcs, const std::string &routine) {
  std::vector<const VC *> out;
  for (const auto &vc : vcs)
    if (!vc.trivial && vc.routine == routine) out.push_back(&vc);
  return out;
}

// Small evaluator for closed integer/boolean terms, independent of the simplifier.
std::int64_t ev(const TermPtr &t) {
  switch (t->kind) {
    case Term::Kind::Int: return t->ival;
    case Term::Kind::Bool: return t->bval;
    case Term::Kind::Not: return !ev(t->kids[0]);
    case Term::Kind::Neg: return -ev(t->kids[0]);
    case Term::Kind::Ite: return ev(t->kids[0]) ? ev(t->kids[1]) : ev(t->kids[2]);
    case Term::Kind::Bin: {
      std::int64_t a = ev(t->kids[0]), b = ev(t->kids[1]);
      switch (t->op) {
        case BinOp::Add: return a + b;
        case BinOp::Sub: return a - b;
        case BinOp::Mul: return a * b;
        case BinOp::Eq: return a == b;
        case BinOp::Neq: return a != b;
        case BinOp::Lt: return a < b;
        case BinOp::Le: return a <= b;
        case BinOp::Gt: return a > b;
        case BinOp::Ge: return a >= b;
        case BinOp::And: return a && b;
        case BinOp::Or: return a || b;
        case BinOp::Implies: return !a || b;
        case BinOp::Iff: return a == b;
        default: break;
      }
      break;
    }
    default: break;
  }
  throw std::runtime_error("unexpected term " + term_str(t));
}

TermPtr random_int_term(std::mt19937_64 &rng, int depth);

TermPtr random_bool_term(std::mt19937_64 &rng, int depth) {
  int c = depth <= 0 ? 0 : static_cast<int>(rng() % 5);
  switch (c) {
    case 0: return tm::bool_(rng() & 1);
    case 1: return tm::not_(random_bool_term(rng, depth - 1));
    case 2: {
      static const BinOp ops[] = {BinOp::And, BinOp::Or, BinOp::Implies, BinOp::Iff};
      return tm::bin(ops[rng() % 4], random_bool_term(rng, depth - 1), random_bool_term(rng, depth - 1), Type::bool_());
    }
    case 3: {
      static const BinOp ops[] = {BinOp::Eq, BinOp::Neq, BinOp::Lt, BinOp::Le, BinOp::Gt, BinOp::Ge};
      return tm::bin(ops[rng() % 6], random_int_term(rng, depth - 1), random_int_term(rng, depth - 1), Type::bool_());
    }
    default:
      return tm::ite(random_bool_term(rng, depth - 1), random_bool_term(rng, depth - 1), random_bool_term(rng, depth - 1));
  }
}

TermPtr random_int_term(std::mt19937_64 &rng, int depth) {
  int c = depth <= 0 ? 0 : static_cast<int>(rng() % 4);
  switch (c) {
    case 0: return tm::int_(static_cast<std::int64_t>(rng() % 11) - 5);
    case 1: return tm::neg(random_int_term(rng, depth - 1));
    case 2: {
      static const BinOp ops[] = {BinOp::Add, BinOp::Sub, BinOp::Mul};
      return tm::bin(ops[rng() % 3], random_int_term(rng, depth - 1), random_int_term(rng, depth - 1), Type::int_());
    }
    default:
      return tm::ite(random_bool_term(rng, depth - 1), random_int_term(rng, depth - 1), random_int_term(rng, depth - 1));
  }
}

}  // namespace

TEST_CASE("xchg yields one client and four server obligations") {
  auto g = gen(corpus("xchg"));
  auto client = nontrivial_of(g.vcs, "xchg");
  auto server = nontrivial_of(g.vcs, "server");
  REQUIRE(client.size() == 1);
  CHECK(client[0]->kind == Obligation::Postcondition);
  REQUIRE(server.size() == 4);
  std::set<Obligation> kinds;
  for (const auto *vc : server) kinds.insert(vc->kind);
  CHECK(kinds == std::set<Obligation>{Obligation::ContinuationValidity, Obligation::ContinuationPrecondition,
                                      Obligation::HandlerInvariantNormal, Obligation::HandlerInvariantExceptional});
  CHECK(count_nontrivial(g.vcs) == 5);
}

TEST_CASE("a trivially true postcondition is flagged and not counted") {
  auto g = gen("let f (x : int) : int = x\n(*@ ensures true *)");
  REQUIRE_FALSE(g.vcs.empty());
  for (const auto &vc : g.vcs) {
    CHECK(vc.trivial);
    CHECK(is_true(vc.goal));
  }
  CHECK(count_nontrivial(g.vcs) == 0);
}

TEST_CASE("empty program has no VCs") {
  auto g = gen("");
  CHECK(g.vcs.empty());
}

TEST_CASE("every corpus goal is closed and ids are unique") {
  for (const auto &f : corpus_files()) {
    CAPTURE(f.filename().string());
    auto g = gen(slurp(f));
    std::set<std::string> ids;
    for (const auto &vc : g.vcs) {
      CHECK(free_vars(vc.goal).empty());
      CHECK(ids.insert(vc.id).second);
      CHECK_FALSE(vc.routine.empty());
    }
  }
}

TEST_CASE("VC generation is deterministic") {
  for (const auto &f : corpus_files()) {
    std::string src = slurp(f);
    CHECK(print_vcs(gen(src).vcs, true) == print_vcs(gen(src).vcs, true));
  }
}

TEST_CASE("VC kinds per obligation site") {
  SUBCASE("call precondition") {
    auto g = gen("let f (x : int) : int = x\n(*@ requires x > 0 *)\nlet g () : int = f 0");
    auto vcs = nontrivial_of(g.vcs, "g");
    REQUIRE(vcs.size() == 1);
    CHECK(vcs[0]->kind == Obligation::PreconditionAtCall);
  }
  SUBCASE("division by a possibly zero divisor") {
    auto g = gen("let f (x : int) (y : int) : int = x / y");
    auto vcs = nontrivial_of(g.vcs, "f");
    REQUIRE(vcs.size() == 1);
    CHECK(vcs[0]->kind == Obligation::PreconditionAtCall);
  }
  SUBCASE("variant") {
    auto g = gen("let rec f (n : int) : int = if n <= 0 then 0 else f (n - 1)\n(*@ variant n *)");
    std::set<Obligation> kinds;
    for (const auto *vc : nontrivial_of(g.vcs, "f")) kinds.insert(vc->kind);
    CHECK(kinds.count(Obligation::VariantDecrease));
  }
  SUBCASE("writes frame") {
    auto g = gen("let x : int ref = ref 0\nlet y : int ref = ref 0\n"
                 "let f () : unit = y := 1\n(*@ modifies x *)");
    std::set<Obligation> kinds;
    for (const auto *vc : nontrivial_of(g.vcs, "f")) kinds.insert(vc->kind);
    CHECK(kinds.count(Obligation::WritesFrame));
  }
  SUBCASE("undeclared escaping effect at a perform") {
    auto g = gen("effect E : unit\n(*@ protocol E : requires false *)\nlet f () : unit = perform E\n(*@ performs E *)");
    std::set<Obligation> kinds;
    for (const auto *vc : nontrivial_of(g.vcs, "f")) kinds.insert(vc->kind);
    CHECK(kinds.count(Obligation::PreconditionAtCall));
  }
}

TEST_CASE("listing format") {
  auto g = gen(corpus("xchg"));
  std::string out = print_vcs(g.vcs, false);
  CHECK(out.find("[handler-invariant-normal] server") != std::string::npos);
  CHECK(out.find("(trivial)") == std::string::npos);
  CHECK(print_vcs(g.vcs, true).find("(trivial)") != std::string::npos);
}

TEST_CASE("simplifier preserves the value of closed terms (property, 300 random terms)") {
  std::mt19937_64 rng(7);
  IrProgram empty;
  for (int i = 0; i < 300; ++i) {
    TermPtr t = random_bool_term(rng, 4);
    CAPTURE(term_str(t));
    TermPtr s = simplify_term(t, empty);
    CHECK(ev(s) == ev(t));
  }
}

TEST_CASE("simplifier inlines lets and folds constructors") {
  IrProgram empty;
  auto t = tm::let("a", tm::int_(2), tm::bin(BinOp::Eq, tm::var("a", Type::int_()), tm::int_(2), Type::bool_()));
  CHECK(is_true(simplify_term(t, empty)));
  auto tup = tm::tuple({tm::int_(1), tm::int_(2)});
  auto m = tm::match(tup, {{pat_tuple({pat_var("p"), pat_var("q")}),
                            tm::bin(BinOp::Lt, tm::var("p", Type::int_()), tm::var("q", Type::int_()), Type::bool_())}},
                     Type::bool_());
  CHECK(is_true(simplify_term(m, empty)));
}
