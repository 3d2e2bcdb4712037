#include <doctest.h>

#include <chrono>

#include "sema/sema.hpp"
#include "smt/smt.hpp"
#include "support.hpp"
#include "surface/parser.hpp"
#include "translate/translate.hpp"

using namespace effv;
using namespace effv::test;

namespace {

struct Loaded {
  Translation t;
  std::vector<VC> vcs;
};

Loaded load(const std::string &src) {
  Loaded l{translate(analyze(parse_program(src))), {}};
  l.vcs = gen_vcs(l.t.ir);
  return l;
}

const VC &find_vc(const Loaded &l, Obligation kind, const std::string &routine) {
  for (const auto &vc : l.vcs)
    if (vc.kind == kind && vc.routine == routine && !vc.trivial) return vc;
  throw std::runtime_error("no such VC");
}

SolverConfig z3(double timeout = 20) {
  SolverConfig c;
  c.path = "/usr/local/bin/z3";
  c.timeout = timeout;
  return c;
}

SolverConfig shell(const std::string &script) {
  SolverConfig c;
  c.name = "custom";
  c.path = "/bin/sh";
  c.args = {"-c", script};
  c.timeout = 5;
  return c;
}

// A non-trivial VC whose goal is a closed arithmetic fact.
VC arith_vc(const std::string &id, bool holds) {
  VC vc;
  vc.id = id;
  vc.routine = "r";
  vc.goal = tm::bin(BinOp::Eq, tm::bin(BinOp::Add, tm::int_(2), tm::int_(2), Type::int_()), tm::int_(holds ? 4 : 5),
                    Type::bool_());
  return vc;
}

}  // namespace

TEST_CASE("xchg continuation-precondition script") {
  auto l = load(corpus("xchg"));
  const VC &vc = find_vc(l, Obligation::ContinuationPrecondition, "server");
  std::string s = emit_smtlib(vc, l.t.ir);
  CHECK(s.rfind("; vc " + vc.id + " [continuation-precondition] server", 0) == 0);
  CHECK(s.find("(set-logic ALL)") != std::string::npos);
  CHECK(s.find("(declare-fun pre_Int (Clo Int State) Bool)") != std::string::npos);
  CHECK(s.find("(declare-fun post_Int_Int (Clo Int State State Int) Bool)") != std::string::npos);
  CHECK(s.find("(assert (not ") != std::string::npos);
  CHECK(s.find("(check-sat)") != std::string::npos);
  CHECK(emit_smtlib(vc, l.t.ir) == s);

  auto r = discharge({vc}, l.t.ir, {z3()});
  REQUIRE(r.size() == 1);
  CHECK(r[0].status == SolverStatus::Valid);
  CHECK(r[0].solver == "z3");
}

TEST_CASE("scripts are accepted by z3 across the corpus") {
  for (const auto &f : corpus_files()) {
    CAPTURE(f.filename().string());
    auto l = load(slurp(f));
    for (const auto &vc : l.vcs) {
      if (vc.trivial) continue;
      CAPTURE(vc.id);
      auto r = discharge({vc}, l.t.ir, {z3(2)});
      CHECK(r[0].status != SolverStatus::SolverError);
      CHECK(r[0].detail.find("(error") == std::string::npos);
    }
  }
}

TEST_CASE("Koda-Ruskey arrays are sorted over the color type") {
  auto l = load(corpus("koda_ruskey"));
  bool seen = false;
  for (const auto &vc : l.vcs)
    if (!vc.trivial) seen |= emit_smtlib(vc, l.t.ir).find("(Array Int t_color)") != std::string::npos;
  CHECK(seen);
}

TEST_CASE("discharge status mapping") {
  IrProgram empty;
  SUBCASE("valid and invalid with model") {
    auto r = discharge({arith_vc("a", true), arith_vc("b", false)}, empty, {z3()});
    CHECK(r[0].status == SolverStatus::Valid);
    CHECK(r[1].status == SolverStatus::InvalidWithModel);
  }
  SUBCASE("trivial goals never reach the solver") {
    VC vc = arith_vc("t", false);
    vc.trivial = true;
    auto r = discharge({vc}, empty, {shell("exit 9")});
    CHECK(r[0].status == SolverStatus::Valid);
    CHECK(r[0].solver == "simplifier");
  }
  SUBCASE("no solvers") {
    auto r = discharge({arith_vc("a", true)}, empty, {});
    CHECK(r[0].status == SolverStatus::SolverError);
  }
  SUBCASE("empty VC list") { CHECK(discharge({}, empty, {z3()}).empty()); }
  SUBCASE("missing executable") {
    SolverConfig c = z3();
    c.path = "/nonexistent/solver";
    auto r = discharge({arith_vc("a", true)}, empty, {c});
    CHECK(r[0].status == SolverStatus::SolverError);
  }
  SUBCASE("garbage output") {
    auto r = discharge({arith_vc("a", true)}, empty, {shell("cat >/dev/null; echo garbage")});
    CHECK(r[0].status == SolverStatus::SolverError);
    CHECK(r[0].detail.find("garbage") != std::string::npos);
  }
  SUBCASE("nonzero exit despite an answer") {
    auto r = discharge({arith_vc("a", true)}, empty, {shell("cat >/dev/null; echo unsat; exit 3")});
    CHECK(r[0].status == SolverStatus::SolverError);
  }
  SUBCASE("unknown") {
    auto r = discharge({arith_vc("a", true)}, empty, {shell("cat >/dev/null; echo unknown")});
    CHECK(r[0].status == SolverStatus::Unknown);
  }
  SUBCASE("killed after the deadline") {
    SolverConfig c = shell("sleep 30");
    c.timeout = 0.5;
    auto t0 = std::chrono::steady_clock::now();
    auto r = discharge({arith_vc("a", true)}, empty, {c});
    double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    CHECK(r[0].status == SolverStatus::Timeout);
    CHECK(secs < 10);
  }
  SUBCASE("fallback to the next solver") {
    SolverConfig bogus = z3();
    bogus.name = "bogus";
    bogus.path = "/nonexistent/solver";
    auto r = discharge({arith_vc("a", true)}, empty, {bogus, z3()});
    CHECK(r[0].status == SolverStatus::Valid);
    CHECK(r[0].solver == "z3");
  }
}

TEST_CASE("parallel discharge keeps VC order") {
  IrProgram empty;
  std::vector<VC> vcs;
  for (int i = 0; i < 12; ++i) vcs.push_back(arith_vc("v" + std::to_string(i), i % 3 != 0));
  SolverConfig c = z3();
  c.jobs = 4;
  auto r = discharge(vcs, empty, {c});
  REQUIRE(r.size() == vcs.size());
  for (size_t i = 0; i < vcs.size(); ++i) {
    CHECK(r[i].vc == vcs[i].id);
    CHECK(r[i].status == (i % 3 != 0 ? SolverStatus::Valid : SolverStatus::InvalidWithModel));
  }
}

TEST_CASE("solver command lines") {
  SolverConfig c = z3(2.5);
  CHECK(solver_command(c) == std::vector<std::string>{"/usr/local/bin/z3", "-smt2", "-in", "-T:3"});
  c.name = "cvc5";
  c.path = "cvc5";
  CHECK(solver_command(c) == std::vector<std::string>{"cvc5", "--lang=smt2", "--tlimit=3000"});
}
