#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <functional>
#include <random>
#include <set>

#include "driver/driver.hpp"
#include "interp/interp.hpp"
#include "support.hpp"
#include "surface/parser.hpp"

using namespace effv;
using namespace effv::test;

namespace {

TypedProgram typed(const std::string &src) { return analyze(parse_program(src)); }

std::int64_t as_int(const ValuePtr &v) {
  REQUIRE(v);
  REQUIRE(v->kind == Value::Kind::Int);
  return v->ival;
}

// Forest shapes: nullptr is E; node children are (first child, next sibling).
struct Shape {
  std::shared_ptr<Shape> l, r;
};
using ShapePtr = std::shared_ptr<Shape>;

std::vector<ShapePtr> shapes(int n) {
  if (n == 0) return {nullptr};
  std::vector<ShapePtr> out;
  for (int k = 0; k < n; ++k)
    for (const auto &l : shapes(k))
      for (const auto &r : shapes(n - 1 - k)) out.push_back(std::make_shared<Shape>(Shape{l, r}));
  return out;
}

// Labels nodes in preorder; records each node's parent (-1 for roots).
ValuePtr label(const ShapePtr &s, int &next, int parent, std::vector<int> &parents) {
  if (!s) return val::ctor("E");
  int i = next++;
  parents.push_back(parent);
  ValuePtr l = label(s->l, next, i, parents);
  ValuePtr r = label(s->r, next, parent, parents);
  return val::ctor("N", {val::int_(i), l, r});
}

// Colorings of n nodes where every child of a White node is White.
std::set<std::vector<bool>> brute_force(const std::vector<int> &parents) {
  std::set<std::vector<bool>> out;
  size_t n = parents.size();
  for (unsigned mask = 0; mask < (1u << n); ++mask) {
    std::vector<bool> black(n);
    for (size_t i = 0; i < n; ++i) black[i] = (mask >> i) & 1;
    bool ok = true;
    for (size_t i = 0; i < n; ++i)
      if (parents[i] >= 0 && !black[parents[i]] && black[i]) ok = false;
    if (ok) out.insert(black);
  }
  return out;
}

std::vector<bool> snapshot(const Store &s, size_t n) {
  const ValuePtr &bits = s.at("bits");
  std::vector<bool> out;
  for (size_t i = 0; i < n; ++i) out.push_back(bits->items.at(i)->name == "Black");
  return out;
}

struct EnvVar {
  EnvVar(const char *k, const char *v) : key(k) { setenv(k, v, 1); }
  ~EnvVar() { unsetenv(key); }
  const char *key;
};

}  // namespace

TEST_CASE("references: main returns 1") {
  auto tp = typed(corpus("references"));
  auto r = run(tp, "main", {}, {});
  REQUIRE(r.status == RunStatus::Value);
  CHECK(as_int(r.value) == 1);
}

TEST_CASE("xchg server") {
  auto tp = typed(corpus("xchg"));
  auto r = run(tp, "server", {val::unit()});
  REQUIRE(r.status == RunStatus::Value);
  CHECK(as_int(r.value) == 42);
  CHECK(as_int(r.final_store.at("p")) == 42);
  CHECK(r.performs_handled == 2);
  CHECK(r.resumes == 2);

  std::mt19937_64 rng(3);
  for (int i = 0; i < 50; ++i) {
    RunOptions o;
    Store st = initial_store(tp);
    std::int64_t p0 = static_cast<std::int64_t>(rng() % 201) - 100;
    st["p"] = val::int_(p0);
    o.store = st;
    auto c = run_checked(tp, "server", {val::unit()}, o);
    REQUIRE(c.status == RunStatus::Value);
    CHECK(as_int(c.value) == 42);
    CHECK(as_int(c.final_store.at("p")) == p0);
    CHECK(c.checks > 0);
  }
}

TEST_CASE("continuations are one-shot at run time") {
  auto tp = typed(R"(
effect E : int
(*@ protocol E : ensures true *)
let f () : int = perform E
(*@ performs E *)
let twice () : int =
  try f () with
  | effect E k -> continue k 1; continue k 2
  (*@ returns int *)
)");
  auto r = run(tp, "twice", {val::unit()});
  CHECK(r.status == RunStatus::RuntimeError);
  CHECK(r.error == RuntimeErrorKind::OneShot);
}

TEST_CASE("division interpreter") {
  auto tp = typed(corpus("division_interpreter"));
  auto div = [](ValuePtr a, ValuePtr b) { return val::ctor("Div", {a, b}); };
  auto lit = [](int n) { return val::ctor("Int", {val::int_(n)}); };
  auto ev = enumerate_effects(tp, "main", {div(lit(1), lit(0))});
  REQUIRE(ev.size() == 1);
  CHECK(ev[0].effect == "Div_by_zero");
  CHECK_FALSE(ev[0].escaped);
  CHECK(enumerate_effects(tp, "main", {div(lit(7), lit(2))}).empty());
  auto r = run(tp, "main", {div(lit(7), lit(2))});
  REQUIRE(r.status == RunStatus::Value);
  CHECK(as_int(r.value) == 3);
}

TEST_CASE("control inversion sums by yielding") {
  auto tp = typed(corpus("control_inversion"));
  for (int n = 0; n <= 6; ++n) {
    auto r = run_checked(tp, "sum", {val::int_(n)});
    REQUIRE(r.status == RunStatus::Value);
    CHECK(as_int(r.value) == n * (n + 1) / 2);
  }
}

TEST_CASE("deep handlers are reinstalled on every resume") {
  for (const auto &f : corpus_files()) {
    CAPTURE(f.filename().string());
    auto p = check_source(f.filename().string(), slurp(f));
    std::mt19937_64 rng(11);
    for (const auto &[name, fn] : p.typed->functions) {
      if (!has_first_order_params(*p.typed, name)) continue;
      for (int i = 0; i < 10; ++i) {
        std::vector<ValuePtr> args;
        for (const auto &prm : fn.params) args.push_back(random_value(*p.typed, prm.ty, rng));
        RunOptions o;
        o.store = random_store(*p.typed, rng);
        o.ambient_unit_handler = true;
        auto r = run(*p.typed, name, args, o);
        if (r.status != RunStatus::Value) continue;
        CHECK(r.handler_pushes == r.try_installs + r.resumes);
        CHECK(r.resumes <= r.performs_handled);
      }
    }
  }
}

TEST_CASE("trace JSON is deterministic") {
  auto tp = typed(corpus("xchg"));
  auto a = run(tp, "server", {val::unit()});
  auto b = run(tp, "server", {val::unit()});
  CHECK(trace_json(a) == trace_json(b));
  CHECK(trace_json(a).find("\"XCHG\"") != std::string::npos);
}

TEST_CASE("a protocol requiring true never blames the client") {
  auto tp = typed(corpus("control_inversion"));
  std::mt19937_64 rng(5);
  for (int i = 0; i < 100; ++i) {
    RunOptions o;
    o.store = random_store(tp, rng);
    auto r = run_checked(tp, "sum", {val::int_(static_cast<std::int64_t>(rng() % 8))}, o);
    if (r.violation) CHECK(r.violation->side != Blame::Client);
  }
}

TEST_CASE("blame assignment") {
  SUBCASE("client breaks the protocol precondition") {
    auto tp = typed(R"(
effect E : int -> unit
(*@ protocol E x : requires x > 0 *)
let f () : unit = perform (E 0)
(*@ performs E *)
let g () : unit =
  try f () with
  | effect (E x) k -> continue k ()
  (*@ returns unit *)
)");
    auto r = run_checked(tp, "g", {val::unit()});
    REQUIRE(r.status == RunStatus::ContractViolation);
    CHECK(r.violation->side == Blame::Client);
  }
  SUBCASE("server breaks the protocol postcondition") {
    auto tp = typed(R"(
let p : int ref = ref 0
effect E : int
(*@ protocol E : ensures reply = !p *)
let f () : int = perform E
(*@ performs E *)
let g () : int =
  try f () with
  | effect E k -> continue k (!p + 1)
  (*@ returns int *)
)");
    auto r = run_checked(tp, "g", {val::unit()});
    REQUIRE(r.status == RunStatus::ContractViolation);
    CHECK(r.violation->side == Blame::Server);
  }
  SUBCASE("callee breaks its postcondition") {
    auto tp = typed("let f (x : int) : int = x + 1\n(*@ ensures result = x *)");
    auto r = run_checked(tp, "f", {val::int_(3)});
    REQUIRE(r.status == RunStatus::ContractViolation);
    CHECK(r.violation->side == Blame::Callee);
  }
  SUBCASE("caller breaks a precondition") {
    auto tp = typed("let f (x : int) : int = x\n(*@ requires x > 0 *)\nlet g () : int = f 0");
    auto r = run_checked(tp, "g", {val::unit()});
    REQUIRE(r.status == RunStatus::ContractViolation);
    CHECK(r.violation->side == Blame::Caller);
  }
  SUBCASE("unmet entry precondition is not a violation") {
    auto tp = typed("let f (x : int) : int = x\n(*@ requires x > 0 *)");
    CHECK(run_checked(tp, "f", {val::int_(0)}).status == RunStatus::PreconditionUnmet);
  }
}

TEST_CASE("Koda-Ruskey enumerates every valid coloring of every forest up to 4 nodes") {
  auto tp = typed(corpus("koda_ruskey"));
  int forests = 0;
  for (int n = 0; n <= 4; ++n)
    for (const auto &s : shapes(n)) {
      ++forests;
      int next = 0;
      std::vector<int> parents;
      ValuePtr f = label(s, next, -1, parents);
      CAPTURE(value_str(f));
      std::vector<std::vector<bool>> seen;
      for (const auto &e : enumerate_effects(tp, "koda_ruskey", {f}))
        if (e.escaped) seen.push_back(snapshot(e.store, parents.size()));
      auto expected = brute_force(parents);
      std::set<std::vector<bool>> distinct(seen.begin(), seen.end());
      CHECK(distinct.size() == seen.size());
      CHECK(seen.size() == expected.size());
      for (const auto &c : seen) CHECK(expected.count(c));
      // Gray code: consecutive colorings differ in one node.
      for (size_t i = 1; i < seen.size(); ++i) {
        int diff = 0;
        for (size_t j = 0; j < parents.size(); ++j) diff += seen[i][j] != seen[i - 1][j];
        CHECK(diff == 1);
      }
    }
  CHECK(forests == 1 + 1 + 2 + 5 + 14);
}

TEST_CASE("value literals round-trip") {
  for (const char *s : {"3", "-4", "true", "()", "(1, false)", "[1; 2; 3]", "[]", "N (0, E, E)"}) {
    CAPTURE(s);
    ValuePtr v = parse_value(s);
    CHECK(value_equal(parse_value(value_str(v)), v));
  }
  CHECK_THROWS(parse_value("(1,"));
}

TEST_CASE("random values are well formed and deterministic per seed") {
  auto tp = typed(corpus("koda_ruskey"));
  std::mt19937_64 a(9), b(9);
  for (int i = 0; i < 20; ++i) {
    Store s1 = random_store(tp, a), s2 = random_store(tp, b);
    CHECK(store_str(s1) == store_str(s2));
    CHECK(s1.at("bits")->items.size() == 8);
  }
}

TEST_CASE("driver options") {
  Options o;
  set_option(o, "solver", "z3,cvc5");
  REQUIRE(o.solvers.size() == 2);
  CHECK(o.solvers[1].name == "cvc5");
  set_option(o, "timeout", "2.5");
  CHECK(o.solvers[0].timeout == doctest::Approx(2.5));
  CHECK_THROWS(set_option(o, "timeout", "soon"));
  CHECK_THROWS(set_option(o, "jobs", "0"));
  CHECK_THROWS(set_option(o, "colour", "blue"));
  {
    EnvVar env("EFFV_SOLVER_PATH", "/opt/z3");
    apply_environment(o);
    CHECK(o.solvers[0].path == "/opt/z3");
  }
  auto cfg = std::filesystem::temp_directory_path() / "effv_test.cfg";
  {
    std::ofstream out(cfg);
    out << "# comment\nfuel = 500\n\ntrials = 7\n";
  }
  load_config(o, cfg.string());
  CHECK(o.fuel == 500);
  CHECK(o.oracle_trials == 7);
  CHECK_THROWS(load_config(o, "/nonexistent/effv.cfg"));
  std::filesystem::remove(cfg);
}

TEST_CASE("source metrics") {
  auto m = measure("let f (x : int) : int = x\n(*@ ensures\n  result = x *)\n\nlet g ((y : int) [@ghost]) : unit = ()\n");
  CHECK(m.code_lines == 2);
  CHECK(m.spec_lines == 2);
  CHECK(m.ghost_lines == 1);
  CHECK(display_name("koda_ruskey") == "Koda-Ruskey");
  CHECK(display_name("division_interpreter") == "Division interpreter");
}

TEST_CASE("oracle over the corpus finds no violations") {
  Options o;
  o.oracle_trials = 30;
  for (const auto &f : corpus_files()) {
    CAPTURE(f.filename().string());
    auto r = oracle(check_source(f.filename().string(), slurp(f)), o);
    CHECK(r.violations == 0);
    CHECK(r.one_shot == 0);
  }
}

TEST_CASE("bench reports a row per file and survives a broken one") {
  auto dir = std::filesystem::temp_directory_path() / "effv_bench_test";
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  std::filesystem::copy_file(test_dir() / "corpus" / "xchg.eff", dir / "xchg.eff");
  {
    std::ofstream out(dir / "broken.eff");
    out << "let f = = =\n";
  }
  Options o;
  auto rows = bench(dir.string(), o);
  REQUIRE(rows.size() == 2);
  int ok = 0, failed = 0;
  for (const auto &r : rows) {
    if (r.ok) {
      ++ok;
      CHECK(r.vcs == 5);
      CHECK(r.valid == 5);
    } else {
      ++failed;
      CHECK_FALSE(r.error.empty());
    }
  }
  CHECK(ok == 1);
  CHECK(failed == 1);
  CHECK(bench_json(rows).find("effv-bench/1") != std::string::npos);
  std::filesystem::remove_all(dir);
}
