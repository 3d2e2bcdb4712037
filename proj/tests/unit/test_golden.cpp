#include <doctest.h>

#include <cstdlib>
#include <fstream>
#include <regex>

#include "sema/sema.hpp"
#include "smt/smt.hpp"
#include "support.hpp"
#include "surface/parser.hpp"
#include "translate/translate.hpp"

using namespace effv;
using namespace effv::test;

namespace {

// Compares against tests/golden/<name>; EFFV_UPDATE_GOLDEN=1 rewrites it.
void golden(const std::string &name, const std::string &actual) {
  auto path = test_dir() / "golden" / name;
  if (const char *u = std::getenv("EFFV_UPDATE_GOLDEN"); u && std::string(u) == "1") {
    std::ofstream(path, std::ios::binary) << actual;
    return;
  }
  REQUIRE_MESSAGE(std::filesystem::exists(path), "missing golden file " << path.string());
  CHECK(slurp(path) == actual);
}

// Text of the block starting at the line that begins with `head`, up to the next blank line.
std::string block(const std::string &text, const std::string &head) {
  auto i = text.find("\n" + head);
  if (i == std::string::npos) return "";
  auto j = text.find("\n\n", i + 1);
  return text.substr(i + 1, j == std::string::npos ? std::string::npos : j - i - 1);
}

struct Xchg {
  Translation t = translate(analyze(parse_program(corpus("xchg"))));
  std::vector<VC> vcs = gen_vcs(t.ir);
};

}  // namespace

TEST_CASE("xchg golden snapshots") {
  Xchg x;
  golden("xchg.ir", print_ir(x.t.ir));
  golden("xchg.vcs", print_vcs(x.vcs, true));
  for (const auto &vc : x.vcs)
    if (vc.kind == Obligation::ContinuationPrecondition) golden("xchg.continuation_precondition.smt2", emit_smtlib(vc, x.t.ir));
}

TEST_CASE("xchg translation structure") {
  Xchg x;
  std::string ir = print_ir(x.t.ir);
  CHECK(ir.find("\nexception XCHG int\n") != std::string::npos);

  std::string perf = block(ir, "val perform_XCHG (arg : int) : int");
  REQUIRE_FALSE(perf.empty());
  CHECK(perf.find("requires { pre_XCHG arg {_p = !p} }") != std::string::npos);
  CHECK(perf.find("ensures { post_XCHG arg (old {_p = !p}) {_p = !p} result }") != std::string::npos);
  CHECK(perf.find("raises { XCHG arg -> pre_XCHG arg {_p = !p} }") != std::string::npos);
  CHECK(perf.find("writes { p }") != std::string::npos);

  std::string pre = block(ir, "predicate pre_XCHG");
  std::string post = block(ir, "predicate post_XCHG");
  CHECK(pre.find("true") != std::string::npos);
  CHECK(post.find("state._p = x && reply = old_state._p") != std::string::npos);

  // gen_k: pre k <-> protocol postcondition at the perform state,
  // post k <-> handler invariant relative to the handler's entry state.
  auto g = ir.find("val gen_k () : continuation int int");
  REQUIRE(g != std::string::npos);
  std::string gen = ir.substr(g, ir.find("\n        in\n", g) - g);
  CHECK(gen.find("ensures { valid result }") != std::string::npos);
  CHECK(std::regex_search(gen, std::regex(R"(pre result arg state <-> post_XCHG n eff_state state arg)")));
  CHECK(std::regex_search(
      gen, std::regex(R"(post f__ arg irrelevant_old_state state result <-> \(let state_old = init_state in \(state\._p = state_old\._p && result = 42\))")));
  CHECK(ir.find("let init_state = snapshot in") < ir.find("let eff_state = snapshot in"));
}
