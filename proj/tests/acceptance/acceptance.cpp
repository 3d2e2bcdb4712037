// Acceptance checks. Prints one PASS/FAIL line per criterion and exits
// nonzero if any criterion fails.

#include <sys/wait.h>

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <random>
#include <set>
#include <sstream>

#include <fmt/format.h>
#include <json.hpp>

#include "driver/driver.hpp"
#include "interp/interp.hpp"
#include "smt/smt.hpp"
#include "surface/parser.hpp"
#include "translate/translate.hpp"

namespace fs = std::filesystem;
using namespace effv;

namespace {

constexpr double kProveSeconds = 60.0;
constexpr int kMinMutations = 8;
constexpr int kOracleTrials = 100;
constexpr int kDeterminismRuns = 3;
constexpr int kMaxForestNodes = 4;
constexpr int kMaxTermSize = 4;

const fs::path kTests = EFFV_TEST_DIR;
const std::string kCli = EFFV_CLI;

std::string slurp(const fs::path &p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

struct Proc {
  int code = -1;
  std::string out;
  double seconds = 0;
};

std::string quote(const std::string &s) {
  std::string q = "'";
  for (char c : s) q += c == '\'' ? std::string("'\\''") : std::string(1, c);
  return q + "'";
}

Proc sh(const std::vector<std::string> &args) {
  std::string cmd;
  for (const auto &a : args) cmd += quote(a) + " ";
  cmd += "2>/dev/null";
  Proc p;
  auto t0 = std::chrono::steady_clock::now();
  FILE *f = popen(cmd.c_str(), "r");
  if (!f) return p;
  char buf[4096];
  size_t n;
  while ((n = fread(buf, 1, sizeof buf, f)) > 0) p.out.append(buf, n);
  int st = pclose(f);
  p.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  p.code = WIFEXITED(st) ? WEXITSTATUS(st) : -1;
  return p;
}

fs::path scratch(const std::string &name) {
  fs::path d = fs::temp_directory_path() / fmt::format("effv_acceptance_{}", getpid()) / name;
  fs::create_directories(d.parent_path());
  return d;
}

struct ProveRun {
  Proc proc;
  nlohmann::json report;
};

ProveRun prove(const fs::path &file) {
  fs::path json = scratch(file.stem().string() + ".json");
  ProveRun r{sh({kCli, "--report-json", json.string(), "prove", file.string()}), {}};
  if (fs::exists(json)) r.report = nlohmann::json::parse(slurp(json), nullptr, false);
  return r;
}

std::map<std::string, int> nontrivial_by_routine(const std::vector<VC> &vcs) {
  std::map<std::string, int> out;
  for (const auto &vc : vcs)
    if (!vc.trivial) out[vc.routine]++;
  return out;
}

Pipeline load(const fs::path &f) {
  Pipeline p = check_source(f.filename().string(), slurp(f));
  gen_pipeline_vcs(p);
  return p;
}

struct Verdict {
  bool pass = true;
  std::vector<std::string> notes;
  void fail(std::string why) {
    pass = false;
    notes.push_back(std::move(why));
  }
  void note(std::string s) { notes.push_back(std::move(s)); }
};

// 1. prove fully discharges the four small case studies within the time limit.
Verdict criterion1() {
  Verdict v;
  for (const char *name : {"xchg", "division_interpreter", "references", "control_inversion"}) {
    auto r = prove(kTests / "corpus" / (std::string(name) + ".eff"));
    if (r.proc.code != 0) v.fail(fmt::format("{}: exit {}", name, r.proc.code));
    if (r.proc.seconds >= kProveSeconds) v.fail(fmt::format("{}: {:.1f}s", name, r.proc.seconds));
    if (!r.report.is_object() || r.report.value("valid", -1) != r.report.value("total", -2))
      v.fail(fmt::format("{}: not every VC valid", name));
    v.note(fmt::format("{} {}/{} in {:.2f}s", name, r.report.value("valid", 0), r.report.value("total", 0),
                       r.proc.seconds));
  }
  auto counts = nontrivial_by_routine(load(kTests / "corpus" / "xchg.eff").vcs);
  if (counts["xchg"] != 1 || counts["server"] != 4)
    v.fail(fmt::format("xchg counts client={} server={}", counts["xchg"], counts["server"]));
  return v;
}

// Forest shapes as (first child, next sibling) binary trees.
struct Shape {
  std::shared_ptr<Shape> l, r;
};

std::vector<std::shared_ptr<Shape>> shapes(int n) {
  if (n == 0) return {nullptr};
  std::vector<std::shared_ptr<Shape>> out;
  for (int k = 0; k < n; ++k)
    for (const auto &l : shapes(k))
      for (const auto &r : shapes(n - 1 - k)) out.push_back(std::make_shared<Shape>(Shape{l, r}));
  return out;
}

ValuePtr forest_value(const std::shared_ptr<Shape> &s, int &next, int parent, std::vector<int> &parents) {
  if (!s) return val::ctor("E");
  int i = next++;
  parents.push_back(parent);
  ValuePtr l = forest_value(s->l, next, i, parents);
  ValuePtr r = forest_value(s->r, next, parent, parents);
  return val::ctor("N", {val::int_(i), l, r});
}

// 2. Koda-Ruskey translates, VCs and scripts are produced, and the yielded
// colorings agree with a brute-force enumeration.
Verdict criterion2() {
  Verdict v;
  Pipeline p = load(kTests / "corpus" / "koda_ruskey.eff");
  if (p.vcs.empty()) v.fail("no VCs");
  for (const auto &vc : p.vcs)
    if (!vc.trivial) emit_smtlib(vc, p.translation->ir);
  v.note(fmt::format("{} VCs emitted", count_nontrivial(p.vcs)));

  int forests = 0;
  for (int n = 0; n <= kMaxForestNodes; ++n)
    for (const auto &s : shapes(n)) {
      ++forests;
      int next = 0;
      std::vector<int> parents;
      ValuePtr f = forest_value(s, next, -1, parents);
      std::vector<std::vector<bool>> seen;
      for (const auto &e : enumerate_effects(*p.typed, "koda_ruskey", {f})) {
        if (!e.escaped) continue;
        std::vector<bool> c;
        for (int i = 0; i < n; ++i) c.push_back(e.store.at("bits")->items.at(static_cast<size_t>(i))->name == "Black");
        seen.push_back(c);
      }
      std::set<std::vector<bool>> expected;
      for (unsigned mask = 0; mask < (1u << n); ++mask) {
        std::vector<bool> c;
        for (int i = 0; i < n; ++i) c.push_back((mask >> i) & 1);
        bool ok = true;
        for (int i = 0; i < n; ++i)
          if (parents[static_cast<size_t>(i)] >= 0 && !c[static_cast<size_t>(parents[static_cast<size_t>(i)])] &&
              c[static_cast<size_t>(i)])
            ok = false;
        if (ok) expected.insert(c);
      }
      std::set<std::vector<bool>> distinct(seen.begin(), seen.end());
      bool subset = std::all_of(seen.begin(), seen.end(), [&](const auto &c) { return expected.count(c) > 0; });
      if (distinct.size() != seen.size() || seen.size() != expected.size() || !subset)
        v.fail(fmt::format("{}: {} yields, {} distinct, {} expected", value_str(f), seen.size(), distinct.size(),
                           expected.size()));
    }
  v.note(fmt::format("{} forests", forests));
  return v;
}

struct Mutation {
  fs::path file;
  std::string entry, args, store, expect;
};

Mutation read_mutation(const fs::path &f) {
  Mutation m{f, {}, {}, {}, {}};
  std::istringstream in(slurp(f));
  std::string line;
  while (std::getline(in, line)) {
    auto field = [&](const std::string &key, std::string &out) {
      auto i = line.find(key + ": ");
      if (i == std::string::npos) return;
      out = line.substr(i + key.size() + 2);
      if (auto j = out.find(" *)"); j != std::string::npos) out.resize(j);
    };
    field("entry", m.entry);
    field("args", m.args);
    field("store", m.store);
    field("expect", m.expect);
    if (line.find("*)") != std::string::npos) break;
  }
  return m;
}

std::string observed_blame(const Mutation &m) {
  Pipeline p = check_source(m.file.filename().string(), slurp(m.file));
  RunOptions o;
  o.ambient_unit_handler = true;
  Store st = initial_store(*p.typed);
  if (!m.store.empty()) {
    auto eq = m.store.find(" = ");
    st[m.store.substr(0, eq)] = parse_value(m.store.substr(eq + 3));
  }
  o.store = st;
  auto r = run_checked(*p.typed, m.entry, {parse_value(m.args)}, o);
  if (r.status == RunStatus::ContractViolation) return blame_str(r.violation->side);
  if (r.status == RunStatus::RuntimeError && r.error == RuntimeErrorKind::OneShot) return "one-shot";
  return run_status_str(r.status);
}

// 3. Mutants fail to verify with at least one non-valid VC, and the checked
// interpreter blames the side the mutation broke.
Verdict criterion3() {
  Verdict v;
  int detected = 0, total = 0, blamed = 0, executable = 0;
  std::vector<fs::path> files;
  for (const auto &e : fs::directory_iterator(kTests / "mutations"))
    if (e.path().extension() == ".eff") files.push_back(e.path());
  std::sort(files.begin(), files.end());
  for (const auto &f : files) {
    Mutation m = read_mutation(f);
    ++total;
    auto r = prove(f);
    int nonvalid = 0;
    if (r.report.is_object())
      for (const auto &vc : r.report["vcs"]) nonvalid += vc.value("status", "") != "valid";
    if (m.expect == "static") {
      if (r.proc.code == 0) v.fail(f.filename().string() + ": accepted");
      else v.note(f.filename().string() + ": rejected before VC generation");
      continue;
    }
    if (r.proc.code != 0 && nonvalid > 0) ++detected;
    else v.fail(fmt::format("{}: exit {}, {} non-valid VCs", f.filename().string(), r.proc.code, nonvalid));
    ++executable;
    std::string got = observed_blame(m);
    if (got == m.expect) ++blamed;
    else v.fail(fmt::format("{}: expected {} got {}", f.filename().string(), m.expect, got));
  }
  if (detected < kMinMutations) v.fail(fmt::format("only {} mutants detected", detected));
  v.note(fmt::format("{} of {} mutants with a non-valid VC, blame correct on {}/{}", detected, total, blamed,
                     executable));
  return v;
}

// 4. Randomized checked runs of the all-valid programs find no violations.
Verdict criterion4() {
  Verdict v;
  Options o;
  o.oracle_trials = kOracleTrials;
  for (const char *name : {"xchg", "division_interpreter", "references", "control_inversion"}) {
    Pipeline p = load(kTests / "corpus" / (std::string(name) + ".eff"));
    auto r = oracle(p, o);
    if (r.entries.empty()) v.fail(fmt::format("{}: no closed entry", name));
    if (r.runs < kOracleTrials * static_cast<int>(r.entries.size()))
      v.fail(fmt::format("{}: only {} runs", name, r.runs));
    if (r.violations || r.one_shot)
      v.fail(fmt::format("{}: {} contract, {} one-shot violations", name, r.violations, r.one_shot));
    v.note(fmt::format("{} {} runs", name, r.runs));
  }
  return v;
}

// 5. Emitted artifacts are byte-stable, and the xchg snapshots match.
Verdict criterion5() {
  Verdict v;
  for (const auto &e : fs::directory_iterator(kTests / "corpus")) {
    if (e.path().extension() != ".eff") continue;
    std::string name = e.path().filename().string();
    std::vector<std::string> seen;
    for (int i = 0; i < kDeterminismRuns; ++i) {
      fs::path dir = scratch(fmt::format("smt_{}_{}", e.path().stem().string(), i));
      fs::remove_all(dir);
      fs::create_directories(dir);
      auto r = sh({kCli, "--emit-ir", "--emit-vcs", "--all-vcs", "--dump-smt", dir.string(), "check", e.path().string()});
      if (r.code != 0) v.fail(fmt::format("{}: exit {}", name, r.code));
      std::vector<fs::path> smt;
      for (const auto &s : fs::directory_iterator(dir)) smt.push_back(s.path());
      std::sort(smt.begin(), smt.end());
      std::string all = r.out;
      for (const auto &s : smt) all += s.filename().string() + "\n" + slurp(s);
      seen.push_back(all);
    }
    for (int i = 1; i < kDeterminismRuns; ++i)
      if (seen[static_cast<size_t>(i)] != seen[0]) v.fail(name + ": output differs between runs");
  }

  Pipeline x = load(kTests / "corpus" / "xchg.eff");
  std::string ir = print_ir(x.translation->ir);
  if (ir != slurp(kTests / "golden" / "xchg.ir")) v.fail("xchg IR differs from golden");
  if (print_vcs(x.vcs, true) != slurp(kTests / "golden" / "xchg.vcs")) v.fail("xchg VCs differ from golden");
  for (const auto &vc : x.vcs)
    if (vc.kind == Obligation::ContinuationPrecondition &&
        emit_smtlib(vc, x.translation->ir) != slurp(kTests / "golden" / "xchg.continuation_precondition.smt2"))
      v.fail("xchg SMT script differs from golden");
  const char *shapes[] = {
      "\nexception XCHG int\n",
      "val perform_XCHG (arg : int) : int\n  requires { pre_XCHG arg {_p = !p} }\n"
      "  ensures { post_XCHG arg (old {_p = !p}) {_p = !p} result }\n",
      "pre result arg state <-> post_XCHG n eff_state state arg",
      "<-> (let state_old = init_state in (state._p = state_old._p && result = 42)",
  };
  for (const char *s : shapes)
    if (ir.find(s) == std::string::npos) v.fail(fmt::format("xchg IR lacks \"{}\"", s));
  return v;
}

// Direct transcriptions of the three recursions.
EffectSig split_rec(const TypePtr &t) {
  if (t->kind != Type::Kind::Arrow) return {{Type::unit()}, t};
  if (t->args[1]->kind != Type::Kind::Arrow) return {{t->args[0]}, t->args[1]};
  EffectSig s = split_rec(t->args[1]);
  std::vector<TypePtr> args{t->args[0]};
  args.insert(args.end(), s.args.begin(), s.args.end());
  return {args, s.reply};
}

TermPtr combine_rec(const std::vector<TermPtr> &ts, size_t i = 0) {
  if (i == ts.size()) return tm::true_();
  return tm::and_(ts[i], combine_rec(ts, i + 1));
}

TermPtr unmodified_rec(const std::vector<std::string> &xs, const StateModel &m, size_t i = 0) {
  if (i == xs.size()) return tm::true_();
  const StateVar *sv = m.find(xs[i]);
  TypePtr ft = sv->is_array ? sv->ty : sv->elem;
  return tm::and_(tm::eq(tm::field(tm::var("state", Type::state()), xs[i], ft),
                         tm::field(tm::var("state_old", Type::state()), xs[i], ft)),
                  unmodified_rec(xs, m, i + 1));
}

// x /\ true = x: the implementation folds the `true` that ends a list of n terms.
TermPtr fold_unit(const TermPtr &t, size_t n) {
  if (n == 0) return t;
  if (n == 1) return t->kids[0];
  return tm::and_(t->kids[0], fold_unit(t->kids[1], n - 1));
}

std::vector<TypePtr> types_of_size(int size) {
  if (size == 1) return {Type::int_(), Type::bool_(), Type::unit()};
  std::vector<TypePtr> out;
  for (const auto &t : types_of_size(size - 1)) out.push_back(Type::list(t));
  for (int l = 1; l < size - 1; ++l)
    for (const auto &a : types_of_size(l))
      for (const auto &b : types_of_size(size - 1 - l)) {
        out.push_back(Type::arrow(a, b));
        out.push_back(Type::tuple({a, b}));
      }
  return out;
}

// 6. The three meta-functions agree with their recursions on all inputs up to size 4.
Verdict criterion6() {
  Verdict v;
  int cases = 0;
  for (int size = 1; size <= kMaxTermSize; ++size)
    for (const auto &t : types_of_size(size)) {
      ++cases;
      EffectSig a = effect_type_split(t), b = split_rec(t);
      bool same = a.args.size() == b.args.size() && type_equal(a.reply, b.reply);
      for (size_t i = 0; same && i < a.args.size(); ++i) same = type_equal(a.args[i], b.args[i]);
      if (!same) v.fail("split differs on " + type_str(t));
    }

  std::vector<TermPtr> atoms{tm::var("x", Type::bool_()), tm::var("y", Type::bool_()), tm::true_(), tm::false_(),
                             tm::eq(tm::int_(1), tm::var("z", Type::int_()))};
  std::function<void(std::vector<TermPtr> &)> lists = [&](std::vector<TermPtr> &ts) {
    ++cases;
    if (term_str(combine_terms(ts)) != term_str(fold_unit(combine_rec(ts), ts.size()))) v.fail("combine_terms differs");
    if (ts.size() == static_cast<size_t>(kMaxTermSize)) return;
    for (const auto &a : atoms) {
      ts.push_back(a);
      lists(ts);
      ts.pop_back();
    }
  };
  std::vector<TermPtr> ts;
  lists(ts);

  StateModel model = analyze(parse_program("let a : int ref = ref 0\nlet b : bool ref = ref true\n"
                                           "let c : int array = Array.make 3 0\nlet d : int ref = ref 1\n"))
                         .state;
  const std::vector<std::string> names{"a", "b", "c", "d"};
  std::function<void(std::vector<std::string> &)> seqs = [&](std::vector<std::string> &xs) {
    ++cases;
    if (term_str(unmodified_state(xs, model)) != term_str(fold_unit(unmodified_rec(xs, model), xs.size())))
      v.fail("unmodified_state differs");
    if (xs.size() == static_cast<size_t>(kMaxTermSize)) return;
    for (const auto &n : names) {
      if (std::find(xs.begin(), xs.end(), n) != xs.end()) continue;
      xs.push_back(n);
      seqs(xs);
      xs.pop_back();
    }
  };
  std::vector<std::string> xs;
  seqs(xs);
  v.note(fmt::format("{} cases", cases));
  return v;
}

}  // namespace

int main() {
  std::vector<std::pair<const char *, std::function<Verdict()>>> criteria{
      {"prove discharges xchg, division interpreter, references, control inversion", criterion1},
      {"Koda-Ruskey translates and enumerates exactly the valid colorings", criterion2},
      {"mutants are rejected and blamed on the right side", criterion3},
      {"random checked runs of verified programs stay within their contracts", criterion4},
      {"emitted IR, VCs and SMT are deterministic and match the xchg snapshots", criterion5},
      {"effect type split, clause combination and frame terms match their recursions", criterion6},
  };
  int failed = 0;
  for (size_t i = 0; i < criteria.size(); ++i) {
    Verdict v;
    try {
      v = criteria[i].second();
    } catch (const std::exception &e) {
      v.fail(std::string("exception: ") + e.what());
    }
    failed += !v.pass;
    std::string notes;
    for (const auto &n : v.notes) notes += (notes.empty() ? "" : "; ") + n;
    std::cout << fmt::format("criterion {}: {} - {} [{}]", i + 1, v.pass ? "PASS" : "FAIL", criteria[i].first, notes)
              << std::endl;
  }
  fs::remove_all(fs::temp_directory_path() / fmt::format("effv_acceptance_{}", getpid()));
  return failed ? 1 : 0;
}
