#include "driver/driver.hpp"

#include <fmt/format.h>
#include <fmt/ranges.h>

#include <algorithm>
#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <future>
#include <sstream>

#include <json.hpp>

#include "surface/parser.hpp"

namespace fs = std::filesystem;

namespace effv {

namespace {

std::string trim(const std::string &s) {
  size_t a = s.find_first_not_of(" \t\r\n");
  if (a == std::string::npos) return "";
  size_t b = s.find_last_not_of(" \t\r\n");
  return s.substr(a, b - a + 1);
}

[[noreturn]] void usage(const std::string &msg) { fail(ErrorKind::Usage, {}, msg); }

double to_double(const std::string &key, const std::string &v) {
  try {
    size_t n = 0;
    double d = std::stod(v, &n);
    if (n == v.size()) return d;
  } catch (const std::exception &) {
  }
  usage(fmt::format("{} expects a number, got '{}'", key, v));
}

std::vector<std::string> split(const std::string &s, char sep) {
  std::vector<std::string> out;
  std::string cur;
  std::istringstream in(s);
  while (std::getline(in, cur, sep))
    if (!trim(cur).empty()) out.push_back(trim(cur));
  return out;
}

}  // namespace

void set_option(Options &o, const std::string &key, const std::string &value) {
  if (key == "solver") {
    std::vector<SolverConfig> next;
    for (const auto &n : split(value, ',')) {
      SolverConfig c = o.solvers.empty() ? SolverConfig{} : o.solvers.front();
      c.name = n;
      c.path = n;
      c.args.clear();
      next.push_back(c);
    }
    if (next.empty()) usage("solver list is empty");
    o.solvers = next;
  } else if (key == "solver_path") {
    o.solvers.front().path = value;
  } else if (key == "solver_args") {
    o.solvers.front().args = split(value, ' ');
  } else if (key == "timeout") {
    double t = to_double(key, value);
    if (t <= 0) usage("timeout must be positive");
    for (auto &s : o.solvers) s.timeout = t;
  } else if (key == "jobs") {
    double j = to_double(key, value);
    if (j < 1) usage("jobs must be at least 1");
    for (auto &s : o.solvers) s.jobs = static_cast<int>(j);
  } else if (key == "logic") {
    for (auto &s : o.solvers) s.logic = value;
  } else if (key == "fuel") {
    double f = to_double(key, value);
    if (f < 1) usage("fuel must be positive");
    o.fuel = static_cast<std::uint64_t>(f);
  } else if (key == "trials") {
    o.oracle_trials = static_cast<int>(to_double(key, value));
  } else if (key == "seed") {
    o.seed = static_cast<std::uint64_t>(to_double(key, value));
  } else {
    usage("unknown option '" + key + "'");
  }
}

void load_config(Options &o, const std::string &path) {
  std::ifstream in(path);
  if (!in) usage("cannot read config file " + path);
  std::string line;
  int n = 0;
  while (std::getline(in, line)) {
    ++n;
    auto hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    if (trim(line).empty()) continue;
    auto eq = line.find('=');
    if (eq == std::string::npos) usage(fmt::format("{}:{}: expected key = value", path, n));
    std::string v = trim(line.substr(eq + 1));
    if (v.size() >= 2 && v.front() == '"' && v.back() == '"') v = v.substr(1, v.size() - 2);
    set_option(o, trim(line.substr(0, eq)), v);
  }
}

void apply_environment(Options &o) {
  if (const char *p = std::getenv("EFFV_SOLVER_PATH"); p && *p) o.solvers.front().path = p;
}

SourceMetrics measure(const std::string &text) {
  SourceMetrics m;
  std::istringstream in(text);
  std::string line;
  bool in_spec = false;
  while (std::getline(in, line)) {
    std::string t = trim(line);
    bool spec_line = in_spec;
    bool code = false;
    for (size_t i = 0; i < t.size();) {
      if (!in_spec && t.compare(i, 3, "(*@") == 0) {
        in_spec = spec_line = true;
        i += 3;
      } else if (in_spec && t.compare(i, 2, "*)") == 0) {
        in_spec = false;
        i += 2;
      } else {
        if (!in_spec && !std::isspace(static_cast<unsigned char>(t[i]))) code = true;
        ++i;
      }
    }
    if (spec_line) ++m.spec_lines;
    if (code) ++m.code_lines;
    if (t.find("[@ghost]") != std::string::npos) ++m.ghost_lines;
  }
  return m;
}

Pipeline check_source(const std::string &name, const std::string &text) {
  Pipeline p;
  p.name = name;
  p.source = text;
  p.typed = analyze(parse_program(text));
  return p;
}

void translate_pipeline(Pipeline &p) {
  if (!p.translation) p.translation = translate(*p.typed);
}

void gen_pipeline_vcs(Pipeline &p) {
  translate_pipeline(p);
  p.vcs = gen_vcs(p.translation->ir);
}

void dump_smt(const Pipeline &p, const std::string &dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) usage("cannot create directory " + dir);
  const std::string logic = "ALL";
  for (const auto &vc : p.vcs) {
    if (vc.trivial) continue;
    std::ofstream out(fs::path(dir) / (vc.id + ".smt2"), std::ios::binary);
    out << emit_smtlib(vc, p.translation->ir, logic);
  }
}

ProveReport prove(const Pipeline &p, const Options &o) {
  ProveReport r;
  std::vector<VC> todo;
  for (const auto &vc : p.vcs)
    if (!vc.trivial) todo.push_back(vc);
  auto t0 = std::chrono::steady_clock::now();
  r.results = discharge(todo, p.translation->ir, o.solvers);
  r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  r.total = todo.size();
  for (const auto &x : r.results) r.valid += x.status == SolverStatus::Valid;
  return r;
}

OracleReport oracle(const Pipeline &p, const Options &o) {
  OracleReport rep;
  const TypedProgram &tp = *p.typed;
  for (const auto &d : tp.program.decls) {
    if (d.kind != Decl::Kind::Function) continue;
    const std::string &f = d.function->name;
    auto row = tp.effect_rows.find(f);
    if (row != tp.effect_rows.end() && !row->second.empty()) continue;
    if (!has_first_order_params(tp, f)) continue;
    rep.entries.push_back(f);
  }
  std::mt19937_64 rng(o.seed);
  for (const auto &f : rep.entries) {
    const FunSig &sig = tp.functions.at(f);
    // Inputs failing the entry precondition are redrawn, up to a bound.
    int done = 0;
    for (int attempt = 0; done < o.oracle_trials && attempt < 20 * o.oracle_trials; ++attempt) {
      RunOptions ro;
      ro.fuel = o.fuel;
      ro.store = random_store(tp, rng);
      std::vector<ValuePtr> args;
      for (const auto &prm : sig.params) args.push_back(random_value(tp, prm.ty, rng));
      RunResult r = run_checked(tp, f, args, ro);
      if (r.status == RunStatus::PreconditionUnmet) {
        ++rep.skipped;
        continue;
      }
      ++done;
      ++rep.runs;
      std::string failure;
      if (r.status == RunStatus::ContractViolation) {
        ++rep.violations;
        failure = r.message;
      } else if (r.status == RunStatus::RuntimeError) {
        if (r.error == RuntimeErrorKind::OneShot) ++rep.one_shot;
        else ++rep.runtime_errors;
        failure = r.message;
      }
      if (!failure.empty() && rep.failures.size() < 5) {
        std::vector<std::string> xs;
        for (const auto &a : args) xs.push_back(value_str(a));
        rep.failures.push_back(fmt::format("{}({}) with {}: {}", f, fmt::join(xs, ", "), store_str(*ro.store), failure));
      }
    }
  }
  return rep;
}

std::string prove_text(const Pipeline &p, const ProveReport &r) {
  std::string out;
  std::map<std::string, const VC *> by_id;
  for (const auto &vc : p.vcs) by_id[vc.id] = &vc;
  for (const auto &x : r.results) {
    const VC &vc = *by_id.at(x.vc);
    out += fmt::format("{:<13} {:<30} {:<28} {:.2f}s {}\n", status_str(x.status), x.vc, obligation_str(vc.kind),
                       x.seconds, x.solver);
    if (x.status == SolverStatus::SolverError && !x.detail.empty()) out += "  " + trim(x.detail) + "\n";
  }
  out += fmt::format("{}: {}/{} VCs valid ({} trivial not counted) in {:.2f}s\n", p.name, r.valid, r.total,
                     p.vcs.size() - r.total, r.seconds);
  return out;
}

std::string prove_json(const Pipeline &p, const ProveReport &r) {
  nlohmann::json j;
  j["schema"] = "effv-prove/1";
  j["file"] = p.name;
  j["total"] = r.total;
  j["valid"] = r.valid;
  j["trivial"] = p.vcs.size() - r.total;
  j["seconds"] = r.seconds;
  nlohmann::json vcs = nlohmann::json::array();
  std::map<std::string, const VC *> by_id;
  for (const auto &vc : p.vcs) by_id[vc.id] = &vc;
  for (const auto &x : r.results) {
    const VC &vc = *by_id.at(x.vc);
    nlohmann::json e = {{"id", x.vc},
                        {"kind", obligation_str(vc.kind)},
                        {"routine", vc.routine},
                        {"line", vc.span.line},
                        {"status", status_str(x.status)},
                        {"solver", x.solver},
                        {"seconds", x.seconds}};
    if (!x.detail.empty()) e["detail"] = x.detail;
    vcs.push_back(e);
  }
  j["vcs"] = vcs;
  return j.dump(2);
}

std::string run_json(const RunResult &r) { return trace_json(r); }

std::string display_name(const std::string &stem) {
  static const std::map<std::string, std::string> known = {{"koda_ruskey", "Koda-Ruskey"}};
  auto it = known.find(stem);
  if (it != known.end()) return it->second;
  std::string s = stem;
  std::replace(s.begin(), s.end(), '_', ' ');
  if (!s.empty()) s[0] = static_cast<char>(std::toupper(static_cast<unsigned char>(s[0])));
  return s;
}

std::vector<BenchRow> bench(const std::string &dir, const Options &o) {
  std::vector<fs::path> files;
  std::error_code ec;
  for (const auto &e : fs::directory_iterator(dir, ec))
    if (e.is_regular_file() && e.path().extension() == ".eff") files.push_back(e.path());
  if (ec) usage("cannot read corpus directory " + dir);
  std::sort(files.begin(), files.end());

  auto one = [&o](const fs::path &f) {
    BenchRow row;
    row.file = f.filename().string();
    row.name = display_name(f.stem().string());
    std::ifstream in(f, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    row.metrics = measure(ss.str());
    try {
      Pipeline p = check_source(row.file, ss.str());
      gen_pipeline_vcs(p);
      ProveReport r = prove(p, o);
      row.vcs = r.total;
      row.valid = r.valid;
      row.seconds = r.seconds;
      Options oo = o;
      oo.oracle_trials = std::min(o.oracle_trials, 20);
      row.oracle = oracle(p, oo);
      row.ok = true;
    } catch (const Error &e) {
      row.error = e.what();
    }
    return row;
  };
  std::vector<std::future<BenchRow>> futs;
  for (const auto &f : files) futs.push_back(std::async(std::launch::async, one, f));
  std::vector<BenchRow> rows;
  for (auto &f : futs) rows.push_back(f.get());
  std::sort(rows.begin(), rows.end(), [](const BenchRow &a, const BenchRow &b) { return a.name < b.name; });
  return rows;
}

std::string bench_table(const std::vector<BenchRow> &rows) {
  std::string out = fmt::format("{:<22} {:>5} {:>5} {:>5} {:>6} {:>6} {:>9}  {}\n", "Case study", "LOC", "Spec",
                                "Ghost", "#VCs", "Valid", "Time (s)", "Oracle");
  for (const auto &r : rows) {
    if (!r.ok) {
      out += fmt::format("{:<22} error: {}\n", r.name, r.error);
      continue;
    }
    std::string oracle = r.oracle.entries.empty()
                             ? "-"
                             : fmt::format("{} runs, {} violations", r.oracle.runs, r.oracle.violations + r.oracle.one_shot);
    out += fmt::format("{:<22} {:>5} {:>5} {:>5} {:>6} {:>6} {:>9.2f}  {}\n", r.name, r.metrics.code_lines,
                       r.metrics.spec_lines, r.metrics.ghost_lines, r.vcs, r.valid, r.seconds, oracle);
  }
  return out;
}

std::string bench_json(const std::vector<BenchRow> &rows) {
  nlohmann::json j;
  j["schema"] = "effv-bench/1";
  nlohmann::json arr = nlohmann::json::array();
  std::size_t vcs = 0, valid = 0;
  double secs = 0;
  for (const auto &r : rows) {
    nlohmann::json e = {{"file", r.file}, {"name", r.name}, {"ok", r.ok}};
    if (!r.ok) {
      e["error"] = r.error;
    } else {
      e["loc"] = r.metrics.code_lines;
      e["spec_lines"] = r.metrics.spec_lines;
      e["ghost_lines"] = r.metrics.ghost_lines;
      e["vcs"] = r.vcs;
      e["valid"] = r.valid;
      e["seconds"] = r.seconds;
      e["oracle"] = {{"entries", r.oracle.entries},
                     {"runs", r.oracle.runs},
                     {"skipped", r.oracle.skipped},
                     {"violations", r.oracle.violations},
                     {"one_shot", r.oracle.one_shot},
                     {"runtime_errors", r.oracle.runtime_errors}};
      vcs += r.vcs;
      valid += r.valid;
      secs += r.seconds;
    }
    arr.push_back(e);
  }
  j["files"] = arr;
  j["totals"] = {{"files", rows.size()}, {"vcs", vcs}, {"valid", valid}, {"seconds", secs}};
  return j.dump(2);
}

}  // namespace effv
