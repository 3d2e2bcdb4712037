// effv: check, translate and verify programs with effect handlers.
//
// Exit codes: 0 success, 1 verification failed (or the program was
// rejected), 2 usage error, 3 internal error.

#include <effv/effv.h>

#include <cstdio>
#include <fstream>
#include <iostream>
#include <memory>
#include <string>
#include <vector>

#include <CLI11.hpp>

namespace {

constexpr int kOk = 0, kFailed = 1, kUsage = 2, kInternal = 3;

int exit_code(effv_status s) {
  switch (s) {
    case EFFV_OK: return kOk;
    case EFFV_ERR_SYNTAX:
    case EFFV_ERR_SEMANTIC:
    case EFFV_ERR_TYPE:
    case EFFV_ERR_EFFECT:
    case EFFV_ERR_RUNTIME: return kFailed;
    case EFFV_ERR_USAGE:
    case EFFV_ERR_IO:
    case EFFV_ERR_STATE: return kUsage;
    default: return kInternal;
  }
}

using Session = std::unique_ptr<effv_session, decltype(&effv_session_free)>;

struct Failure {
  int code;
};

void ok(effv_session *s, effv_status st) {
  if (st == EFFV_OK) return;
  std::cerr << "effv: " << effv_status_name(st) << " error: " << effv_last_error(s) << "\n";
  throw Failure{exit_code(st)};
}

bool write_file(const std::string &path, const char *text) {
  std::ofstream out(path, std::ios::binary);
  out << text;
  return static_cast<bool>(out);
}

struct Flags {
  std::string config;
  std::string solver;
  std::string solver_path;
  std::string timeout;
  std::string jobs;
  std::string fuel;
  bool emit_ir = false;
  bool emit_vcs = false;
  bool all_vcs = false;
  std::string dump_smt;
  std::string report_json;
  std::string trace_json;
};

void configure(effv_session *s, const Flags &f) {
  if (!f.config.empty()) ok(s, effv_load_config(s, f.config.c_str()));
  ok(s, effv_apply_environment(s));
  if (!f.solver.empty()) ok(s, effv_set_option(s, "solver", f.solver.c_str()));
  if (!f.solver_path.empty()) ok(s, effv_set_option(s, "solver_path", f.solver_path.c_str()));
  if (!f.timeout.empty()) ok(s, effv_set_option(s, "timeout", f.timeout.c_str()));
  if (!f.jobs.empty()) ok(s, effv_set_option(s, "jobs", f.jobs.c_str()));
  if (!f.fuel.empty()) ok(s, effv_set_option(s, "fuel", f.fuel.c_str()));
}

// The --emit-ir / --emit-vcs / --dump-smt outputs, shared by every file command.
void emit_requested(effv_session *s, const Flags &f) {
  const char *out = nullptr;
  if (f.emit_ir) {
    ok(s, effv_emit_ir(s, &out));
    std::cout << out;
  }
  if (f.emit_vcs) {
    ok(s, effv_emit_vcs(s, f.all_vcs, &out));
    std::cout << out;
  }
  if (!f.dump_smt.empty()) ok(s, effv_dump_smt(s, f.dump_smt.c_str()));
}

}  // namespace

int main(int argc, char **argv) {
  CLI::App app{"Deductive verifier for an ML-like language with effect handlers"};
  app.require_subcommand(1);
  app.fallthrough();
  app.set_version_flag("--version", std::string(effv_version()));

  Flags f;
  app.add_option("--config", f.config, "key = value configuration file");
  app.add_option("--smt-solver", f.solver, "solver name, or a comma-separated fallback list");
  app.add_option("--solver-path", f.solver_path, "executable of the first solver");
  app.add_option("--timeout", f.timeout, "per-VC solver timeout in seconds");
  app.add_option("--jobs", f.jobs, "solver processes run in parallel");
  app.add_option("--fuel", f.fuel, "interpreter step budget");
  app.add_flag("--emit-ir", f.emit_ir, "print the translated program");
  app.add_flag("--emit-vcs", f.emit_vcs, "print the verification conditions");
  app.add_flag("--all-vcs", f.all_vcs, "with --emit-vcs, include trivial VCs");
  app.add_option("--dump-smt", f.dump_smt, "write one SMT-LIB script per VC into this directory");
  app.add_option("--report-json", f.report_json, "write the machine-readable report here");
  app.add_option("--trace-json", f.trace_json, "write the interpreter trace here");

  std::string file, entry, dir;
  std::vector<std::string> args;
  bool checked = false;
  std::string trials, seed;

  auto *check = app.add_subcommand("check", "parse and type check");
  check->add_option("file", file, "source file")->required();
  auto *translate = app.add_subcommand("translate", "print the translated program");
  translate->add_option("file", file, "source file")->required();
  auto *vc = app.add_subcommand("vc", "print the verification conditions");
  vc->add_option("file", file, "source file")->required();
  auto *prove = app.add_subcommand("prove", "discharge the verification conditions");
  prove->add_option("file", file, "source file")->required();
  auto *run = app.add_subcommand("run", "evaluate a function");
  run->add_option("file", file, "source file")->required();
  run->add_option("entry", entry, "function name")->required();
  run->add_option("args", args, "literal arguments, e.g. 3 or \"N (0, E, E)\"");
  run->add_flag("--check", checked, "check protocol and function contracts");
  auto *oracle = app.add_subcommand("oracle", "randomized contract checking of the closed entries");
  oracle->add_option("file", file, "source file")->required();
  oracle->add_option("--trials", trials, "runs per entry");
  oracle->add_option("--seed", seed, "random seed");
  auto *bench = app.add_subcommand("bench", "corpus report");
  bench->add_option("dir", dir, "corpus directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError &e) {
    int rc = app.exit(e);
    return rc == 0 ? kOk : kUsage;
  }

  Session session(effv_session_new(), &effv_session_free);
  effv_session *s = session.get();
  if (!s) return kInternal;
  try {
    configure(s, f);
    if (bench->parsed()) {
      const char *table = nullptr, *json = nullptr;
      ok(s, effv_bench(s, dir.c_str(), &table, &json));
      std::cout << table;
      std::string side = f.report_json.empty() ? "" : f.report_json;
      if (!side.empty() && !write_file(side, json)) {
        std::cerr << "effv: cannot write " << side << "\n";
        return kUsage;
      }
      return kOk;
    }

    ok(s, effv_load_file(s, file.c_str()));
    emit_requested(s, f);
    const char *text = nullptr, *json = nullptr;

    if (check->parsed()) {
      std::cout << file << ": ok\n";
      return kOk;
    }
    if (translate->parsed()) {
      if (!f.emit_ir) {
        ok(s, effv_emit_ir(s, &text));
        std::cout << text;
      }
      return kOk;
    }
    if (vc->parsed()) {
      if (!f.emit_vcs) {
        ok(s, effv_emit_vcs(s, f.all_vcs, &text));
        std::cout << text;
      }
      size_t total = 0, nontrivial = 0;
      ok(s, effv_vc_counts(s, &total, &nontrivial));
      std::cout << nontrivial << " VCs (" << total - nontrivial << " trivial)\n";
      return kOk;
    }
    if (prove->parsed()) {
      int all_valid = 0;
      ok(s, effv_prove(s, &all_valid, &text, &json));
      std::cout << text;
      if (!f.report_json.empty() && !write_file(f.report_json, json)) {
        std::cerr << "effv: cannot write " << f.report_json << "\n";
        return kUsage;
      }
      return all_valid ? kOk : kFailed;
    }
    if (run->parsed()) {
      std::vector<const char *> argv_c;
      for (const auto &a : args) argv_c.push_back(a.c_str());
      int outcome = 0;
      ok(s, effv_run(s, entry.c_str(), argv_c.data(), argv_c.size(), checked, &outcome, &text, &json));
      std::cout << text;
      if (!f.trace_json.empty() && !write_file(f.trace_json, json)) {
        std::cerr << "effv: cannot write " << f.trace_json << "\n";
        return kUsage;
      }
      return outcome == 0 ? kOk : kFailed;
    }
    if (oracle->parsed()) {
      if (!trials.empty()) ok(s, effv_set_option(s, "trials", trials.c_str()));
      if (!seed.empty()) ok(s, effv_set_option(s, "seed", seed.c_str()));
      int clean = 0;
      ok(s, effv_oracle(s, &clean, &text));
      std::cout << text;
      return clean ? kOk : kFailed;
    }
  } catch (const Failure &e) {
    return e.code;
  }
  return kUsage;
}
