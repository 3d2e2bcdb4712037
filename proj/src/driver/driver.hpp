#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "interp/interp.hpp"
#include "smt/smt.hpp"
#include "translate/translate.hpp"
#include "vcgen/vcgen.hpp"

namespace effv {

struct Options {
  std::vector<SolverConfig> solvers{SolverConfig{}};
  std::uint64_t fuel = 1'000'000;
  std::string dump_smt_dir;
  int oracle_trials = 100;
  std::uint64_t seed = 1;
};

/// Applies one `key = value` setting (solver, solver_path, solver_args,
/// timeout, jobs, logic, fuel, trials, seed). Throws a Usage error.
void set_option(Options &o, const std::string &key, const std::string &value);

/// Reads a config file of `key = value` lines; `#` starts a comment.
void load_config(Options &o, const std::string &path);

/// EFFV_SOLVER_PATH, when set, replaces the first solver's path.
void apply_environment(Options &o);

/// Source metrics in the shape of a case-study table row.
struct SourceMetrics {
  int code_lines = 0;
  int spec_lines = 0;   // lines inside (*@ ... *)
  int ghost_lines = 0;  // lines declaring [@ghost] parameters or definitions
};
SourceMetrics measure(const std::string &text);

/// A program carried through the pipeline as far as it goes.
struct Pipeline {
  std::string name;
  std::string source;
  std::optional<TypedProgram> typed;
  std::optional<Translation> translation;
  std::vector<VC> vcs;
};

Pipeline check_source(const std::string &name, const std::string &text);
void translate_pipeline(Pipeline &p);
void gen_pipeline_vcs(Pipeline &p);

/// Writes one `<vc id>.smt2` per non-trivial VC.
void dump_smt(const Pipeline &p, const std::string &dir);

struct ProveReport {
  std::vector<DischargeResult> results;
  std::size_t total = 0;       // non-trivial VCs
  std::size_t valid = 0;
  double seconds = 0;
  bool all_valid() const { return valid == total; }
};
ProveReport prove(const Pipeline &p, const Options &o);

/// Translation-validation run: every top-level function whose parameters
/// are first-order and that lets no effect escape is executed with random
/// stores and arguments under run_checked.
struct OracleReport {
  int runs = 0;
  int skipped = 0;  // entry precondition did not hold
  int violations = 0;
  int one_shot = 0;
  int runtime_errors = 0;
  std::vector<std::string> entries;
  std::vector<std::string> failures;  // first few messages
};
OracleReport oracle(const Pipeline &p, const Options &o);

std::string prove_text(const Pipeline &p, const ProveReport &r);
std::string prove_json(const Pipeline &p, const ProveReport &r);
std::string run_json(const RunResult &r);

struct BenchRow {
  std::string file;
  std::string name;
  bool ok = false;
  std::string error;
  SourceMetrics metrics;
  std::size_t vcs = 0;
  std::size_t valid = 0;
  double seconds = 0;
  OracleReport oracle;
};
std::vector<BenchRow> bench(const std::string &dir, const Options &o);
std::string bench_table(const std::vector<BenchRow> &rows);
std::string bench_json(const std::vector<BenchRow> &rows);

/// Case-study title for a corpus file stem ("koda_ruskey" -> "Koda-Ruskey").
std::string display_name(const std::string &stem);

}  // namespace effv
