#pragma once

#include <string>
#include <vector>

#include "vcgen/vcgen.hpp"

namespace effv {

struct SolverConfig {
  std::string name = "z3";
  std::string path = "z3";
  std::vector<std::string> args;  // extra command-line options
  double timeout = 5.0;           // seconds
  std::string logic = "ALL";
  int jobs = 1;
};

enum class SolverStatus { Valid, Unknown, Timeout, InvalidWithModel, SolverError };

const char *status_str(SolverStatus s);

struct DischargeResult {
  std::string vc;
  SolverStatus status = SolverStatus::SolverError;
  double seconds = 0;
  std::string solver;
  std::string detail;  // model text, or the reason for a solver error
};

/// A self-contained script asserting the negated goal. Byte-stable.
std::string emit_smtlib(const VC &vc, const IrProgram &p, const std::string &logic = "ALL");

/// Attempts each VC with the solvers in order until one answers valid.
/// Trivial VCs and goals that simplified to `true` never reach a solver.
std::vector<DischargeResult> discharge(const std::vector<VC> &vcs, const IrProgram &p,
                                       const std::vector<SolverConfig> &solvers);

/// Command line for running one solver on a script read from standard input.
std::vector<std::string> solver_command(const SolverConfig &cfg);

}  // namespace effv
