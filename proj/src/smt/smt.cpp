#include "smt/smt.hpp"

#include <fcntl.h>
#include <poll.h>
#include <signal.h>
#include <sys/wait.h>
#include <unistd.h>

#include <atomic>
#include <chrono>
#include <cmath>
#include <thread>

#include <fmt/format.h>

namespace effv {

const char *status_str(SolverStatus s) {
  switch (s) {
    case SolverStatus::Valid: return "valid";
    case SolverStatus::Unknown: return "unknown";
    case SolverStatus::Timeout: return "timeout";
    case SolverStatus::InvalidWithModel: return "invalid";
    case SolverStatus::SolverError: return "solver-error";
  }
  return "?";
}

std::vector<std::string> solver_command(const SolverConfig &cfg) {
  std::vector<std::string> cmd{cfg.path};
  long secs = std::max(1L, static_cast<long>(std::ceil(cfg.timeout)));
  if (cfg.name == "z3") {
    cmd.insert(cmd.end(), {"-smt2", "-in", fmt::format("-T:{}", secs)});
  } else if (cfg.name == "cvc5" || cfg.name == "cvc4") {
    cmd.insert(cmd.end(), {"--lang=smt2", fmt::format("--tlimit={}", secs * 1000)});
  }
  cmd.insert(cmd.end(), cfg.args.begin(), cfg.args.end());
  return cmd;
}

namespace {

struct RunResult {
  bool spawned = false;
  bool killed = false;
  int exit_code = -1;
  std::string out;
};

// Runs cmd with input on stdin; stdout and stderr are captured together.
RunResult run(const std::vector<std::string> &cmd, const std::string &input, double timeout) {
  RunResult r;
  int in[2], out[2];
  if (pipe(in) != 0) return r;
  if (pipe(out) != 0) {
    close(in[0]);
    close(in[1]);
    return r;
  }
  pid_t pid = fork();
  if (pid < 0) {
    for (int fd : {in[0], in[1], out[0], out[1]}) close(fd);
    return r;
  }
  if (pid == 0) {
    dup2(in[0], 0);
    dup2(out[1], 1);
    dup2(out[1], 2);
    for (int fd : {in[0], in[1], out[0], out[1]}) close(fd);
    std::vector<char *> argv;
    for (const auto &a : cmd) argv.push_back(const_cast<char *>(a.c_str()));
    argv.push_back(nullptr);
    execvp(argv[0], argv.data());
    _exit(127);
  }
  close(in[0]);
  close(out[1]);
  r.spawned = true;

  signal(SIGPIPE, SIG_IGN);
  size_t off = 0;
  while (off < input.size()) {
    ssize_t n = write(in[1], input.data() + off, input.size() - off);
    if (n <= 0) break;
    off += static_cast<size_t>(n);
  }
  close(in[1]);

  // A little slack over the solver's own limit before killing it.
  auto deadline = std::chrono::steady_clock::now() + std::chrono::duration<double>(timeout + 2.0);
  char buf[4096];
  for (;;) {
    auto left = std::chrono::duration_cast<std::chrono::milliseconds>(deadline - std::chrono::steady_clock::now());
    if (left.count() <= 0) {
      kill(pid, SIGKILL);
      r.killed = true;
      break;
    }
    pollfd pfd{out[0], POLLIN, 0};
    int rc = poll(&pfd, 1, static_cast<int>(left.count()));
    if (rc < 0 && errno == EINTR) continue;
    if (rc <= 0) continue;
    ssize_t n = read(out[0], buf, sizeof buf);
    if (n <= 0) break;
    r.out.append(buf, static_cast<size_t>(n));
  }
  close(out[0]);
  int status = 0;
  waitpid(pid, &status, 0);
  if (WIFEXITED(status)) r.exit_code = WEXITSTATUS(status);
  return r;
}

std::string first_line(const std::string &s) {
  size_t i = 0;
  while (i < s.size()) {
    size_t j = s.find('\n', i);
    if (j == std::string::npos) j = s.size();
    std::string line = s.substr(i, j - i);
    while (!line.empty() && std::isspace(static_cast<unsigned char>(line.back()))) line.pop_back();
    if (!line.empty()) return line;
    i = j + 1;
  }
  return "";
}

DischargeResult attempt(const VC &vc, const std::string &script, const SolverConfig &cfg) {
  DischargeResult res{vc.id, SolverStatus::SolverError, 0, cfg.name, ""};
  auto t0 = std::chrono::steady_clock::now();
  RunResult r = run(solver_command(cfg), script, cfg.timeout);
  res.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  if (!r.spawned) {
    res.detail = "could not start " + cfg.path;
    return res;
  }
  if (r.killed) {
    res.status = SolverStatus::Timeout;
    return res;
  }
  if (r.exit_code == 127) {
    res.detail = "could not execute " + cfg.path;
    return res;
  }
  std::string head = first_line(r.out);
  if (r.exit_code != 0) {
    res.detail = fmt::format("exit status {}: {}", r.exit_code, r.out);
  } else if (head == "unsat") {
    res.status = SolverStatus::Valid;
  } else if (head == "sat") {
    res.status = SolverStatus::InvalidWithModel;
    RunResult m = run(solver_command(cfg), script + "(get-model)\n", cfg.timeout);
    auto nl = m.out.find('\n');
    res.detail = nl == std::string::npos ? "" : m.out.substr(nl + 1);
  } else if (head == "unknown") {
    res.status = SolverStatus::Unknown;
  } else if (head == "timeout") {
    res.status = SolverStatus::Timeout;
  } else {
    res.detail = r.out.empty() ? fmt::format("exit status {}", r.exit_code) : r.out;
  }
  return res;
}

}  // namespace

std::vector<DischargeResult> discharge(const std::vector<VC> &vcs, const IrProgram &p,
                                       const std::vector<SolverConfig> &solvers) {
  std::vector<DischargeResult> out(vcs.size());
  auto one = [&](size_t i) {
    const VC &vc = vcs[i];
    if (vc.trivial || (vc.goal->kind == Term::Kind::Bool && vc.goal->bval)) {
      out[i] = {vc.id, SolverStatus::Valid, 0, "simplifier", ""};
      return;
    }
    DischargeResult last{vc.id, SolverStatus::SolverError, 0, "", "no solver configured"};
    for (const auto &cfg : solvers) {
      std::string script;
      try {
        script = emit_smtlib(vc, p, cfg.logic);
      } catch (const Error &e) {
        last = {vc.id, SolverStatus::SolverError, 0, cfg.name, e.what()};
        break;
      }
      last = attempt(vc, script, cfg);
      if (last.status == SolverStatus::Valid || last.status == SolverStatus::InvalidWithModel) break;
    }
    out[i] = last;
  };
  int jobs = solvers.empty() ? 1 : std::max(1, solvers.front().jobs);
  if (jobs == 1 || vcs.size() < 2) {
    for (size_t i = 0; i < vcs.size(); ++i) one(i);
    return out;
  }
  std::atomic<size_t> next{0};
  std::vector<std::thread> pool;
  for (int j = 0; j < jobs; ++j)
    pool.emplace_back([&] {
      for (size_t i; (i = next++) < vcs.size();) one(i);
    });
  for (auto &t : pool) t.join();
  return out;
}

}  // namespace effv
