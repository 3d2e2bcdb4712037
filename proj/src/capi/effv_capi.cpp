#include <effv/effv.h>

#include <fmt/format.h>
#include <fmt/ranges.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "driver/driver.hpp"

struct effv_session {
  effv::Options options;
  std::optional<effv::Pipeline> program;
  std::string error;
  std::string out1, out2;
};

namespace {

effv_status code(effv::ErrorKind k) {
  using effv::ErrorKind;
  switch (k) {
    case ErrorKind::Syntax: return EFFV_ERR_SYNTAX;
    case ErrorKind::Semantic: return EFFV_ERR_SEMANTIC;
    case ErrorKind::Type: return EFFV_ERR_TYPE;
    case ErrorKind::Effect: return EFFV_ERR_EFFECT;
    case ErrorKind::Translate: return EFFV_ERR_TRANSLATE;
    case ErrorKind::WellFormed: return EFFV_ERR_WELLFORMED;
    case ErrorKind::VcGen: return EFFV_ERR_VCGEN;
    case ErrorKind::Smt: return EFFV_ERR_SMT;
    case ErrorKind::Runtime: return EFFV_ERR_RUNTIME;
    case ErrorKind::Usage: return EFFV_ERR_USAGE;
    case ErrorKind::Internal: return EFFV_ERR_INTERNAL;
  }
  return EFFV_ERR_INTERNAL;
}

// Runs f, translating exceptions into status codes and the session error.
template <class F>
effv_status guard(effv_session *s, F &&f) {
  if (!s) return EFFV_ERR_USAGE;
  s->error.clear();
  try {
    return f();
  } catch (const effv::Error &e) {
    s->error = e.what();
    return code(e.kind());
  } catch (const std::exception &e) {
    s->error = e.what();
    return EFFV_ERR_INTERNAL;
  }
}

effv_status need_program(effv_session *s) {
  if (s->program) return EFFV_OK;
  s->error = "no program loaded";
  return EFFV_ERR_STATE;
}

effv::Pipeline &with_vcs(effv_session *s) {
  if (s->program->vcs.empty()) effv::gen_pipeline_vcs(*s->program);
  return *s->program;
}

}  // namespace

extern "C" {

const char *effv_version(void) { return "0.1.0"; }

const char *effv_status_name(effv_status s) {
  switch (s) {
    case EFFV_OK: return "ok";
    case EFFV_ERR_SYNTAX: return "syntax";
    case EFFV_ERR_SEMANTIC: return "semantic";
    case EFFV_ERR_TYPE: return "type";
    case EFFV_ERR_EFFECT: return "effect";
    case EFFV_ERR_TRANSLATE: return "translate";
    case EFFV_ERR_WELLFORMED: return "well-formedness";
    case EFFV_ERR_VCGEN: return "vcgen";
    case EFFV_ERR_SMT: return "smt";
    case EFFV_ERR_RUNTIME: return "runtime";
    case EFFV_ERR_USAGE: return "usage";
    case EFFV_ERR_INTERNAL: return "internal";
    case EFFV_ERR_IO: return "io";
    case EFFV_ERR_STATE: return "state";
  }
  return "unknown";
}

effv_session *effv_session_new(void) {
  try {
    return new effv_session();
  } catch (...) {
    return nullptr;
  }
}

void effv_session_free(effv_session *s) { delete s; }

const char *effv_last_error(const effv_session *s) { return s ? s->error.c_str() : ""; }

effv_status effv_set_option(effv_session *s, const char *key, const char *value) {
  return guard(s, [&] {
    if (!key || !value) effv::fail(effv::ErrorKind::Usage, {}, "null option");
    effv::set_option(s->options, key, value);
    return EFFV_OK;
  });
}

effv_status effv_load_config(effv_session *s, const char *path) {
  return guard(s, [&] {
    effv::load_config(s->options, path ? path : "");
    return EFFV_OK;
  });
}

effv_status effv_apply_environment(effv_session *s) {
  return guard(s, [&] {
    effv::apply_environment(s->options);
    return EFFV_OK;
  });
}

effv_status effv_load_source(effv_session *s, const char *name, const char *text, size_t len) {
  return guard(s, [&] {
    s->program.reset();
    s->program = effv::check_source(name ? name : "<input>", std::string(text ? text : "", text ? len : 0));
    return EFFV_OK;
  });
}

effv_status effv_load_file(effv_session *s, const char *path) {
  if (!s) return EFFV_ERR_USAGE;
  std::ifstream in(path ? path : "", std::ios::binary);
  if (!path || !in) {
    s->error = fmt::format("cannot read {}", path ? path : "(null)");
    return EFFV_ERR_IO;
  }
  std::stringstream ss;
  ss << in.rdbuf();
  std::string text = ss.str();
  return effv_load_source(s, std::filesystem::path(path).filename().string().c_str(), text.data(), text.size());
}

effv_status effv_emit_ir(effv_session *s, const char **out) {
  return guard(s, [&] {
    if (auto st = need_program(s)) return st;
    effv::translate_pipeline(*s->program);
    s->out1 = effv::print_ir(s->program->translation->ir);
    if (out) *out = s->out1.c_str();
    return EFFV_OK;
  });
}

effv_status effv_emit_vcs(effv_session *s, int with_trivial, const char **out) {
  return guard(s, [&] {
    if (auto st = need_program(s)) return st;
    s->out1 = effv::print_vcs(with_vcs(s).vcs, with_trivial != 0);
    if (out) *out = s->out1.c_str();
    return EFFV_OK;
  });
}

effv_status effv_vc_counts(effv_session *s, size_t *total, size_t *nontrivial) {
  return guard(s, [&] {
    if (auto st = need_program(s)) return st;
    const auto &vcs = with_vcs(s).vcs;
    if (total) *total = vcs.size();
    if (nontrivial) *nontrivial = effv::count_nontrivial(vcs);
    return EFFV_OK;
  });
}

effv_status effv_emit_smt(effv_session *s, const char *vc_id, const char **out) {
  return guard(s, [&] {
    if (auto st = need_program(s)) return st;
    for (const auto &vc : with_vcs(s).vcs) {
      if (vc.id != (vc_id ? vc_id : "")) continue;
      s->out1 = effv::emit_smtlib(vc, s->program->translation->ir, s->options.solvers.front().logic);
      if (out) *out = s->out1.c_str();
      return EFFV_OK;
    }
    effv::fail(effv::ErrorKind::Usage, {}, fmt::format("no VC with id '{}'", vc_id ? vc_id : ""));
  });
}

effv_status effv_dump_smt(effv_session *s, const char *dir) {
  return guard(s, [&] {
    if (auto st = need_program(s)) return st;
    effv::dump_smt(with_vcs(s), dir ? dir : ".");
    return EFFV_OK;
  });
}

effv_status effv_prove(effv_session *s, int *all_valid, const char **text, const char **json) {
  return guard(s, [&] {
    if (auto st = need_program(s)) return st;
    auto &p = with_vcs(s);
    auto r = effv::prove(p, s->options);
    s->out1 = effv::prove_text(p, r);
    s->out2 = effv::prove_json(p, r);
    if (all_valid) *all_valid = r.all_valid() ? 1 : 0;
    if (text) *text = s->out1.c_str();
    if (json) *json = s->out2.c_str();
    return EFFV_OK;
  });
}

effv_status effv_run(effv_session *s, const char *entry, const char *const *args, size_t nargs, int checked,
                     int *outcome, const char **text, const char **trace_json) {
  return guard(s, [&] {
    if (auto st = need_program(s)) return st;
    std::vector<effv::ValuePtr> vals;
    for (size_t i = 0; i < nargs; ++i) vals.push_back(effv::parse_value(args[i] ? args[i] : ""));
    effv::RunOptions ro;
    ro.fuel = s->options.fuel;
    ro.ambient_unit_handler = true;
    const auto &tp = *s->program->typed;
    auto r = checked ? effv::run_checked(tp, entry ? entry : "", vals, ro) : effv::run(tp, entry ? entry : "", vals, ro);
    switch (r.status) {
      case effv::RunStatus::Value:
        s->out1 = fmt::format("value: {}\nstore: {}\n", effv::value_str(r.value), effv::store_str(r.final_store));
        break;
      case effv::RunStatus::ContractViolation:
        s->out1 = fmt::format("contract violation: {}\nbefore: {}\nafter: {}\n", r.message,
                              effv::store_str(r.violation->before), effv::store_str(r.violation->after));
        break;
      case effv::RunStatus::RuntimeError:
        s->out1 = fmt::format("runtime error ({}): {}\n", effv::runtime_error_str(r.error), r.message);
        break;
      case effv::RunStatus::PreconditionUnmet: s->out1 = r.message + "\n"; break;
    }
    std::size_t escaped = 0;
    for (const auto &e : r.trace) escaped += e.kind == effv::TraceEvent::Kind::Perform && e.cont < 0;
    if (escaped) s->out1 += fmt::format("effects reaching the top level: {}\n", escaped);
    s->out2 = effv::run_json(r);
    if (outcome) *outcome = static_cast<int>(r.status);
    if (text) *text = s->out1.c_str();
    if (trace_json) *trace_json = s->out2.c_str();
    return EFFV_OK;
  });
}

effv_status effv_oracle(effv_session *s, int *clean, const char **text) {
  return guard(s, [&] {
    if (auto st = need_program(s)) return st;
    auto r = effv::oracle(*s->program, s->options);
    s->out1 = fmt::format("entries: {}\nruns: {} (skipped {} with unmet entry precondition)\n"
                          "contract violations: {}\none-shot violations: {}\nother runtime errors: {}\n",
                          r.entries.empty() ? "(none)" : fmt::format("{}", fmt::join(r.entries, ", ")), r.runs,
                          r.skipped, r.violations, r.one_shot, r.runtime_errors);
    for (const auto &f : r.failures) s->out1 += "  " + f + "\n";
    if (clean) *clean = r.violations == 0 && r.one_shot == 0;
    if (text) *text = s->out1.c_str();
    return EFFV_OK;
  });
}

effv_status effv_bench(effv_session *s, const char *dir, const char **table, const char **json) {
  return guard(s, [&] {
    auto rows = effv::bench(dir ? dir : ".", s->options);
    s->out1 = effv::bench_table(rows);
    s->out2 = effv::bench_json(rows);
    if (table) *table = s->out1.c_str();
    if (json) *json = s->out2.c_str();
    return EFFV_OK;
  });
}

}  // extern "C"
