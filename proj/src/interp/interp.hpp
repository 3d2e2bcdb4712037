#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <random>
#include <string>
#include <string_view>
#include <vector>

#include "sema/sema.hpp"

namespace effv {

struct Value;
using ValuePtr = std::shared_ptr<const Value>;

/// Values of state variables by name. Arrays are stored as Array values.
using Store = std::map<std::string, ValuePtr>;

struct Closure;

struct Value {
  enum class Kind { Int, Bool, Unit, Ctor, Tuple, Array, Closure, Cont, State };

  Kind kind = Kind::Unit;
  std::int64_t ival = 0;  // Int, Bool, Cont id
  std::string name;       // Ctor
  std::vector<ValuePtr> items;  // Ctor args, Tuple, Array cells
  std::shared_ptr<const Closure> clo;
  std::shared_ptr<const Store> state;
};

namespace val {
ValuePtr int_(std::int64_t v);
ValuePtr bool_(bool b);
ValuePtr unit();
ValuePtr ctor(std::string name, std::vector<ValuePtr> args = {});
ValuePtr tuple(std::vector<ValuePtr> items);
ValuePtr array(std::vector<ValuePtr> cells);
ValuePtr list(const std::vector<ValuePtr> &items);
}  // namespace val

bool value_equal(const ValuePtr &a, const ValuePtr &b);
std::string value_str(const ValuePtr &v);
std::string store_str(const Store &s);

/// Parses a literal value: integers, booleans, (), tuples, lists `[a; b]`
/// and constructor applications such as `N (0, E, E)`.
ValuePtr parse_value(std::string_view text);

enum class Blame { Client, Server, Caller, Callee };
const char *blame_str(Blame b);

struct Violation {
  Blame side = Blame::Client;
  std::string subject;  // effect or function name
  std::string clause;
  Store before;  // perform-time or call-time store
  Store after;
  Span span;
};

enum class RunStatus { Value, ContractViolation, RuntimeError, PreconditionUnmet };
const char *run_status_str(RunStatus s);

enum class RuntimeErrorKind { None, UnhandledEffect, OneShot, FuelExhausted, DivisionByZero, IndexOutOfBounds, MatchFailure, Other };
const char *runtime_error_str(RuntimeErrorKind k);

struct TraceEvent {
  enum class Kind { Perform, Continue };
  Kind kind = Kind::Perform;
  std::string effect;
  ValuePtr payload;  // perform argument or continue reply
  Store before;
  Store after;
  int cont = 0;
};

struct RunResult {
  RunStatus status = RunStatus::Value;
  ValuePtr value;
  RuntimeErrorKind error = RuntimeErrorKind::None;
  std::string message;
  std::optional<Violation> violation;
  std::vector<TraceEvent> trace;
  Store final_store;
  std::uint64_t steps = 0;
  std::uint64_t try_installs = 0;
  std::uint64_t handler_pushes = 0;  // installations plus reinstallations on continue
  std::uint64_t performs_handled = 0;
  std::uint64_t resumes = 0;
  std::uint64_t checks = 0;      // contract clauses evaluated to a definite answer
  std::uint64_t unchecked = 0;   // clauses outside the executable fragment
};

struct RunOptions {
  std::uint64_t fuel = 1'000'000;
  bool checked = false;
  std::optional<Store> store;  // initial store; defaults to the declared initializers
  // Unhandled effects with a unit reply are recorded and resumed with ().
  bool ambient_unit_handler = false;
};

/// Evaluates `entry` applied to `args`. Deep handlers, one-shot continuations.
RunResult run(const TypedProgram &p, const std::string &entry, const std::vector<ValuePtr> &args,
              const RunOptions &opts = {});

/// As run, additionally checking protocol, function and handler contracts.
RunResult run_checked(const TypedProgram &p, const std::string &entry, const std::vector<ValuePtr> &args,
                      RunOptions opts = {});

struct EffectEvent {
  std::string effect;
  ValuePtr payload;
  Store store;
  bool escaped = false;  // reached the ambient handler rather than one in the program
};

/// The perform events of a run, in order, under an ambient handler that
/// resumes escaping unit-reply effects. Throws a Runtime error if the run fails.
std::vector<EffectEvent> enumerate_effects(const TypedProgram &p, const std::string &entry,
                                           const std::vector<ValuePtr> &args, const RunOptions &opts = {});

Store initial_store(const TypedProgram &p);

/// Random inhabitant of a first-order type; recursive types are cut off at depth.
ValuePtr random_value(const TypedProgram &p, const TypePtr &t, std::mt19937_64 &rng, int depth = 3);
Store random_store(const TypedProgram &p, std::mt19937_64 &rng);

/// Whether every parameter of `entry` has a type random_value can produce.
bool has_first_order_params(const TypedProgram &p, const std::string &entry);

/// The trace as JSON: events with effect name, payload and the store before and after.
std::string trace_json(const RunResult &r);

}  // namespace effv
