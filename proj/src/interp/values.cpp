#include <fmt/format.h>
#include <fmt/ranges.h>

#include <algorithm>
#include <functional>

#include <json.hpp>

#include "interp/interp.hpp"

namespace effv {

namespace val {
ValuePtr int_(std::int64_t v) {
  auto x = std::make_shared<Value>();
  x->kind = Value::Kind::Int;
  x->ival = v;
  return x;
}
ValuePtr bool_(bool b) {
  static const ValuePtr t = [] {
    auto x = std::make_shared<Value>();
    x->kind = Value::Kind::Bool;
    x->ival = 1;
    return x;
  }();
  static const ValuePtr f = [] {
    auto x = std::make_shared<Value>();
    x->kind = Value::Kind::Bool;
    return x;
  }();
  return b ? t : f;
}
ValuePtr unit() {
  static const ValuePtr u = std::make_shared<Value>();
  return u;
}
ValuePtr ctor(std::string name, std::vector<ValuePtr> args) {
  auto x = std::make_shared<Value>();
  x->kind = Value::Kind::Ctor;
  x->name = std::move(name);
  x->items = std::move(args);
  return x;
}
ValuePtr tuple(std::vector<ValuePtr> items) {
  auto x = std::make_shared<Value>();
  x->kind = Value::Kind::Tuple;
  x->items = std::move(items);
  return x;
}
ValuePtr array(std::vector<ValuePtr> cells) {
  auto x = std::make_shared<Value>();
  x->kind = Value::Kind::Array;
  x->items = std::move(cells);
  return x;
}
ValuePtr list(const std::vector<ValuePtr> &items) {
  ValuePtr acc = ctor("[]");
  for (size_t i = items.size(); i-- > 0;) acc = ctor("::", {items[i], acc});
  return acc;
}
}  // namespace val

bool value_equal(const ValuePtr &a, const ValuePtr &b) {
  if (a == b) return true;
  if (!a || !b || a->kind != b->kind) return false;
  switch (a->kind) {
    case Value::Kind::Int:
    case Value::Kind::Bool:
    case Value::Kind::Cont: return a->ival == b->ival;
    case Value::Kind::Unit: return true;
    case Value::Kind::Ctor:
      if (a->name != b->name) return false;
      [[fallthrough]];
    case Value::Kind::Tuple:
    case Value::Kind::Array:
      if (a->items.size() != b->items.size()) return false;
      for (size_t i = 0; i < a->items.size(); ++i)
        if (!value_equal(a->items[i], b->items[i])) return false;
      return true;
    case Value::Kind::Closure: return a->clo == b->clo;
    case Value::Kind::State: {
      if (a->state->size() != b->state->size()) return false;
      for (const auto &[k, v] : *a->state) {
        auto it = b->state->find(k);
        if (it == b->state->end() || !value_equal(v, it->second)) return false;
      }
      return true;
    }
  }
  return false;
}

namespace {

std::string str(const ValuePtr &v, bool nested) {
  switch (v->kind) {
    case Value::Kind::Int: return v->ival < 0 && nested ? fmt::format("({})", v->ival) : std::to_string(v->ival);
    case Value::Kind::Bool: return v->ival ? "true" : "false";
    case Value::Kind::Unit: return "()";
    case Value::Kind::Ctor: {
      if (v->name == "[]" || v->name == "::") {
        std::vector<std::string> xs;
        const Value *c = v.get();
        while (c->name == "::") {
          xs.push_back(str(c->items[0], false));
          c = c->items[1].get();
        }
        return "[" + fmt::format("{}", fmt::join(xs, "; ")) + "]";
      }
      if (v->items.empty()) return v->name;
      std::string s;
      if (v->items.size() == 1) {
        s = v->name + " " + str(v->items[0], true);
      } else {
        std::vector<std::string> xs;
        for (const auto &x : v->items) xs.push_back(str(x, false));
        s = fmt::format("{} ({})", v->name, fmt::join(xs, ", "));
      }
      return nested ? "(" + s + ")" : s;
    }
    case Value::Kind::Tuple: {
      std::vector<std::string> xs;
      for (const auto &x : v->items) xs.push_back(str(x, false));
      return fmt::format("({})", fmt::join(xs, ", "));
    }
    case Value::Kind::Array: {
      std::vector<std::string> xs;
      for (const auto &x : v->items) xs.push_back(str(x, false));
      return fmt::format("[|{}|]", fmt::join(xs, "; "));
    }
    case Value::Kind::Closure: return "<fun>";
    case Value::Kind::Cont: return fmt::format("<cont {}>", v->ival);
    case Value::Kind::State: return store_str(*v->state);
  }
  return "?";
}

class ValueParser {
 public:
  explicit ValueParser(std::string_view s) : s_(s) {}

  ValuePtr parse() {
    ValuePtr v = value();
    skip();
    if (i_ != s_.size()) error("trailing input");
    return v;
  }

 private:
  [[noreturn]] void error(const std::string &what) const {
    fail(ErrorKind::Usage, {}, fmt::format("cannot parse value '{}': {} at offset {}", s_, what, i_));
  }
  void skip() {
    while (i_ < s_.size() && std::isspace(static_cast<unsigned char>(s_[i_]))) ++i_;
  }
  bool accept(char c) {
    skip();
    if (i_ < s_.size() && s_[i_] == c) {
      ++i_;
      return true;
    }
    return false;
  }
  bool starts_atom() {
    skip();
    if (i_ >= s_.size()) return false;
    char c = s_[i_];
    return std::isalnum(static_cast<unsigned char>(c)) || c == '(' || c == '[' || c == '-';
  }
  std::string word() {
    size_t j = i_;
    while (j < s_.size() && (std::isalnum(static_cast<unsigned char>(s_[j])) || s_[j] == '_' || s_[j] == '\''))
      ++j;
    std::string w(s_.substr(i_, j - i_));
    i_ = j;
    return w;
  }

  ValuePtr value() {
    ValuePtr head = atom(true);
    if (accept(':')) {
      if (!accept(':')) error("expected '::'");
      return val::ctor("::", {head, value()});
    }
    return head;
  }

  ValuePtr atom(bool allow_args) {
    skip();
    if (i_ >= s_.size()) error("unexpected end");
    char c = s_[i_];
    if (c == '-' || std::isdigit(static_cast<unsigned char>(c))) {
      bool neg = c == '-';
      if (neg) ++i_;
      std::string w = word();
      if (w.empty() || !std::all_of(w.begin(), w.end(), [](char d) { return std::isdigit(static_cast<unsigned char>(d)); }))
        error("bad integer");
      std::int64_t n = std::stoll(w);
      return val::int_(neg ? -n : n);
    }
    if (accept('(')) {
      if (accept(')')) return val::unit();
      std::vector<ValuePtr> xs{value()};
      while (accept(',')) xs.push_back(value());
      if (!accept(')')) error("expected ')'");
      return xs.size() == 1 ? xs[0] : val::tuple(xs);
    }
    if (accept('[')) {
      std::vector<ValuePtr> xs;
      if (!accept(']')) {
        xs.push_back(value());
        while (accept(';')) xs.push_back(value());
        if (!accept(']')) error("expected ']'");
      }
      return val::list(xs);
    }
    std::string w = word();
    if (w == "true" || w == "false") return val::bool_(w == "true");
    if (w.empty() || !std::isupper(static_cast<unsigned char>(w[0]))) error("expected a value");
    if (!allow_args || !starts_atom()) return val::ctor(w);
    ValuePtr arg = atom(false);
    if (arg->kind == Value::Kind::Tuple) return val::ctor(w, arg->items);
    return val::ctor(w, {arg});
  }

  std::string_view s_;
  size_t i_ = 0;
};

nlohmann::json store_json(const Store &s) {
  nlohmann::json j = nlohmann::json::object();
  for (const auto &[k, v] : s) j[k] = value_str(v);
  return j;
}

bool mentions(const TypePtr &t, const std::string &name) {
  if (t->kind == Type::Kind::Named && t->name == name) return true;
  for (const auto &a : t->args)
    if (mentions(a, name)) return true;
  return false;
}

}  // namespace

std::string value_str(const ValuePtr &v) { return v ? str(v, false) : "<none>"; }

std::string store_str(const Store &s) {
  std::vector<std::string> xs;
  for (const auto &[k, v] : s) xs.push_back(k + " = " + value_str(v));
  return fmt::format("{{{}}}", fmt::join(xs, "; "));
}

ValuePtr parse_value(std::string_view text) { return ValueParser(text).parse(); }

const char *blame_str(Blame b) {
  switch (b) {
    case Blame::Client: return "client";
    case Blame::Server: return "server";
    case Blame::Caller: return "caller";
    case Blame::Callee: return "callee";
  }
  return "?";
}

const char *run_status_str(RunStatus s) {
  switch (s) {
    case RunStatus::Value: return "value";
    case RunStatus::ContractViolation: return "contract-violation";
    case RunStatus::RuntimeError: return "runtime-error";
    case RunStatus::PreconditionUnmet: return "precondition-unmet";
  }
  return "?";
}

const char *runtime_error_str(RuntimeErrorKind k) {
  switch (k) {
    case RuntimeErrorKind::None: return "none";
    case RuntimeErrorKind::UnhandledEffect: return "unhandled-effect";
    case RuntimeErrorKind::OneShot: return "one-shot-violation";
    case RuntimeErrorKind::FuelExhausted: return "fuel-exhausted";
    case RuntimeErrorKind::DivisionByZero: return "division-by-zero";
    case RuntimeErrorKind::IndexOutOfBounds: return "index-out-of-bounds";
    case RuntimeErrorKind::MatchFailure: return "match-failure";
    case RuntimeErrorKind::Other: return "error";
  }
  return "?";
}

ValuePtr random_value(const TypedProgram &p, const TypePtr &t, std::mt19937_64 &rng, int depth) {
  switch (t->kind) {
    case Type::Kind::Int: return val::int_(std::uniform_int_distribution<int>(-10, 10)(rng));
    case Type::Kind::Bool: return val::bool_(rng() & 1);
    case Type::Kind::Unit: return val::unit();
    case Type::Kind::Tuple: {
      std::vector<ValuePtr> xs;
      for (const auto &a : t->args) xs.push_back(random_value(p, a, rng, depth));
      return val::tuple(xs);
    }
    case Type::Kind::List: {
      int n = depth <= 0 ? 0 : std::uniform_int_distribution<int>(0, 3)(rng);
      std::vector<ValuePtr> xs;
      for (int i = 0; i < n; ++i) xs.push_back(random_value(p, t->args[0], rng, depth - 1));
      return val::list(xs);
    }
    case Type::Kind::Named: {
      const auto &decl = *p.types.at(t->name);
      std::vector<const Constructor *> choices;
      for (const auto &c : decl.ctors) {
        bool rec = false;
        for (const auto &a : c.args) rec = rec || mentions(a, t->name);
        if (depth > 0 || !rec) choices.push_back(&c);
      }
      if (choices.empty()) choices.push_back(&decl.ctors.front());
      const Constructor &c = *choices[std::uniform_int_distribution<size_t>(0, choices.size() - 1)(rng)];
      std::vector<ValuePtr> args;
      for (const auto &a : c.args) args.push_back(random_value(p, a, rng, depth - 1));
      return val::ctor(c.name, args);
    }
    default: fail(ErrorKind::Usage, {}, "cannot generate a random value of type " + type_str(t));
  }
}

Store random_store(const TypedProgram &p, std::mt19937_64 &rng) {
  Store s;
  for (const auto &v : p.state.vars) {
    if (v.is_array) {
      std::vector<ValuePtr> cells;
      for (std::int64_t i = 0; i < v.size; ++i) cells.push_back(random_value(p, v.elem, rng));
      s[v.name] = val::array(cells);
    } else {
      s[v.name] = random_value(p, v.elem, rng);
    }
  }
  return s;
}

bool has_first_order_params(const TypedProgram &p, const std::string &entry) {
  auto it = p.functions.find(entry);
  if (it == p.functions.end()) return false;
  std::function<bool(const TypePtr &)> ok = [&](const TypePtr &t) {
    switch (t->kind) {
      case Type::Kind::Int:
      case Type::Kind::Bool:
      case Type::Kind::Unit:
      case Type::Kind::Named: return true;
      case Type::Kind::List:
      case Type::Kind::Tuple:
        for (const auto &a : t->args)
          if (!ok(a)) return false;
        return true;
      default: return false;
    }
  };
  for (const auto &prm : it->second.params)
    if (!ok(prm.ty)) return false;
  return true;
}

std::string trace_json(const RunResult &r) {
  nlohmann::json j;
  j["status"] = run_status_str(r.status);
  if (r.value) j["value"] = value_str(r.value);
  if (r.status == RunStatus::RuntimeError) {
    j["error"] = runtime_error_str(r.error);
    j["message"] = r.message;
  }
  if (r.violation) {
    j["violation"] = {{"blame", blame_str(r.violation->side)},
                      {"subject", r.violation->subject},
                      {"clause", r.violation->clause},
                      {"before", store_json(r.violation->before)},
                      {"after", store_json(r.violation->after)}};
  }
  nlohmann::json events = nlohmann::json::array();
  for (const auto &e : r.trace) {
    events.push_back({{"event", e.kind == TraceEvent::Kind::Perform ? "perform" : "continue"},
                      {"effect", e.effect},
                      {"payload", value_str(e.payload)},
                      {"continuation", e.cont},
                      {"before", store_json(e.before)},
                      {"after", store_json(e.after)}});
  }
  j["events"] = events;
  j["final_store"] = store_json(r.final_store);
  j["steps"] = r.steps;
  return j.dump(2);
}

}  // namespace effv
