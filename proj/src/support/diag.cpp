#include "support/diag.hpp"

#include <fmt/format.h>

namespace effv {

std::string Span::str() const {
  if (empty()) return "?";
  return fmt::format("{}:{}", line, col);
}

const char *error_kind_name(ErrorKind k) {
  switch (k) {
    case ErrorKind::Syntax: return "syntax error";
    case ErrorKind::Semantic: return "semantic error";
    case ErrorKind::Type: return "type error";
    case ErrorKind::Effect: return "effect error";
    case ErrorKind::Translate: return "translation error";
    case ErrorKind::WellFormed: return "ill-formed IR";
    case ErrorKind::VcGen: return "vc generation error";
    case ErrorKind::Smt: return "smt error";
    case ErrorKind::Runtime: return "runtime error";
    case ErrorKind::Usage: return "usage error";
    case ErrorKind::Internal: return "internal error";
  }
  return "error";
}

Error::Error(ErrorKind kind, Span span, std::string msg)
    : std::runtime_error(fmt::format("{}: {}: {}", span.str(), error_kind_name(kind), msg)),
      kind_(kind),
      span_(span),
      msg_(std::move(msg)) {}

void fail(ErrorKind kind, Span span, std::string msg) { throw Error(kind, span, std::move(msg)); }

}  // namespace effv
