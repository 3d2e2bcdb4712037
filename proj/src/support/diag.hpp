#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace effv {

/// Source span, 1-based lines and columns. An empty span has line 0.
struct Span {
  std::uint32_t line = 0;
  std::uint32_t col = 0;
  std::uint32_t end_line = 0;
  std::uint32_t end_col = 0;

  bool empty() const { return line == 0; }
  std::string str() const;
};

enum class ErrorKind {
  Syntax,
  Semantic,  // name resolution, duplicate decls, protocol conflicts
  Type,
  Effect,    // performs-row violations
  Translate,
  WellFormed,
  VcGen,
  Smt,
  Runtime,
  Usage,
  Internal,
};

const char *error_kind_name(ErrorKind k);

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, Span span, std::string msg);

  ErrorKind kind() const { return kind_; }
  const Span &span() const { return span_; }
  const std::string &message() const { return msg_; }

 private:
  ErrorKind kind_;
  Span span_;
  std::string msg_;
};

[[noreturn]] void fail(ErrorKind kind, Span span, std::string msg);

struct Diagnostic {
  ErrorKind kind;
  Span span;
  std::string message;
  std::string provenance;  // rule or routine that produced the offending node
};

}  // namespace effv
