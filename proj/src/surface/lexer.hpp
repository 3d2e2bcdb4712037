#pragma once

#include <string>
#include <string_view>
#include <vector>

#include "support/diag.hpp"

namespace effv {

struct Token {
  enum class Kind { Ident, UIdent, Int, Sym, SpecOpen, SpecClose, Eof };
  Kind kind;
  std::string text;
  Span span;

  bool is(Kind k, std::string_view t) const { return kind == k && text == t; }
  bool sym(std::string_view t) const { return kind == Kind::Sym && text == t; }
  bool ident(std::string_view t) const { return kind == Kind::Ident && text == t; }
};

/// Splits source text into tokens. Ordinary comments `(* ... *)` nest and
/// are dropped; `(*@` opens a specification block closed by `*)`.
std::vector<Token> lex(std::string_view src);

}  // namespace effv
