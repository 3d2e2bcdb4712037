#pragma once

#include <string_view>

#include "surface/ast.hpp"

namespace effv {

/// Parses a complete `.eff` source file. Throws Error (Syntax or Semantic)
/// with the offending location; syntax errors list the expected tokens.
SourceProgram parse_program(std::string_view text);

/// Parses a standalone specification term (used by tests and tools).
TermPtr parse_term(std::string_view text);

/// Parses a standalone type.
TypePtr parse_type(std::string_view text);

}  // namespace effv
