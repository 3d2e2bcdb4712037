#pragma once

#include <string>

#include "surface/ast.hpp"

namespace effv {

/// Prints a program in the concrete syntax accepted by parse_program.
std::string pretty_print(const SourceProgram &p);

std::string expr_str(const ExprPtr &e);
std::string spec_str(const SpecClauses &s);

/// Structural equality ignoring source spans and elaborated types.
bool program_equal(const SourceProgram &a, const SourceProgram &b);
bool expr_equal(const ExprPtr &a, const ExprPtr &b);

}  // namespace effv
