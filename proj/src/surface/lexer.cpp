#include "surface/lexer.hpp"

#include <array>
#include <cctype>

namespace effv {

namespace {

constexpr std::array<std::string_view, 19> kSymbols = {
    "<->", "::", ":=", "->", "<-", "<=", ">=", "<>", "&&", "||", "[@", ".(", "(", ")", "[", "]", "{", "}", ","};

constexpr std::string_view kSingle = ";:=<>+-*/!.|_";

class Lexer {
 public:
  explicit Lexer(std::string_view src) : src_(src) {}

  std::vector<Token> run() {
    std::vector<Token> out;
    int spec_depth = 0;
    for (;;) {
      skip_space();
      if (eof()) break;
      Span start = here();
      if (starts_with("(*@")) {
        if (spec_depth) fail(ErrorKind::Syntax, start, "nested specification block");
        advance(3);
        ++spec_depth;
        out.push_back({Token::Kind::SpecOpen, "(*@", finish(start)});
        continue;
      }
      if (starts_with("(*") && !starts_with("(*)")) {
        skip_comment();
        continue;
      }
      if (starts_with("*)")) {
        if (!spec_depth) fail(ErrorKind::Syntax, start, "unmatched comment close");
        advance(2);
        --spec_depth;
        out.push_back({Token::Kind::SpecClose, "*)", finish(start)});
        continue;
      }
      char c = peek();
      if (std::isdigit(static_cast<unsigned char>(c))) {
        std::string num;
        while (!eof() && std::isdigit(static_cast<unsigned char>(peek()))) num += get();
        out.push_back({Token::Kind::Int, num, finish(start)});
        continue;
      }
      if (std::isalpha(static_cast<unsigned char>(c)) || (c == '_' && is_ident_char(peek(1)))) {
        std::string id;
        while (!eof() && is_ident_char(peek())) id += get();
        bool upper = std::isupper(static_cast<unsigned char>(id[0]));
        out.push_back({upper ? Token::Kind::UIdent : Token::Kind::Ident, id, finish(start)});
        continue;
      }
      bool matched = false;
      for (auto s : kSymbols) {
        if (starts_with(s)) {
          advance(s.size());
          out.push_back({Token::Kind::Sym, std::string(s), finish(start)});
          matched = true;
          break;
        }
      }
      if (matched) continue;
      if (kSingle.find(c) != std::string_view::npos) {
        advance(1);
        out.push_back({Token::Kind::Sym, std::string(1, c), finish(start)});
        continue;
      }
      fail(ErrorKind::Syntax, start, std::string("unexpected character '") + c + "'");
    }
    if (spec_depth) fail(ErrorKind::Syntax, here(), "unterminated specification block");
    out.push_back({Token::Kind::Eof, "", here()});
    return out;
  }

 private:
  static bool is_ident_char(char c) {
    return std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '\'';
  }
  bool eof() const { return pos_ >= src_.size(); }
  char peek(size_t off = 0) const { return pos_ + off < src_.size() ? src_[pos_ + off] : '\0'; }
  bool starts_with(std::string_view s) const { return src_.substr(pos_, s.size()) == s; }
  char get() {
    char c = src_[pos_++];
    if (c == '\n') {
      ++line_;
      col_ = 1;
    } else {
      ++col_;
    }
    return c;
  }
  void advance(size_t n) {
    for (size_t i = 0; i < n; ++i) get();
  }
  Span here() const { return Span{line_, col_, line_, col_}; }
  Span finish(Span s) const {
    s.end_line = line_;
    s.end_col = col_;
    return s;
  }
  void skip_space() {
    while (!eof() && std::isspace(static_cast<unsigned char>(peek()))) get();
  }
  void skip_comment() {
    Span start = here();
    advance(2);
    int depth = 1;
    while (depth > 0) {
      if (eof()) fail(ErrorKind::Syntax, start, "unterminated comment");
      if (starts_with("(*")) {
        advance(2);
        ++depth;
      } else if (starts_with("*)")) {
        advance(2);
        --depth;
      } else {
        get();
      }
    }
  }

  std::string_view src_;
  size_t pos_ = 0;
  std::uint32_t line_ = 1;
  std::uint32_t col_ = 1;
};

}  // namespace

std::vector<Token> lex(std::string_view src) { return Lexer(src).run(); }

}  // namespace effv
