#include "hb/json_lines.hpp"

#include <algorithm>

namespace hb::json_lines {

namespace {

struct Scanner {
  const std::string& s;
  std::size_t pos = 0;
  int line = 1;
  std::map<std::string, int>& out;

  struct Stop {};

  void skip_ws() {
    while (pos < s.size()) {
      const char c = s[pos];
      if (c == '\n') {
        ++line;
      } else if (c != ' ' && c != '\t' && c != '\r') {
        return;
      }
      ++pos;
    }
  }

  char peek() {
    if (pos >= s.size()) throw Stop{};
    return s[pos];
  }

  std::string string_token() {
    std::string v;
    ++pos;  // opening quote
    while (true) {
      const char c = peek();
      ++pos;
      if (c == '"') return v;
      if (c == '\\') {
        const char e = peek();
        ++pos;
        if (e == 'u') {
          pos += 4;  // keep the escape opaque; keys with \u are rare
          v += '?';
        } else {
          v += e == 'n' ? '\n' : e == 't' ? '\t' : e;
        }
      } else {
        if (c == '\n') ++line;
        v += c;
      }
    }
  }

  static std::string escape(const std::string& key) {
    std::string r;
    for (char c : key) {
      if (c == '~') r += "~0";
      else if (c == '/') r += "~1";
      else r += c;
    }
    return r;
  }

  void value(const std::string& ptr) {
    skip_ws();
    out[ptr] = line;
    const char c = peek();
    if (c == '{') {
      ++pos;
      skip_ws();
      if (peek() == '}') {
        ++pos;
        return;
      }
      while (true) {
        skip_ws();
        if (peek() != '"') throw Stop{};
        const std::string key = string_token();
        skip_ws();
        if (peek() != ':') throw Stop{};
        ++pos;
        value(ptr + "/" + escape(key));
        skip_ws();
        const char d = peek();
        ++pos;
        if (d == '}') return;
        if (d != ',') throw Stop{};
      }
    } else if (c == '[') {
      ++pos;
      skip_ws();
      if (peek() == ']') {
        ++pos;
        return;
      }
      for (int i = 0;; ++i) {
        value(ptr + "/" + std::to_string(i));
        skip_ws();
        const char d = peek();
        ++pos;
        if (d == ']') return;
        if (d != ',') throw Stop{};
      }
    } else if (c == '"') {
      string_token();
    } else {
      // number or literal
      while (pos < s.size()) {
        const char d = s[pos];
        if (d == ',' || d == '}' || d == ']' || d == ' ' || d == '\n' || d == '\t' || d == '\r') break;
        ++pos;
      }
    }
  }
};

}  // namespace

std::map<std::string, int> pointer_lines(const std::string& text) {
  std::map<std::string, int> out;
  Scanner sc{text, 0, 1, out};
  try {
    sc.value("");
  } catch (const Scanner::Stop&) {
  }
  return out;
}

int line_of_offset(const std::string& text, std::size_t byte) {
  int line = 1;
  const std::size_t end = std::min(byte, text.size());
  for (std::size_t i = 0; i < end; ++i) {
    if (text[i] == '\n') ++line;
  }
  return line;
}

}  // namespace hb::json_lines
