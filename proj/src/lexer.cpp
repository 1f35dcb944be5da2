#include <array>
#include <cstdint>
#include <cstdio>
#include <cctype>
#include <string_view>

#include "pacvd/errors.hpp"
#include "pacvd/frontend.hpp"

namespace pacvd {

std::optional<std::size_t> find_invalid_utf8(std::string_view text) {
    std::size_t i = 0;
    const std::size_t n = text.size();
    while (i < n) {
        const auto c = static_cast<unsigned char>(text[i]);
        std::size_t len = 0;
        std::uint32_t cp = 0;
        if (c < 0x80) {
            ++i;
            continue;
        } else if ((c & 0xE0) == 0xC0) {
            len = 2;
            cp = c & 0x1F;
        } else if ((c & 0xF0) == 0xE0) {
            len = 3;
            cp = c & 0x0F;
        } else if ((c & 0xF8) == 0xF0) {
            len = 4;
            cp = c & 0x07;
        } else {
            return i;
        }
        if (i + len > n) return i;
        for (std::size_t k = 1; k < len; ++k) {
            const auto cc = static_cast<unsigned char>(text[i + k]);
            if ((cc & 0xC0) != 0x80) return i;
            cp = (cp << 6) | (cc & 0x3F);
        }
        // overlong forms, surrogates, out of range
        if ((len == 2 && cp < 0x80) || (len == 3 && cp < 0x800) || (len == 4 && cp < 0x10000) ||
            (cp >= 0xD800 && cp <= 0xDFFF) || cp > 0x10FFFF)
            return i;
        i += len;
    }
    return std::nullopt;
}

namespace lex {

namespace {

constexpr std::array<std::string_view, 47> kKeywords = {
    "auto",     "break",    "case",     "char",     "const",    "continue", "default",
    "do",       "double",   "else",     "enum",     "extern",   "float",    "for",
    "goto",     "if",       "inline",   "int",      "long",     "register", "restrict",
    "return",   "short",    "signed",   "sizeof",   "static",   "struct",   "switch",
    "typedef",  "union",    "unsigned", "void",     "volatile", "while",    "_Bool",
    "bool",     "asm",      "__asm__",  "__asm",    "__inline", "__inline__", "__restrict",
    "__volatile__", "_Static_assert", "__attribute__", "__extension__", "__const",
};

// Longest first within each leading character.
constexpr std::array<std::string_view, 48> kPuncts = {
    "...", "<<=", ">>=", "->", "++", "--", "<<", ">>", "<=", ">=", "==", "!=",
    "&&",  "||",  "+=",  "-=", "*=", "/=", "%=", "&=", "^=", "|=", "##", "+",
    "-",   "*",   "/",   "%",  "<",  ">",  "=",  "!",  "&",  "|",  "^",  "~",
    "?",   ":",   ";",   ",",  ".",  "(",  ")",  "[",  "]",  "{",  "}",  "#",
};

bool ident_start(char c) { return std::isalpha(static_cast<unsigned char>(c)) || c == '_'; }
bool ident_char(char c) { return std::isalnum(static_cast<unsigned char>(c)) || c == '_'; }

std::string describe(char c) {
    if (std::isprint(static_cast<unsigned char>(c))) return std::string("'") + c + "'";
    char buf[8];
    std::snprintf(buf, sizeof buf, "0x%02x", static_cast<unsigned char>(c));
    return buf;
}

}  // namespace

bool is_keyword(std::string_view word) {
    for (auto k : kKeywords)
        if (k == word) return true;
    return false;
}

std::vector<Token> tokenize(std::string_view src) {
    std::vector<Token> out;
    std::size_t i = 0;
    int line = 1;
    std::size_t line_start = 0;
    bool at_line_start = true;
    const std::size_t n = src.size();

    auto col = [&](std::size_t pos) { return static_cast<int>(pos - line_start) + 1; };
    auto newline = [&](std::size_t pos) {
        ++line;
        line_start = pos + 1;
        at_line_start = true;
    };

    while (i < n) {
        const char c = src[i];
        if (c == '\n') {
            newline(i);
            ++i;
            continue;
        }
        if (c == ' ' || c == '\t' || c == '\r' || c == '\f' || c == '\v') {
            ++i;
            continue;
        }
        if (c == '\\' && i + 1 < n && src[i + 1] == '\n') {
            newline(i + 1);
            i += 2;
            continue;
        }
        if (c == '/' && i + 1 < n && src[i + 1] == '/') {
            while (i < n && src[i] != '\n') ++i;
            continue;
        }
        if (c == '/' && i + 1 < n && src[i + 1] == '*') {
            const int start_line = line;
            const int start_col = col(i);
            i += 2;
            bool closed = false;
            while (i < n) {
                if (src[i] == '*' && i + 1 < n && src[i + 1] == '/') {
                    i += 2;
                    closed = true;
                    break;
                }
                if (src[i] == '\n') newline(i);
                ++i;
            }
            if (!closed) throw ParseError(start_line, start_col, "'*/'", "end of input");
            continue;
        }
        if (c == '#' && at_line_start) {
            // preprocessor residue: skip the logical line
            while (i < n && src[i] != '\n') {
                if (src[i] == '\\' && i + 1 < n && src[i + 1] == '\n') {
                    newline(i + 1);
                    i += 2;
                    continue;
                }
                ++i;
            }
            continue;
        }
        at_line_start = false;
        const std::size_t start = i;
        const int tok_line = line;
        const int tok_col = col(i);

        // string / char literal, with optional encoding prefix
        std::size_t prefix = 0;
        if (c == 'L' || c == 'U' || c == 'u') {
            if (i + 1 < n && (src[i + 1] == '"' || src[i + 1] == '\'')) prefix = 1;
            else if (c == 'u' && i + 2 < n && src[i + 1] == '8' && src[i + 2] == '"') prefix = 2;
        }
        if (src[i + prefix] == '"' || src[i + prefix] == '\'') {
            const char quote = src[i + prefix];
            i += prefix + 1;
            bool closed = false;
            while (i < n) {
                if (src[i] == '\\' && i + 1 < n) {
                    i += 2;
                    continue;
                }
                if (src[i] == '\n') break;
                if (src[i] == quote) {
                    ++i;
                    closed = true;
                    break;
                }
                ++i;
            }
            if (!closed)
                throw ParseError(tok_line, tok_col, quote == '"' ? "closing '\"'" : "closing '''",
                                 "end of line");
            out.push_back({quote == '"' ? TokenKind::String : TokenKind::Char,
                           std::string(src.substr(start, i - start)), start, tok_line, tok_col});
            continue;
        }
        if (ident_start(c)) {
            while (i < n && ident_char(src[i])) ++i;
            out.push_back({TokenKind::Ident, std::string(src.substr(start, i - start)), start,
                           tok_line, tok_col});
            continue;
        }
        if (std::isdigit(static_cast<unsigned char>(c)) ||
            (c == '.' && i + 1 < n && std::isdigit(static_cast<unsigned char>(src[i + 1])))) {
            while (i < n) {
                const char d = src[i];
                if ((d == '+' || d == '-') && i > start &&
                    (src[i - 1] == 'e' || src[i - 1] == 'E' || src[i - 1] == 'p' ||
                     src[i - 1] == 'P') &&
                    !(src[start] == '0' && start + 1 < n &&
                      (src[start + 1] == 'x' || src[start + 1] == 'X') &&
                      (src[i - 1] == 'e' || src[i - 1] == 'E'))) {
                    ++i;
                    continue;
                }
                if (ident_char(d) || d == '.') {
                    ++i;
                    continue;
                }
                break;
            }
            out.push_back({TokenKind::Number, std::string(src.substr(start, i - start)), start,
                           tok_line, tok_col});
            continue;
        }
        bool matched = false;
        for (auto p : kPuncts) {
            if (src.substr(i, p.size()) == p) {
                out.push_back({TokenKind::Punct, std::string(p), start, tok_line, tok_col});
                i += p.size();
                matched = true;
                break;
            }
        }
        if (!matched) throw ParseError(tok_line, tok_col, "a token", describe(c));
    }
    out.push_back({TokenKind::End, "", n, line, col(n)});
    return out;
}

}  // namespace lex
}  // namespace pacvd
