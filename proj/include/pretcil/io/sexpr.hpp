#pragma once

#include <cctype>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace pretcil::io {

class SyntaxError : public std::runtime_error {
public:
    SyntaxError(const std::string& what, std::size_t line, std::size_t column)
        : std::runtime_error(std::to_string(line) + ":" + std::to_string(column) + ": " + what),
          line_(line),
          column_(column) {}
    std::size_t line() const { return line_; }
    std::size_t column() const { return column_; }

private:
    std::size_t line_;
    std::size_t column_;
};

struct SExpr {
    std::string token;  // empty for lists
    std::vector<SExpr> items;
    bool is_list = false;
    std::size_t line = 0;
    std::size_t column = 0;

    bool is_token() const { return !is_list; }
    bool is(std::string_view t) const { return !is_list && token == t; }
    // First element of a list when it is a keyword token, else "".
    std::string_view head() const {
        if (!is_list || items.empty() || items.front().is_list) return {};
        return items.front().token;
    }
};

// Reads whitespace-separated tokens and parenthesised lists; ';' starts a
// comment that runs to end of line.
class SExprReader {
public:
    explicit SExprReader(std::string_view text) : text_(text) {}

    std::vector<SExpr> read_all() {
        std::vector<SExpr> out;
        skip_space();
        while (pos_ < text_.size()) {
            out.push_back(read());
            skip_space();
        }
        return out;
    }

private:
    SExpr read() {
        skip_space();
        if (pos_ >= text_.size()) throw SyntaxError("unexpected end of input", line_, col_);
        SExpr node;
        node.line = line_;
        node.column = col_;
        const char c = text_[pos_];
        if (c == ')') throw SyntaxError("unexpected ')'", line_, col_);
        if (c == '(') {
            node.is_list = true;
            advance();
            for (;;) {
                skip_space();
                if (pos_ >= text_.size()) {
                    throw SyntaxError("unterminated list opened here", node.line, node.column);
                }
                if (text_[pos_] == ')') {
                    advance();
                    break;
                }
                node.items.push_back(read());
            }
            return node;
        }
        while (pos_ < text_.size()) {
            const char t = text_[pos_];
            if (std::isspace(static_cast<unsigned char>(t)) || t == '(' || t == ')' || t == ';') break;
            node.token.push_back(t);
            advance();
        }
        return node;
    }

    void skip_space() {
        while (pos_ < text_.size()) {
            const char c = text_[pos_];
            if (c == ';') {
                while (pos_ < text_.size() && text_[pos_] != '\n') advance();
            } else if (std::isspace(static_cast<unsigned char>(c))) {
                advance();
            } else {
                break;
            }
        }
    }

    void advance() {
        if (text_[pos_] == '\n') {
            ++line_;
            col_ = 1;
        } else {
            ++col_;
        }
        ++pos_;
    }

    std::string_view text_;
    std::size_t pos_ = 0;
    std::size_t line_ = 1;
    std::size_t col_ = 1;
};

inline std::vector<SExpr> read_sexprs(std::string_view text) { return SExprReader(text).read_all(); }

}  // namespace pretcil::io
