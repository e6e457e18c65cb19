#include "stochlog/reader.hpp"

#include "stochlog/error.hpp"
#include "stochlog/ops.hpp"

#include <cctype>
#include <optional>
#include <string>

namespace stochlog {
namespace {

enum class Tok { Atom, QuotedAtom, Var, Number, Punct, End, Eof };

struct Token {
    Tok kind = Tok::Eof;
    std::string text;
    std::size_t line = 1;
    std::size_t column = 1;
    bool layout_before = false; // whitespace or comment precedes the token
};

bool symbol_char(char c) { return std::string_view("+-*/\\^<>=~:.?@#&$").find(c) != std::string_view::npos; }
bool alnum(char c) { return std::isalnum(static_cast<unsigned char>(c)) || c == '_'; }

class Lexer {
public:
    explicit Lexer(std::string_view src) : src_(src) {}

    Token next() {
        Token tok;
        tok.layout_before = skip_layout();
        tok.line = line_;
        tok.column = column_;
        if (pos_ >= src_.size()) {
            tok.kind = Tok::Eof;
            return tok;
        }
        const char c = src_[pos_];
        if (std::isdigit(static_cast<unsigned char>(c))) {
            tok.kind = Tok::Number;
            tok.text = read_number();
            return tok;
        }
        if (std::isupper(static_cast<unsigned char>(c)) || c == '_') {
            tok.kind = Tok::Var;
            while (pos_ < src_.size() && alnum(src_[pos_]))
                tok.text += advance();
            return tok;
        }
        if (std::islower(static_cast<unsigned char>(c))) {
            tok.kind = Tok::Atom;
            while (pos_ < src_.size() && alnum(src_[pos_]))
                tok.text += advance();
            return tok;
        }
        if (c == '\'' || c == '"') {
            tok.kind = Tok::QuotedAtom;
            tok.text = read_quoted(c, tok);
            return tok;
        }
        if (c == '.' && (pos_ + 1 >= src_.size() || std::isspace(static_cast<unsigned char>(src_[pos_ + 1])) ||
                         src_[pos_ + 1] == '%')) {
            advance();
            tok.kind = Tok::End;
            tok.text = ".";
            return tok;
        }
        if (symbol_char(c)) {
            tok.kind = Tok::Atom;
            while (pos_ < src_.size() && symbol_char(src_[pos_]))
                tok.text += advance();
            return tok;
        }
        if (c == '!' || c == ';') {
            tok.kind = Tok::Atom;
            tok.text = std::string(1, advance());
            return tok;
        }
        if (std::string_view("()[]{},|").find(c) != std::string_view::npos) {
            tok.kind = Tok::Punct;
            tok.text = std::string(1, advance());
            return tok;
        }
        throw ParseError(std::string("unexpected character '") + c + "'", line_, column_);
    }

private:
    char advance() {
        const char c = src_[pos_++];
        if (c == '\n') {
            ++line_;
            column_ = 1;
        } else {
            ++column_;
        }
        return c;
    }

    bool skip_layout() {
        bool skipped = false;
        while (pos_ < src_.size()) {
            const char c = src_[pos_];
            if (std::isspace(static_cast<unsigned char>(c))) {
                advance();
                skipped = true;
            } else if (c == '%') {
                while (pos_ < src_.size() && src_[pos_] != '\n')
                    advance();
                skipped = true;
            } else if (c == '/' && pos_ + 1 < src_.size() && src_[pos_ + 1] == '*') {
                const std::size_t l = line_, col = column_;
                advance();
                advance();
                while (pos_ + 1 < src_.size() && !(src_[pos_] == '*' && src_[pos_ + 1] == '/'))
                    advance();
                if (pos_ + 1 >= src_.size())
                    throw ParseError("unterminated block comment", l, col);
                advance();
                advance();
                skipped = true;
            } else {
                break;
            }
        }
        return skipped;
    }

    std::string read_number() {
        std::string text;
        while (pos_ < src_.size() && std::isdigit(static_cast<unsigned char>(src_[pos_])))
            text += advance();
        if (pos_ + 1 < src_.size() && (src_[pos_] == '.' || src_[pos_] == 'r') &&
            std::isdigit(static_cast<unsigned char>(src_[pos_ + 1]))) {
            text += advance();
            while (pos_ < src_.size() && std::isdigit(static_cast<unsigned char>(src_[pos_])))
                text += advance();
        }
        return text;
    }

    std::string read_quoted(char quote, const Token &tok) {
        advance();
        std::string text;
        while (true) {
            if (pos_ >= src_.size())
                throw ParseError("unterminated quoted atom", tok.line, tok.column);
            char c = advance();
            if (c == quote) {
                if (pos_ < src_.size() && src_[pos_] == quote) {
                    text += advance();
                    continue;
                }
                return text;
            }
            if (c == '\\' && pos_ < src_.size()) {
                const char e = advance();
                switch (e) {
                case 'n': text += '\n'; break;
                case 't': text += '\t'; break;
                default: text += e; break;
                }
                continue;
            }
            text += c;
        }
    }

    std::string_view src_;
    std::size_t pos_ = 0;
    std::size_t line_ = 1;
    std::size_t column_ = 1;
};

class Parser {
public:
    explicit Parser(std::string_view src) : lexer_(src) { shift(); }

    bool at_eof() const { return cur_.kind == Tok::Eof; }
    const Token &current() const { return cur_; }

    /// Parses one clause up to and including the end token.
    Term clause() {
        anon_ = 0;
        Term t = parse(1200).first;
        if (cur_.kind != Tok::End)
            fail("expected '.' at end of clause");
        shift();
        return t;
    }

    Term lone_term() {
        anon_ = 0;
        Term t = parse(1200).first;
        if (cur_.kind == Tok::End)
            shift();
        if (cur_.kind != Tok::Eof)
            fail("unexpected trailing input");
        return t;
    }

private:
    [[noreturn]] void fail(const std::string &msg) const {
        throw ParseError(msg + (cur_.kind == Tok::Eof ? " (at end of input)" : " near '" + cur_.text + "'"), cur_.line,
                         cur_.column);
    }

    void shift() {
        cur_ = lexer_.next();
    }

    bool is_punct(const Token &t, char c) const { return t.kind == Tok::Punct && t.text.size() == 1 && t.text[0] == c; }

    bool starts_term(const Token &t) const {
        switch (t.kind) {
        case Tok::Atom:
            return !infix_operator(t.text) || prefix_operator(t.text);
        case Tok::QuotedAtom:
        case Tok::Var:
        case Tok::Number:
            return true;
        case Tok::Punct:
            return is_punct(t, '(') || is_punct(t, '[') || is_punct(t, '{');
        default:
            return false;
        }
    }

    std::optional<std::pair<std::string, OpDef>> infix_here() const {
        if (cur_.kind == Tok::Atom) {
            if (auto op = infix_operator(cur_.text))
                return std::make_pair(cur_.text, *op);
        } else if (is_punct(cur_, ',')) {
            return std::make_pair(std::string(","), *infix_operator(","));
        } else if (is_punct(cur_, '|')) {
            return std::make_pair(std::string(";"), OpDef{1100, OpType::xfy});
        }
        return std::nullopt;
    }

    std::pair<Term, int> parse(int max_priority) {
        auto [left, left_priority] = primary(max_priority);
        while (true) {
            auto op = infix_here();
            if (!op)
                break;
            const auto &[name, def] = *op;
            const int left_max = def.type == OpType::yfx ? def.priority : def.priority - 1;
            const int right_max = def.type == OpType::xfy ? def.priority : def.priority - 1;
            if (def.priority > max_priority || left_priority > left_max)
                break;
            shift();
            Term right = parse(right_max).first;
            left = Term::compound(name, {left, right});
            left_priority = def.priority;
        }
        return {left, left_priority};
    }

    std::vector<Term> arguments() {
        std::vector<Term> args;
        shift(); // '('
        args.push_back(parse(999).first);
        while (is_punct(cur_, ',')) {
            shift();
            args.push_back(parse(999).first);
        }
        if (!is_punct(cur_, ')'))
            fail("expected ')' after arguments");
        shift();
        return args;
    }

    Term variable(const std::string &name) {
        if (name == "_")
            return Term::variable("_#" + std::to_string(anon_++));
        return Term::variable(name);
    }

    std::pair<Term, int> primary(int max_priority) {
        Token tok = cur_;
        switch (tok.kind) {
        case Tok::Number:
            shift();
            return {Term::number(Number::parse(tok.text)), 0};
        case Tok::Var:
            shift();
            return {variable(tok.text), 0};
        case Tok::QuotedAtom:
        case Tok::Atom: {
            shift();
            if (is_punct(cur_, '(') && !cur_.layout_before)
                return {Term::compound(tok.text, arguments()), 0};
            if (tok.kind == Tok::Atom) {
                if (tok.text == "-" && cur_.kind == Tok::Number && !cur_.layout_before) {
                    Token num = cur_;
                    shift();
                    return {Term::number(Number::parse("-" + num.text)), 0};
                }
                if (auto op = prefix_operator(tok.text); op && starts_term(cur_) && !infix_here_is_terminator()) {
                    const int priority = op->priority <= max_priority ? op->priority : 999;
                    const int arg_max = op->type == OpType::fy ? priority : priority - 1;
                    Term operand = parse(arg_max).first;
                    return {Term::compound(tok.text, {operand}), priority};
                }
            }
            return {Term::atom(tok.text), 0};
        }
        case Tok::Punct:
            break;
        case Tok::End:
            fail("unexpected end of clause");
        case Tok::Eof:
            fail("unexpected end of input");
        }
        if (is_punct(tok, '(')) {
            shift();
            Term inner = parse(1200).first;
            if (!is_punct(cur_, ')'))
                fail("expected ')'");
            shift();
            return {inner, 0};
        }
        if (is_punct(tok, '[')) {
            shift();
            if (is_punct(cur_, ']')) {
                shift();
                return {Term::nil(), 0};
            }
            std::vector<Term> items{parse(999).first};
            while (is_punct(cur_, ',')) {
                shift();
                items.push_back(parse(999).first);
            }
            Term tail = Term::nil();
            if (is_punct(cur_, '|')) {
                shift();
                tail = parse(999).first;
            }
            if (!is_punct(cur_, ']'))
                fail("expected ']' to close list");
            shift();
            return {Term::list(items, tail), 0};
        }
        if (is_punct(tok, '{')) {
            shift();
            if (is_punct(cur_, '}')) {
                shift();
                return {Term::atom("{}"), 0};
            }
            Term inner = parse(1200).first;
            if (!is_punct(cur_, '}'))
                fail("expected '}'");
            shift();
            return {Term::compound("{}", {inner}), 0};
        }
        fail("unexpected token");
    }

    // A prefix-operator atom directly followed by an infix operator is an operand,
    // e.g. the `-` in `o(-)` or `[+]` is handled by starts_term; this catches `- = X`.
    bool infix_here_is_terminator() const {
        return cur_.kind == Tok::Atom && infix_operator(cur_.text) && !prefix_operator(cur_.text);
    }

    Lexer lexer_;
    Token cur_;
    std::size_t anon_ = 0;
};

} // namespace

std::vector<ReadClause> read_clauses(std::string_view source) {
    Parser parser(source);
    std::vector<ReadClause> out;
    while (!parser.at_eof()) {
        ReadClause rc;
        rc.line = parser.current().line;
        rc.column = parser.current().column;
        rc.term = parser.clause();
        out.push_back(std::move(rc));
    }
    return out;
}

Term read_term(std::string_view text) {
    Parser parser(text);
    return parser.lone_term();
}

} // namespace stochlog
