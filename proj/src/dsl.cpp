#include "rdis/dsl.hpp"

#include <cctype>
#include <charconv>
#include <cmath>
#include <sstream>
#include <unordered_map>

namespace rdis {

ParseError::ParseError(const std::string& msg, int line, int column)
    : std::runtime_error("line " + std::to_string(line) + ", column " + std::to_string(column) + ": " + msg),
      line_(line),
      column_(column) {}

namespace {

enum class Tok { Number, Ident, Plus, Minus, Star, Slash, Caret, LParen, RParen, LBracket, RBracket, Comma, End };

struct Token {
    Tok kind = Tok::End;
    std::string_view text;
    double number = 0.0;
    int column = 1;
};

class Lexer {
public:
    Lexer(std::string_view line, int lineno) : s_(line), line_(lineno) { advance(); }

    const Token& peek() const { return cur_; }

    Token take() {
        Token t = cur_;
        advance();
        return t;
    }

    [[noreturn]] void fail(const std::string& msg, int column) const { throw ParseError(msg, line_, column); }
    [[noreturn]] void fail(const std::string& msg) const { fail(msg, cur_.column); }

    Token expect(Tok kind, const char* what) {
        if (cur_.kind != kind) fail(std::string("expected ") + what);
        return take();
    }

private:
    void advance() {
        while (pos_ < s_.size() && std::isspace(static_cast<unsigned char>(s_[pos_]))) ++pos_;
        cur_ = Token{};
        cur_.column = static_cast<int>(pos_) + 1;
        if (pos_ >= s_.size()) return;
        const char c = s_[pos_];
        auto single = [&](Tok k) {
            cur_.kind = k;
            cur_.text = s_.substr(pos_, 1);
            ++pos_;
        };
        switch (c) {
            case '+': return single(Tok::Plus);
            case '-': return single(Tok::Minus);
            case '*': return single(Tok::Star);
            case '/': return single(Tok::Slash);
            case '^': return single(Tok::Caret);
            case '(': return single(Tok::LParen);
            case ')': return single(Tok::RParen);
            case '[': return single(Tok::LBracket);
            case ']': return single(Tok::RBracket);
            case ',': return single(Tok::Comma);
            default: break;
        }
        if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') {
            std::size_t end = pos_;
            while (end < s_.size() &&
                   (std::isdigit(static_cast<unsigned char>(s_[end])) || s_[end] == '.' || s_[end] == 'e' ||
                    s_[end] == 'E' ||
                    ((s_[end] == '+' || s_[end] == '-') && end > pos_ && (s_[end - 1] == 'e' || s_[end - 1] == 'E')))) {
                ++end;
            }
            const auto text = s_.substr(pos_, end - pos_);
            double v = 0.0;
            const auto res = std::from_chars(text.data(), text.data() + text.size(), v);
            if (res.ec != std::errc() || res.ptr != text.data() + text.size()) {
                fail("malformed number '" + std::string(text) + "'", cur_.column);
            }
            cur_.kind = Tok::Number;
            cur_.text = text;
            cur_.number = v;
            pos_ = end;
            return;
        }
        if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
            std::size_t end = pos_;
            while (end < s_.size() && (std::isalnum(static_cast<unsigned char>(s_[end])) || s_[end] == '_')) ++end;
            cur_.kind = Tok::Ident;
            cur_.text = s_.substr(pos_, end - pos_);
            pos_ = end;
            return;
        }
        fail(std::string("unexpected character '") + c + "'", cur_.column);
    }

    std::string_view s_;
    int line_;
    std::size_t pos_ = 0;
    Token cur_;
};

using VarTable = std::unordered_map<std::string, int>;

class ExprParser {
public:
    ExprParser(Lexer& lex, const VarTable& vars, Expr& out) : lex_(lex), vars_(vars), e_(out) {}

    Expr::Ref parse_sum() {
        Expr::Ref lhs = parse_product();
        while (lex_.peek().kind == Tok::Plus || lex_.peek().kind == Tok::Minus) {
            const Op op = lex_.take().kind == Tok::Plus ? Op::Add : Op::Sub;
            lhs = e_.binary(op, lhs, parse_product());
        }
        return lhs;
    }

private:
    Expr::Ref parse_product() {
        Expr::Ref lhs = parse_unary();
        while (lex_.peek().kind == Tok::Star || lex_.peek().kind == Tok::Slash) {
            const Op op = lex_.take().kind == Tok::Star ? Op::Mul : Op::Div;
            lhs = e_.binary(op, lhs, parse_unary());
        }
        return lhs;
    }

    Expr::Ref parse_unary() {
        if (lex_.peek().kind == Tok::Minus) {
            lex_.take();
            // A minus directly on a numeric literal is a negative constant.
            if (lex_.peek().kind == Tok::Number) {
                const Token num = lex_.take();
                if (lex_.peek().kind == Tok::Caret) {
                    return e_.unary(Op::Neg, parse_power_suffix(e_.constant(num.number)));
                }
                return e_.constant(-num.number);
            }
            return e_.unary(Op::Neg, parse_unary());
        }
        return parse_power_suffix(parse_primary());
    }

    Expr::Ref parse_power_suffix(Expr::Ref base) {
        if (lex_.peek().kind != Tok::Caret) return base;
        lex_.take();
        bool paren = false;
        if (lex_.peek().kind == Tok::LParen) {
            lex_.take();
            paren = true;
        }
        bool neg = false;
        if (lex_.peek().kind == Tok::Minus) {
            lex_.take();
            neg = true;
        }
        const Token num = lex_.peek();
        if (num.kind != Tok::Number) lex_.fail("expected integer exponent");
        lex_.take();
        if (num.number != std::floor(num.number) || std::abs(num.number) > 1e6 ||
            num.text.find_first_of(".eE") != std::string_view::npos) {
            lex_.fail("exponent must be an integer literal", num.column);
        }
        if (paren) lex_.expect(Tok::RParen, "')'");
        if (lex_.peek().kind == Tok::Caret) lex_.fail("chained '^' is not supported; parenthesize");
        const int n = static_cast<int>(num.number);
        return e_.pow(base, neg ? -n : n);
    }

    Expr::Ref parse_primary() {
        const Token t = lex_.peek();
        switch (t.kind) {
            case Tok::Number: lex_.take(); return e_.constant(t.number);
            case Tok::LParen: {
                lex_.take();
                const Expr::Ref inner = parse_sum();
                lex_.expect(Tok::RParen, "')'");
                return inner;
            }
            case Tok::Ident: {
                lex_.take();
                static const std::unordered_map<std::string_view, Op> funcs = {
                    {"sin", Op::Sin}, {"cos", Op::Cos}, {"exp", Op::Exp}, {"log", Op::Log}, {"sqrt", Op::Sqrt}};
                if (auto it = funcs.find(t.text); it != funcs.end() && lex_.peek().kind == Tok::LParen) {
                    lex_.take();
                    const Expr::Ref arg = parse_sum();
                    lex_.expect(Tok::RParen, "')'");
                    return e_.unary(it->second, arg);
                }
                auto v = vars_.find(std::string(t.text));
                if (v == vars_.end()) lex_.fail("undeclared variable '" + std::string(t.text) + "'", t.column);
                return e_.var(v->second);
            }
            case Tok::End: lex_.fail("unexpected end of line");
            default: lex_.fail("unexpected token '" + std::string(t.text) + "'");
        }
    }

    Lexer& lex_;
    const VarTable& vars_;
    Expr& e_;
};

double parse_bound(Lexer& lex) {
    bool neg = false;
    if (lex.peek().kind == Tok::Minus) {
        lex.take();
        neg = true;
    }
    const Token t = lex.take();
    double v = 0.0;
    if (t.kind == Tok::Number) {
        v = t.number;
    } else if (t.kind == Tok::Ident && t.text == "inf") {
        v = Interval::inf;
    } else {
        lex.fail("expected a number or 'inf' in domain", t.column);
    }
    return neg ? -v : v;
}

std::string_view strip_comment(std::string_view line) {
    const auto hash = line.find('#');
    return hash == std::string_view::npos ? line : line.substr(0, hash);
}

std::string fmt_double(double v) {
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

void print_node(const Expr& e, Expr::Ref r, const ObjectiveFunction& f, std::ostringstream& os) {
    const ExprNode& n = e.nodes()[r];
    switch (n.op) {
        case Op::Const:
            if (n.value < 0 || (n.value == 0.0 && std::signbit(n.value))) {
                os << '(' << fmt_double(n.value) << ')';
            } else {
                os << fmt_double(n.value);
            }
            return;
        case Op::Var: os << f.variable(n.index).name; return;
        case Op::Neg:
            os << "-(";
            print_node(e, n.lhs, f, os);
            os << ')';
            return;
        case Op::Sin:
        case Op::Cos:
        case Op::Exp:
        case Op::Log:
        case Op::Sqrt:
            os << op_name(n.op) << '(';
            print_node(e, n.lhs, f, os);
            os << ')';
            return;
        case Op::Pow:
            os << '(';
            print_node(e, n.lhs, f, os);
            os << ")^";
            if (n.index < 0) {
                os << "(-" << -n.index << ')';
            } else {
                os << n.index;
            }
            return;
        case Op::Add:
        case Op::Sub:
        case Op::Mul:
        case Op::Div: {
            static constexpr char sym[] = {'+', '-', '*', '/'};
            const char c = sym[static_cast<int>(n.op) - static_cast<int>(Op::Add)];
            os << '(';
            print_node(e, n.lhs, f, os);
            os << ' ' << c << ' ';
            print_node(e, n.rhs, f, os);
            os << ')';
            return;
        }
    }
}

bool valid_name(std::string_view name) {
    if (name.empty() || !(std::isalpha(static_cast<unsigned char>(name[0])) || name[0] == '_')) return false;
    for (char c : name) {
        if (!(std::isalnum(static_cast<unsigned char>(c)) || c == '_')) return false;
    }
    return true;
}

}  // namespace

ObjectiveFunction parse_problem(std::string_view text) {
    ObjectiveFunction f;
    VarTable vars;
    int lineno = 0;
    std::size_t start = 0;
    while (start <= text.size()) {
        const auto nl = text.find('\n', start);
        const auto raw = text.substr(start, nl == std::string_view::npos ? std::string_view::npos : nl - start);
        start = nl == std::string_view::npos ? text.size() + 1 : nl + 1;
        ++lineno;
        const auto line = strip_comment(raw);
        Lexer lex(line, lineno);
        if (lex.peek().kind == Tok::End) continue;
        const Token kw = lex.take();
        if (kw.kind == Tok::Ident && kw.text == "var") {
            const Token name = lex.expect(Tok::Ident, "variable name");
            if (vars.count(std::string(name.text))) lex.fail("variable '" + std::string(name.text) + "' redeclared", name.column);
            static const std::string_view reserved[] = {"sin", "cos", "exp", "log", "sqrt", "inf", "var", "term", "in"};
            for (auto r : reserved) {
                if (name.text == r) lex.fail("reserved word used as variable name", name.column);
            }
            const Token in = lex.expect(Tok::Ident, "'in'");
            if (in.text != "in") lex.fail("expected 'in'", in.column);
            const Token open = lex.expect(Tok::LBracket, "'['");
            const double lo = parse_bound(lex);
            lex.expect(Tok::Comma, "','");
            const double hi = parse_bound(lex);
            lex.expect(Tok::RBracket, "']'");
            if (lex.peek().kind != Tok::End) lex.fail("trailing input after domain");
            if (!(lo <= hi) || lo == Interval::inf || hi == -Interval::inf) {
                lex.fail("empty domain for variable '" + std::string(name.text) + "'", open.column);
            }
            vars.emplace(std::string(name.text), f.add_variable(std::string(name.text), Interval(lo, hi)));
        } else if (kw.kind == Tok::Ident && kw.text == "term") {
            Expr e;
            ExprParser p(lex, vars, e);
            const Expr::Ref root = p.parse_sum();
            if (lex.peek().kind != Tok::End) lex.fail("trailing input after term expression");
            e.set_root(root);
            f.add_term(std::move(e));
        } else {
            lex.fail("expected 'var' or 'term'", kw.column);
        }
    }
    return f;
}

std::string expr_to_string(const Expr& e, const ObjectiveFunction& f) {
    std::ostringstream os;
    print_node(e, e.root(), f, os);
    return os.str();
}

std::string to_dsl(const ObjectiveFunction& f) {
    std::ostringstream os;
    for (const auto& v : f.variables()) {
        if (!valid_name(v.name)) throw std::invalid_argument("variable name not representable: " + v.name);
        os << "var " << v.name << " in [" << fmt_double(v.domain.lo()) << ", " << fmt_double(v.domain.hi())
           << "]\n";
    }
    for (const auto& t : f.terms()) {
        os << "term ";
        print_node(t.expr, t.expr.root(), f, os);
        os << '\n';
    }
    if (f.offset() != 0.0) os << "term " << fmt_double(f.offset()) << '\n';
    return os.str();
}

}  // namespace rdis
