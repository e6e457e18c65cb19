#include "stochlog/number.hpp"

#include "stochlog/error.hpp"

#include <cctype>
#include <cstdint>
#include <cstring>
#include <cmath>
#include <functional>

namespace stochlog {

Number Number::parse(const std::string &text) {
    if (text.empty())
        throw EvalError("empty numeric literal");
    std::string body = text;
    bool negative = false;
    if (body[0] == '-') {
        negative = true;
        body.erase(0, 1);
    }
    mpq_class value;
    if (auto r = body.find('r'); r != std::string::npos) {
        mpz_class num(body.substr(0, r), 10);
        mpz_class den(body.substr(r + 1), 10);
        if (den == 0)
            throw EvalError("zero denominator in rational literal " + text);
        value = mpq_class(num, den);
    } else if (auto dot = body.find('.'); dot != std::string::npos) {
        const std::string whole = body.substr(0, dot);
        const std::string frac = body.substr(dot + 1);
        mpz_class scale = 1;
        for (std::size_t i = 0; i < frac.size(); ++i)
            scale *= 10;
        mpz_class num((whole.empty() ? "0" : whole) + frac, 10);
        value = mpq_class(num, scale);
    } else {
        value = mpq_class(mpz_class(body, 10));
    }
    value.canonicalize();
    if (negative)
        value = -value;
    return Number(value);
}

long Number::to_long() const {
    if (!is_integer() || !value_.get_num().fits_slong_p())
        throw EvalError("expected a machine-sized integer, got " + to_string());
    return value_.get_num().get_si();
}

std::size_t Number::hash() const {
    const auto h1 = std::hash<std::string>{}(value_.get_num().get_str(16));
    const auto h2 = std::hash<std::string>{}(value_.get_den().get_str(16));
    return h1 ^ (h2 + 0x9e3779b97f4a7c15ULL + (h1 << 6) + (h1 >> 2));
}

std::string Number::to_string() const {
    if (is_integer())
        return value_.get_num().get_str();
    // Terminating decimal iff the reduced denominator has no prime factors besides 2 and 5.
    mpz_class den = value_.get_den();
    std::size_t twos = 0, fives = 0;
    while (den % 2 == 0) {
        den /= 2;
        ++twos;
    }
    while (den % 5 == 0) {
        den /= 5;
        ++fives;
    }
    if (den != 1) {
        std::string s = value_.get_num().get_str();
        return s + "r" + value_.get_den().get_str();
    }
    const std::size_t digits = std::max(twos, fives);
    mpz_class scale = 1;
    for (std::size_t i = 0; i < digits; ++i)
        scale *= 10;
    mpz_class scaled = abs(value_.get_num()) * (scale / value_.get_den());
    std::string s = scaled.get_str();
    if (s.size() <= digits)
        s.insert(0, digits - s.size() + 1, '0');
    s.insert(s.size() - digits, ".");
    return (sgn(value_) < 0 ? "-" : "") + s;
}

Number divide(const Number &a, const Number &b) {
    if (b.sign() == 0)
        throw EvalError("division by zero");
    return Number(mpq_class(a.value() / b.value()));
}

Number integer_divide(const Number &a, const Number &b) {
    if (!a.is_integer() || !b.is_integer())
        throw EvalError("// expects integers");
    if (b.sign() == 0)
        throw EvalError("division by zero");
    mpz_class q;
    mpz_tdiv_q(q.get_mpz_t(), a.numerator().get_mpz_t(), b.numerator().get_mpz_t());
    return Number(mpq_class(q));
}

Number modulo(const Number &a, const Number &b) {
    if (!a.is_integer() || !b.is_integer())
        throw EvalError("mod expects integers");
    if (b.sign() == 0)
        throw EvalError("division by zero");
    mpz_class r;
    mpz_fdiv_r(r.get_mpz_t(), a.numerator().get_mpz_t(), b.numerator().get_mpz_t());
    return Number(mpq_class(r));
}

Number power(const Number &base, const Number &exponent) {
    if (!exponent.is_integer())
        throw EvalError("** expects an integer exponent");
    const long e = exponent.to_long();
    const unsigned long magnitude = static_cast<unsigned long>(e < 0 ? -e : e);
    mpz_class num, den;
    mpz_pow_ui(num.get_mpz_t(), base.numerator().get_mpz_t(), magnitude);
    mpz_pow_ui(den.get_mpz_t(), base.denominator().get_mpz_t(), magnitude);
    if (e < 0) {
        if (num == 0)
            throw EvalError("zero raised to a negative power");
        std::swap(num, den);
    }
    return Number(mpq_class(num, den));
}

double Number::to_double() const {
    // get_d truncates toward zero; pick the nearest of the two neighbours.
    const double t = value_.get_d();
    if (!std::isfinite(t))
        return t;
    const double away = std::nextafter(t, sgn(value_) >= 0 ? HUGE_VAL : -HUGE_VAL);
    if (!std::isfinite(away))
        return t;
    const mpq_class dt = abs(mpq_class(value_ - mpq_class(t)));
    const mpq_class da = abs(mpq_class(value_ - mpq_class(away)));
    if (da < dt)
        return away;
    if (dt < da)
        return t;
    std::int64_t bits = 0;
    std::memcpy(&bits, &t, sizeof bits);
    return (bits & 1) ? away : t;
}

} // namespace stochlog
