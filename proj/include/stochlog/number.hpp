#pragma once

#include <gmpxx.h>

#include <cstddef>
#include <string>

namespace stochlog {

/// Exact rational number. Values with denominator 1 are integers; there is no
/// floating-point variant, so arithmetic results are platform independent.
class Number {
public:
    Number() = default;
    Number(long value) : value_(value) {}
    explicit Number(mpq_class value) : value_(std::move(value)) { value_.canonicalize(); }

    /// Parses "12", "-3", "0.25" (exact decimal) or "1r3" (rational literal).
    static Number parse(const std::string &text);

    bool is_integer() const { return value_.get_den() == 1; }
    const mpq_class &value() const { return value_; }
    mpz_class numerator() const { return value_.get_num(); }
    mpz_class denominator() const { return value_.get_den(); }

    /// Nearest double (round half to even).
    double to_double() const;
    /// Integer value if it fits into a long; throws EvalError otherwise.
    long to_long() const;

    int sign() const { return sgn(value_); }
    std::size_t hash() const;

    /// Integers print plainly, terminating decimals print as decimals, the rest as NrM.
    std::string to_string() const;

    friend Number operator+(const Number &a, const Number &b) { return Number(mpq_class(a.value_ + b.value_)); }
    friend Number operator-(const Number &a, const Number &b) { return Number(mpq_class(a.value_ - b.value_)); }
    friend Number operator*(const Number &a, const Number &b) { return Number(mpq_class(a.value_ * b.value_)); }
    friend Number operator-(const Number &a) { return Number(mpq_class(-a.value_)); }

    friend bool operator==(const Number &a, const Number &b) { return a.value_ == b.value_; }
    friend bool operator!=(const Number &a, const Number &b) { return a.value_ != b.value_; }
    friend bool operator<(const Number &a, const Number &b) { return a.value_ < b.value_; }
    friend bool operator<=(const Number &a, const Number &b) { return a.value_ <= b.value_; }
    friend bool operator>(const Number &a, const Number &b) { return a.value_ > b.value_; }
    friend bool operator>=(const Number &a, const Number &b) { return a.value_ >= b.value_; }

private:
    mpq_class value_;
};

// Arithmetic with Prolog-style error conditions (all throw EvalError).
Number divide(const Number &a, const Number &b);         // exact "/"
Number integer_divide(const Number &a, const Number &b); // "//", truncates toward zero
Number modulo(const Number &a, const Number &b);         // "mod", sign follows divisor
Number power(const Number &base, const Number &exponent); // "**", integer exponent only

} // namespace stochlog
