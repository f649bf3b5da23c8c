#pragma once

#include <cstdint>
#include <numeric>
#include <optional>
#include <stdexcept>
#include <string>

namespace murgat {

// Exact rational in [0,1]-ish range.  Metric denominators are small (sentence
// and citation counts), so int64 never overflows in practice; products reduce
// through gcd at every step.
struct Fraction {
    std::int64_t num = 0;
    std::int64_t den = 1;

    Fraction() = default;
    Fraction(std::int64_t n, std::int64_t d) : num(n), den(d) {
        if (den == 0) throw std::domain_error("Fraction: zero denominator");
        if (den < 0) { num = -num; den = -den; }
        reduce();
    }
    static Fraction whole(std::int64_t n) { return Fraction(n, 1); }

    void reduce() {
        const std::int64_t g = std::gcd(num < 0 ? -num : num, den);
        if (g > 1) { num /= g; den /= g; }
    }

    double value() const { return static_cast<double>(num) / static_cast<double>(den); }
    bool is_zero() const { return num == 0; }

    friend Fraction operator+(Fraction a, Fraction b) {
        return Fraction(a.num * b.den + b.num * a.den, a.den * b.den);
    }
    friend Fraction operator*(Fraction a, Fraction b) {
        return Fraction(a.num * b.num, a.den * b.den);
    }
    friend Fraction operator/(Fraction a, Fraction b) {
        if (b.num == 0) throw std::domain_error("Fraction: divide by zero");
        return Fraction(a.num * b.den, a.den * b.num);
    }
    friend bool operator==(const Fraction& a, const Fraction& b) {
        return a.num == b.num && a.den == b.den;
    }
    friend bool operator!=(const Fraction& a, const Fraction& b) { return !(a == b); }
    friend bool operator<(const Fraction& a, const Fraction& b) {
        return a.num * b.den < b.num * a.den;
    }
    friend bool operator<=(const Fraction& a, const Fraction& b) {
        return a.num * b.den <= b.num * a.den;
    }

    std::string str() const { return std::to_string(num) + "/" + std::to_string(den); }
};

using OptFraction = std::optional<Fraction>;

} // namespace murgat
