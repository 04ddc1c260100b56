#pragma once

#include <boost/multiprecision/cpp_int.hpp>

#include <cstdint>
#include <stdexcept>
#include <string>

namespace symfin {

using Rational = boost::multiprecision::cpp_rational;
using Integer  = boost::multiprecision::cpp_int;

inline Rational rat_pow(const Rational& base, long e) {
    if (e == 0) return Rational(1);
    if (base == 0) {
        if (e < 0) throw std::domain_error("rat_pow: zero to negative power");
        return Rational(0);
    }
    Rational b   = e > 0 ? base : Rational(1) / base;
    unsigned long n = e > 0 ? static_cast<unsigned long>(e) : static_cast<unsigned long>(-e);
    Rational acc(1);
    while (n) {
        if (n & 1) acc *= b;
        b *= b;
        n >>= 1;
    }
    return acc;
}

inline double to_double(const Rational& r) { return r.convert_to<double>(); }

inline std::string rat_str(const Rational& r) {
    std::string s = numerator(r).str();
    if (denominator(r) != 1) s += "/" + denominator(r).str();
    return s;
}

/// True if r = p^2 for rational p, in which case p (>=0) is returned through root.
inline bool rat_sqrt(const Rational& r, Rational& root) {
    if (r < 0) return false;
    Integer n = numerator(r), d = denominator(r);
    Integer sn = sqrt(n), sd = sqrt(d);
    if (sn * sn == n && sd * sd == d) {
        root = Rational(sn, sd);
        return true;
    }
    return false;
}

} // namespace symfin
