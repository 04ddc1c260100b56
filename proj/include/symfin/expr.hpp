#pragma once

// Minimal computer-algebra kernel.
//
// Expressions are kept in a unique canonical form: multivariate polynomials
// over exact rationals in a set of atoms (variables, symbolic constants,
// opaque time-functions indexed by derivative order, antiderivative symbols,
// exponentials of polynomials, logs of positive variables).  Two expressions
// are equal exactly when their difference normalises to the empty polynomial,
// which makes is_zero a decision procedure for this class.
//
// Division is restricted to rational constants and declared-positive atoms
// (kept as negative integer exponents), so closure under +, *, d/dv and
// substitution is preserved.

#include "symfin/rational.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <deque>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace symfin {

struct error : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct parse_error : error {
    std::size_t offset;
    parse_error(const std::string& msg, std::size_t off)
        : error(msg + " at offset " + std::to_string(off)), offset(off) {}
};
struct undeclared_error : error {
    using error::error;
};
struct derivative_cap_error : error {
    using error::error;
};
struct eval_error : error {
    using error::error;
};
struct shape_error : error {
    using error::error;
};
struct singular_error : error {
    using error::error;
};

enum class AtomKind { Variable, Constant, Opaque, Antideriv, Exp, Log };

using AtomId = int;

struct Monomial {
    // (atom id, exponent) factors, sorted by atom id, exponents nonzero.
    std::vector<std::pair<AtomId, int>> f;

    bool empty() const { return f.empty(); }
    int exponent(AtomId a) const {
        for (auto& [id, e] : f)
            if (id == a) return e;
        return 0;
    }
    auto operator<=>(const Monomial&) const = default;
};

struct Term {
    Rational c;
    Monomial m;
};

struct Poly {
    std::vector<Term> t; // sorted by monomial, no zero coefficients

    bool is_zero() const { return t.empty(); }
    bool operator==(const Poly& o) const {
        if (t.size() != o.t.size()) return false;
        for (std::size_t i = 0; i < t.size(); ++i)
            if (t[i].m != o.t[i].m || t[i].c != o.t[i].c) return false;
        return true;
    }
    bool operator<(const Poly& o) const {
        return std::lexicographical_compare(
            t.begin(), t.end(), o.t.begin(), o.t.end(), [](const Term& a, const Term& b) {
                if (a.m != b.m) return a.m < b.m;
                return a.c < b.c;
            });
    }
};

struct AtomInfo {
    AtomKind kind;
    std::string name;   // display name; for Opaque includes no ticks
    int order = 0;      // Opaque: derivative order
    bool positive = false;
    // Canonicalisation rules:
    std::optional<Rational> square_rat; // atom^2 == rational (e.g. sqrt(1-rho^2), rho numeric)
    std::optional<Poly> square_poly;    // atom^2 -> polynomial rewrite (e.g. rho^2 = 1-w^2)
    std::optional<Poly> exp_arg;        // Exp atoms
    AtomId log_of = -1;                 // Log atoms
    std::optional<Poly> integrand;      // Antideriv atoms: d/dt atom = integrand
    AtomId base = -1;                   // Opaque: id of order-0 atom (bookkeeping)
};

class SymbolTable;
Poly normalize_term(const SymbolTable& st, Rational c, const Monomial& m);
Poly poly_mul(const SymbolTable& st, const Poly& a, const Poly& b);

/// Declarations shared by a family of expressions.  Atom interning appends to
/// the registry behind a mutex; ids are stable, so concurrent readers are safe
/// and the table is logically immutable after the declaring phase.
class SymbolTable {
  public:
    SymbolTable() = default;

    int derivative_cap = 3;
    AtomId time_atom = -1; // set by declare_time; opaque/antideriv derivatives attach to it

    AtomId declare_variable(const std::string& name, bool positive = false) {
        AtomInfo a{AtomKind::Variable, name};
        a.positive = positive;
        return add_named(a);
    }
    AtomId declare_time(const std::string& name = "t") {
        time_atom = declare_variable(name);
        return time_atom;
    }
    AtomId declare_constant(const std::string& name, bool positive = false) {
        AtomInfo a{AtomKind::Constant, name};
        a.positive = positive;
        return add_named(a);
    }
    /// Positive constant with a rational square, e.g. w = sqrt(3)/2 via w^2 = 3/4.
    AtomId declare_sqrt_constant(const std::string& name, const Rational& square) {
        if (square <= 0) throw error("declare_sqrt_constant: square must be positive");
        AtomInfo a{AtomKind::Constant, name};
        a.positive = true;
        a.square_rat = square;
        return add_named(a);
    }
    /// Constant whose square rewrites to a polynomial (rho with rho^2 = 1 - w^2).
    AtomId declare_square_reduced_constant(const std::string& name, const Poly& square) {
        AtomInfo a{AtomKind::Constant, name};
        a.square_poly = square;
        return add_named(a);
    }
    AtomId declare_opaque(const std::string& name) {
        AtomInfo a{AtomKind::Opaque, name};
        a.order = 0;
        AtomId id = add_named(a);
        atoms_[id].base = id;
        return id;
    }
    /// Opaque time-function treated as a constant of known sign (sigma2(t) > 0).
    AtomId declare_opaque_positive(const std::string& name) {
        AtomId id = declare_opaque(name);
        atoms_[id].positive = true;
        return id;
    }
    AtomId declare_antideriv(const std::string& name, const Poly& integrand) {
        AtomInfo a{AtomKind::Antideriv, name};
        a.integrand = integrand;
        return add_named(a);
    }
    /// Atom defined only through its time derivative (set later); used for
    /// antiderivative symbols that reference themselves, e.g. w(t) with
    /// w' = -rho*rho'/w.
    AtomId declare_derived_function(const std::string& name, bool positive = false) {
        AtomInfo a{AtomKind::Antideriv, name};
        a.positive = positive;
        return add_named(a);
    }
    void set_derivative_rule(AtomId id, const Poly& ddt) {
        std::lock_guard lk(mu_);
        atoms_.at(static_cast<std::size_t>(id)).integrand = ddt;
    }
    void set_square_rule(AtomId id, const Poly& square) {
        std::lock_guard lk(mu_);
        atoms_.at(static_cast<std::size_t>(id)).square_poly = square;
    }

    bool has(const std::string& name) const {
        std::lock_guard lk(mu_);
        return by_name_.count(name) != 0;
    }
    AtomId id_of(const std::string& name) const {
        std::lock_guard lk(mu_);
        auto it = by_name_.find(name);
        if (it == by_name_.end()) throw undeclared_error("undeclared symbol '" + name + "'");
        return it->second;
    }
    const AtomInfo& atom(AtomId id) const {
        std::lock_guard lk(mu_);
        return atoms_.at(static_cast<std::size_t>(id));
    }
    std::size_t atom_count() const {
        std::lock_guard lk(mu_);
        return atoms_.size();
    }

    /// Opaque atom at the given derivative order, interned on demand.
    AtomId opaque_order(AtomId base, int order) const {
        std::lock_guard lk(mu_);
        if (order > derivative_cap)
            throw derivative_cap_error("derivative order " + std::to_string(order) +
                                       " exceeds cap " + std::to_string(derivative_cap) +
                                       " for '" + atoms_.at(base).name + "'");
        const AtomInfo& b = atoms_.at(static_cast<std::size_t>(base));
        if (b.kind != AtomKind::Opaque || b.order != 0)
            throw error("opaque_order: not a base opaque atom");
        auto key = std::make_pair(base, order);
        auto it = opa_.find(key);
        if (it != opa_.end()) return it->second;
        AtomInfo a{AtomKind::Opaque, b.name};
        a.order = order;
        a.base = base;
        AtomId id = static_cast<AtomId>(atoms_.size());
        atoms_.push_back(std::move(a));
        opa_[key] = id;
        return id;
    }

    /// Exp atom for a canonical, constant-free argument (interned).
    AtomId exp_atom(const Poly& arg) const {
        std::lock_guard lk(mu_);
        auto it = exp_.find(arg);
        if (it != exp_.end()) return it->second;
        AtomInfo a{AtomKind::Exp, "exp#" + std::to_string(exp_.size())};
        a.exp_arg = arg;
        a.positive = true;
        AtomId id = static_cast<AtomId>(atoms_.size());
        atoms_.push_back(std::move(a));
        exp_.emplace(arg, id);
        return id;
    }

    AtomId log_atom(AtomId var) const {
        std::lock_guard lk(mu_);
        const AtomInfo& v = atoms_.at(static_cast<std::size_t>(var));
        if (!(v.kind == AtomKind::Variable && v.positive))
            throw error("log: argument must be a declared positive variable");
        auto it = logs_.find(var);
        if (it != logs_.end()) return it->second;
        AtomInfo a{AtomKind::Log, "log(" + v.name + ")"};
        a.log_of = var;
        AtomId id = static_cast<AtomId>(atoms_.size());
        atoms_.push_back(std::move(a));
        logs_[var] = id;
        return id;
    }

  private:
    AtomId add_named(AtomInfo a) {
        std::lock_guard lk(mu_);
        if (by_name_.count(a.name)) throw error("symbol '" + a.name + "' already declared");
        AtomId id = static_cast<AtomId>(atoms_.size());
        by_name_[a.name] = id;
        atoms_.push_back(std::move(a));
        return id;
    }

    // deque: stable references under append-only interning
    mutable std::recursive_mutex mu_;
    mutable std::deque<AtomInfo> atoms_;
    mutable std::map<std::string, AtomId> by_name_;
    mutable std::map<std::pair<AtomId, int>, AtomId> opa_;
    mutable std::map<Poly, AtomId> exp_;
    mutable std::map<AtomId, AtomId> logs_;
};

// ---------------------------------------------------------------------------
// canonical polynomial arithmetic

inline Poly poly_zero() { return {}; }

inline Poly poly_const(const Rational& c) {
    Poly p;
    if (c != 0) p.t.push_back({c, {}});
    return p;
}

inline Poly poly_add(const Poly& a, const Poly& b) {
    Poly r;
    r.t.reserve(a.t.size() + b.t.size());
    std::size_t i = 0, j = 0;
    while (i < a.t.size() || j < b.t.size()) {
        if (j == b.t.size() || (i < a.t.size() && a.t[i].m < b.t[j].m)) {
            r.t.push_back(a.t[i++]);
        } else if (i == a.t.size() || b.t[j].m < a.t[i].m) {
            r.t.push_back(b.t[j++]);
        } else {
            Rational c = a.t[i].c + b.t[j].c;
            if (c != 0) r.t.push_back({std::move(c), a.t[i].m});
            ++i;
            ++j;
        }
    }
    return r;
}

inline Poly poly_neg(Poly a) {
    for (auto& t : a.t) t.c = -t.c;
    return a;
}

inline Poly poly_scale(Poly a, const Rational& c) {
    if (c == 0) return {};
    for (auto& t : a.t) t.c *= c;
    return a;
}

inline bool poly_is_constant(const Poly& p) {
    return p.t.empty() || (p.t.size() == 1 && p.t[0].m.empty());
}
inline Rational poly_constant_value(const Poly& p) {
    if (p.t.empty()) return Rational(0);
    if (p.t.size() == 1 && p.t[0].m.empty()) return p.t[0].c;
    throw error("expression is not a constant");
}

/// Constant part and remainder: p = c + rest, rest has no constant term.
inline std::pair<Rational, Poly> poly_split_constant(const Poly& p) {
    Rational c(0);
    Poly rest;
    for (auto& t : p.t) {
        if (t.m.empty())
            c = t.c;
        else
            rest.t.push_back(t);
    }
    return {c, rest};
}

namespace detail {

inline void mono_insert(std::vector<std::pair<AtomId, int>>& f, AtomId a, int e) {
    if (e == 0) return;
    auto it = std::lower_bound(f.begin(), f.end(), a,
                               [](const auto& p, AtomId x) { return p.first < x; });
    if (it != f.end() && it->first == a) {
        it->second += e;
        if (it->second == 0) f.erase(it);
    } else {
        f.insert(it, {a, e});
    }
}

} // namespace detail

/// Rebuild c * m into canonical form, applying atom rewrite rules
/// (exp merging, square reductions, positivity checks).
inline Poly normalize_term(const SymbolTable& st, Rational c, const Monomial& m) {
    if (c == 0) return {};
    Monomial plain;          // atoms with no special rule
    Poly exp_total;          // accumulated exponent of all exp factors
    std::vector<std::pair<AtomId, int>> reduce; // square_poly atoms with |e| >= 2

    for (auto [id, e] : m.f) {
        const AtomInfo& a = st.atom(id);
        if (a.kind == AtomKind::Exp) {
            exp_total = poly_add(exp_total, poly_scale(*a.exp_arg, Rational(e)));
            continue;
        }
        if (a.square_rat) {
            int r = ((e % 2) + 2) % 2;
            long q = (static_cast<long>(e) - r) / 2;
            c *= rat_pow(*a.square_rat, q);
            if (r != 0) detail::mono_insert(plain.f, id, r);
            continue;
        }
        if (a.square_poly && e >= 2) {
            reduce.push_back({id, e});
            continue;
        }
        if (e < 0 && !a.positive)
            throw error("negative power of non-invertible atom '" + a.name + "'");
        detail::mono_insert(plain.f, id, e);
    }

    // re-attach exponential: split rational constant from the argument
    if (!exp_total.is_zero()) {
        auto [c0, rest] = poly_split_constant(exp_total);
        if (c0 != 0) {
            Poly cp = poly_const(c0);
            detail::mono_insert(plain.f, st.exp_atom(cp), 1);
        }
        if (!rest.is_zero()) detail::mono_insert(plain.f, st.exp_atom(rest), 1);
    }

    Poly out;
    out.t.push_back({std::move(c), std::move(plain)});
    // expand square-reduced atoms: a^e -> a^(e mod 2) * R^(e div 2)
    for (auto [id, e] : reduce) {
        const AtomInfo& a = st.atom(id);
        int r = e % 2;
        int q = e / 2;
        Poly factor = poly_const(Rational(1));
        for (int k = 0; k < q; ++k) factor = poly_mul(st, factor, *a.square_poly);
        if (r) {
            Poly am;
            Monomial mm;
            mm.f.push_back({id, 1});
            am.t.push_back({Rational(1), mm});
            factor = poly_mul(st, factor, am);
        }
        out = poly_mul(st, out, factor);
    }
    return out;
}

inline Poly poly_mul(const SymbolTable& st, const Poly& a, const Poly& b) {
    Poly acc;
    for (auto& ta : a.t) {
        for (auto& tb : b.t) {
            Monomial m = ta.m;
            for (auto [id, e] : tb.m.f) detail::mono_insert(m.f, id, e);
            acc = poly_add(acc, normalize_term(st, ta.c * tb.c, m));
        }
    }
    return acc;
}

inline Poly poly_pow(const SymbolTable& st, const Poly& a, int e);

/// Inverse of a unit (single term whose atoms are all invertible).
inline std::optional<Poly> poly_invert(const SymbolTable& st, const Poly& a) {
    if (a.t.size() != 1 || a.t[0].c == 0) return std::nullopt;
    const Term& t = a.t[0];
    Monomial m;
    Poly expf = poly_const(Rational(1));
    for (auto [id, e] : t.m.f) {
        const AtomInfo& ai = st.atom(id);
        if (ai.kind == AtomKind::Exp) {
            Poly arg = poly_scale(*ai.exp_arg, Rational(-e));
            Poly unit;
            unit.t.push_back({Rational(1), {}});
            auto [c0, rest] = poly_split_constant(arg);
            Monomial em;
            if (c0 != 0) detail::mono_insert(em.f, st.exp_atom(poly_const(c0)), 1);
            if (!rest.is_zero()) detail::mono_insert(em.f, st.exp_atom(rest), 1);
            unit.t[0].m = em;
            expf = poly_mul(st, expf, unit);
            continue;
        }
        if (!ai.positive) return std::nullopt;
        detail::mono_insert(m.f, id, -e);
    }
    Poly r = normalize_term(st, Rational(1) / t.c, m);
    return poly_mul(st, r, expf);
}

inline Poly poly_pow(const SymbolTable& st, const Poly& a, int e) {
    if (e == 0) return poly_const(Rational(1));
    if (e < 0) {
        auto inv = poly_invert(st, a);
        if (!inv) throw error("cannot raise non-invertible expression to a negative power");
        return poly_pow(st, *inv, -e);
    }
    Poly acc = poly_const(Rational(1));
    Poly base = a;
    int n = e;
    while (n) {
        if (n & 1) acc = poly_mul(st, acc, base);
        base = n > 1 ? poly_mul(st, base, base) : base;
        n >>= 1;
    }
    return acc;
}

/// d(atom)/dv as a polynomial; v is a Variable atom.
inline Poly atom_derivative(const SymbolTable& st, AtomId id, AtomId v) {
    const AtomInfo& a = st.atom(id);
    switch (a.kind) {
    case AtomKind::Variable:
        return id == v ? poly_const(Rational(1)) : poly_zero();
    case AtomKind::Constant: {
        if (v != st.time_atom) return poly_zero();
        if (a.square_rat) return poly_zero();
        return poly_zero();
    }
    case AtomKind::Opaque: {
        if (v != st.time_atom) return poly_zero();
        AtomId d = st.opaque_order(a.base, a.order + 1);
        Poly p;
        Monomial m;
        m.f.push_back({d, 1});
        p.t.push_back({Rational(1), m});
        return p;
    }
    case AtomKind::Antideriv:
        if (v != st.time_atom) return poly_zero();
        if (!a.integrand) throw error("derivative rule for '" + a.name + "' not set");
        return *a.integrand;
    case AtomKind::Exp: {
        // handled by caller (needs the exp factor itself)
        throw error("internal: exp atom derivative handled in poly_diff");
    }
    case AtomKind::Log: {
        if (a.log_of != v) return poly_zero();
        Monomial m;
        m.f.push_back({v, -1});
        return normalize_term(st, Rational(1), m);
    }
    }
    return poly_zero();
}

inline Poly poly_diff(const SymbolTable& st, const Poly& p, AtomId v) {
    Poly out;
    for (auto& t : p.t) {
        for (std::size_t k = 0; k < t.m.f.size(); ++k) {
            auto [id, e] = t.m.f[k];
            const AtomInfo& a = st.atom(id);
            Poly da;
            Monomial rest; // t.m with this factor's exponent reduced by one
            if (a.kind == AtomKind::Exp) {
                // d exp(P)^1/dv = P_v * exp(P); exponent is always 1 in canonical form
                da = poly_diff(st, *a.exp_arg, v);
                if (da.is_zero()) continue;
                rest = t.m; // keep the exp factor
                out = poly_add(out, poly_mul(st, da, normalize_term(st, t.c, rest)));
                continue;
            }
            da = atom_derivative(st, id, v);
            if (da.is_zero()) continue;
            rest = t.m;
            rest.f[k].second -= 1;
            if (rest.f[k].second == 0) rest.f.erase(rest.f.begin() + static_cast<long>(k));
            Poly base = normalize_term(st, t.c * e, rest);
            out = poly_add(out, poly_mul(st, base, da));
        }
    }
    return out;
}

/// Simultaneous substitution atom -> polynomial.  Time substitution is
/// rejected when opaque/antiderivative atoms are present (no composition).
inline Poly poly_subst(const SymbolTable& st, const Poly& p, const std::map<AtomId, Poly>& bind) {
    bool time_rebound = false;
    if (st.time_atom >= 0) {
        auto it = bind.find(st.time_atom);
        if (it != bind.end()) {
            Poly tp;
            Monomial tm;
            tm.f.push_back({st.time_atom, 1});
            tp.t.push_back({Rational(1), tm});
            time_rebound = !(it->second == tp);
        }
    }
    Poly out;
    for (auto& t : p.t) {
        Poly term = poly_const(t.c);
        for (auto [id, e] : t.m.f) {
            const AtomInfo& a = st.atom(id);
            Poly factor;
            auto it = bind.find(id);
            if (it != bind.end()) {
                factor = poly_pow(st, it->second, e);
            } else if (a.kind == AtomKind::Exp) {
                Poly arg = poly_subst(st, *a.exp_arg, bind);
                arg = poly_scale(arg, Rational(e));
                auto [c0, rest] = poly_split_constant(arg);
                factor = poly_const(Rational(1));
                Monomial em;
                if (c0 != 0) detail::mono_insert(em.f, st.exp_atom(poly_const(c0)), 1);
                if (!rest.is_zero()) detail::mono_insert(em.f, st.exp_atom(rest), 1);
                factor.t[0].m = em;
            } else if (a.kind == AtomKind::Log) {
                auto vit = bind.find(a.log_of);
                if (vit == bind.end()) {
                    factor = normalize_term(st, Rational(1), Monomial{{{id, e}}});
                } else {
                    // log(exp(P)) = P; binding must be a pure exponential monomial
                    const Poly& b = vit->second;
                    if (b.t.size() != 1 || b.t[0].c != 1)
                        throw error("substitution into log requires an exponential binding");
                    Poly arg;
                    for (auto [bid, be] : b.t[0].m.f) {
                        const AtomInfo& ba = st.atom(bid);
                        if (ba.kind != AtomKind::Exp)
                            throw error("substitution into log requires an exponential binding");
                        arg = poly_add(arg, poly_scale(*ba.exp_arg, Rational(be)));
                    }
                    factor = poly_pow(st, arg, e);
                }
            } else if ((a.kind == AtomKind::Opaque || a.kind == AtomKind::Antideriv) &&
                       time_rebound) {
                throw error("cannot substitute the time variable inside opaque symbol '" +
                            a.name + "'");
            } else {
                factor = normalize_term(st, Rational(1), Monomial{{{id, e}}});
            }
            term = poly_mul(st, term, factor);
        }
        out = poly_add(out, term);
    }
    return out;
}

// ---------------------------------------------------------------------------

/// Immutable symbolic expression bound to a SymbolTable.
class Expression {
  public:
    Expression() = default;
    Expression(std::shared_ptr<const SymbolTable> st, Poly p)
        : st_(std::move(st)), p_(std::move(p)) {}

    static Expression constant(std::shared_ptr<const SymbolTable> st, const Rational& c) {
        return {std::move(st), poly_const(c)};
    }
    static Expression atom(std::shared_ptr<const SymbolTable> st, AtomId id) {
        Poly p = normalize_term(*st, Rational(1), Monomial{{{id, 1}}});
        return {std::move(st), std::move(p)};
    }
    static Expression symbol(const std::shared_ptr<const SymbolTable>& st,
                             const std::string& name) {
        return atom(st, st->id_of(name));
    }

    const Poly& poly() const { return p_; }
    const std::shared_ptr<const SymbolTable>& table() const { return st_; }
    const SymbolTable& st() const { return *st_; }

    bool is_zero() const { return p_.is_zero(); }
    bool is_constant() const { return poly_is_constant(p_); }
    Rational constant_value() const { return poly_constant_value(p_); }

    Expression operator-() const { return {st_, poly_neg(p_)}; }
    Expression operator+(const Expression& o) const {
        check(o);
        return {st_, poly_add(p_, o.p_)};
    }
    Expression operator-(const Expression& o) const {
        check(o);
        return {st_, poly_add(p_, poly_neg(o.p_))};
    }
    Expression operator*(const Expression& o) const {
        check(o);
        return {st_, poly_mul(*st_, p_, o.p_)};
    }
    Expression operator/(const Expression& o) const {
        check(o);
        if (poly_is_constant(o.p_)) {
            Rational c = poly_constant_value(o.p_);
            if (c == 0) throw eval_error("division by zero");
            return {st_, poly_scale(p_, Rational(1) / c)};
        }
        auto inv = poly_invert(*st_, o.p_);
        if (!inv) throw error("division restricted to constants and positive atoms");
        return {st_, poly_mul(*st_, p_, *inv)};
    }
    Expression operator*(const Rational& c) const { return {st_, poly_scale(p_, c)}; }
    Expression operator+(const Rational& c) const { return *this + constant(st_, c); }
    Expression operator-(const Rational& c) const { return *this + constant(st_, -c); }
    friend Expression operator*(const Rational& c, const Expression& e) { return e * c; }

    Expression pow(int e) const { return {st_, poly_pow(*st_, p_, e)}; }

    bool operator==(const Expression& o) const { return p_ == o.p_; }

    Expression diff(AtomId v) const { return {st_, poly_diff(*st_, p_, v)}; }
    Expression diff(const std::string& v) const { return diff(st_->id_of(v)); }
    Expression diff(const std::string& v, int n) const {
        Expression e = *this;
        for (int i = 0; i < n; ++i) e = e.diff(v);
        return e;
    }

    Expression substitute(const std::map<AtomId, Poly>& bind) const {
        return {st_, poly_subst(*st_, p_, bind)};
    }
    Expression substitute(const std::map<std::string, Expression>& bind) const {
        std::map<AtomId, Poly> b;
        for (auto& [k, v] : bind) {
            check(v);
            b[st_->id_of(k)] = v.poly();
        }
        return substitute(b);
    }

    bool contains(AtomId id) const {
        for (auto& t : p_.t)
            for (auto [a, e] : t.m.f) {
                if (a == id) return true;
                const AtomInfo& ai = st_->atom(a);
                if (ai.kind == AtomKind::Exp && Expression(st_, *ai.exp_arg).contains(id))
                    return true;
            }
        return false;
    }

    /// All atoms appearing (recursively through exp arguments).
    std::set<AtomId> atoms() const {
        std::set<AtomId> s;
        collect_atoms(p_, s);
        return s;
    }

  private:
    void collect_atoms(const Poly& p, std::set<AtomId>& s) const {
        for (auto& t : p.t)
            for (auto [a, e] : t.m.f) {
                s.insert(a);
                const AtomInfo& ai = st_->atom(a);
                if (ai.kind == AtomKind::Exp) collect_atoms(*ai.exp_arg, s);
            }
    }
    void check(const Expression& o) const {
        if (st_.get() != o.st_.get())
            throw error("expressions belong to different symbol tables");
    }

    std::shared_ptr<const SymbolTable> st_;
    Poly p_;
};

inline Expression exp(const Expression& e) {
    auto [c0, rest] = poly_split_constant(e.poly());
    Monomial m;
    const SymbolTable& st = e.st();
    if (c0 != 0) detail::mono_insert(m.f, st.exp_atom(poly_const(c0)), 1);
    if (!rest.is_zero()) detail::mono_insert(m.f, st.exp_atom(rest), 1);
    Poly p;
    p.t.push_back({Rational(1), m});
    return {e.table(), p};
}

inline Expression log(const Expression& e) {
    const Poly& p = e.poly();
    if (p.t.size() != 1 || p.t[0].c != 1 || p.t[0].m.f.size() != 1 ||
        p.t[0].m.f[0].second != 1)
        throw error("log: argument must be a single positive variable");
    return Expression::atom(e.table(), e.st().log_atom(p.t[0].m.f[0].first));
}

// ---------------------------------------------------------------------------
// grouping / coefficient extraction

/// Split e as a polynomial in the given atoms: returns (key monomial over
/// `vars`) -> coefficient expression free of them.
inline std::map<Monomial, Expression> group_by(const Expression& e,
                                               const std::set<AtomId>& vars) {
    std::map<Monomial, Poly> acc;
    for (auto& t : e.poly().t) {
        Monomial key, rest;
        for (auto [id, ex] : t.m.f) {
            if (vars.count(id))
                key.f.push_back({id, ex});
            else
                rest.f.push_back({id, ex});
        }
        Poly& slot = acc[key];
        Poly one;
        one.t.push_back({t.c, rest});
        slot = poly_add(slot, one);
    }
    std::map<Monomial, Expression> out;
    for (auto& [k, v] : acc)
        if (!v.is_zero()) out.emplace(k, Expression(e.table(), v));
    return out;
}

/// Coefficient of atom^k in e (e viewed as polynomial in that atom).
inline Expression coefficient_of(const Expression& e, AtomId a, int k) {
    Poly out;
    for (auto& t : e.poly().t) {
        if (t.m.exponent(a) != k) continue;
        Monomial rest;
        for (auto [id, ex] : t.m.f)
            if (id != a) rest.f.push_back({id, ex});
        out = poly_add(out, Poly{{Term{t.c, rest}}});
    }
    return {e.table(), out};
}

inline int degree_in(const Expression& e, AtomId a) {
    int d = 0;
    for (auto& t : e.poly().t) d = std::max(d, t.m.exponent(a));
    return d;
}

// ---------------------------------------------------------------------------
// numeric evaluation

/// Environment keyed by printable atom name ("x", "P1'", "I1", ...).
using NumEnv = std::map<std::string, double>;

inline std::string atom_display_name(const SymbolTable& st, AtomId id);

inline double eval_atom(const SymbolTable& st, AtomId id, const NumEnv& env);

inline double poly_eval(const SymbolTable& st, const Poly& p, const NumEnv& env) {
    double acc = 0;
    for (auto& t : p.t) {
        double v = to_double(t.c);
        for (auto [id, e] : t.m.f) {
            double a = eval_atom(st, id, env);
            if (e < 0 && a == 0.0) throw eval_error("division by zero in numeric evaluation");
            v *= std::pow(a, e);
        }
        acc += v;
    }
    return acc;
}

inline double eval_atom(const SymbolTable& st, AtomId id, const NumEnv& env) {
    const AtomInfo& a = st.atom(id);
    switch (a.kind) {
    case AtomKind::Exp:
        return std::exp(poly_eval(st, *a.exp_arg, env));
    case AtomKind::Log: {
        double v = eval_atom(st, a.log_of, env);
        if (v <= 0) throw eval_error("log of non-positive value");
        return std::log(v);
    }
    default: {
        auto it = env.find(atom_display_name(st, id));
        if (it == env.end()) {
            if (a.square_rat) return std::sqrt(to_double(*a.square_rat));
            throw eval_error("unbound symbol '" + atom_display_name(st, id) + "'");
        }
        return it->second;
    }
    }
}

inline double eval_numeric(const Expression& e, const NumEnv& env) {
    return poly_eval(e.st(), e.poly(), env);
}

// ---------------------------------------------------------------------------
// printing

inline std::string atom_display_name(const SymbolTable& st, AtomId id) {
    const AtomInfo& a = st.atom(id);
    if (a.kind == AtomKind::Opaque && a.order > 0)
        return a.name + std::string(static_cast<std::size_t>(a.order), '\'');
    return a.name;
}

inline std::string to_string(const Expression& e);

inline std::string atom_to_string(const SymbolTable& st, AtomId id,
                                  const std::shared_ptr<const SymbolTable>& sp) {
    const AtomInfo& a = st.atom(id);
    if (a.kind == AtomKind::Exp) return "exp(" + to_string(Expression(sp, *a.exp_arg)) + ")";
    if (a.kind == AtomKind::Log) return "log(" + atom_display_name(st, a.log_of) + ")";
    return atom_display_name(st, id);
}

inline std::string to_string(const Expression& e) {
    const Poly& p = e.poly();
    if (p.t.empty()) return "0";
    std::string out;
    bool first = true;
    for (auto& t : p.t) {
        Rational c = t.c;
        bool neg = c < 0;
        if (neg) c = -c;
        if (first)
            out += neg ? "-" : "";
        else
            out += neg ? " - " : " + ";
        first = false;
        std::string factors;
        for (auto [id, ex] : t.m.f) {
            if (!factors.empty()) factors += "*";
            factors += atom_to_string(e.st(), id, e.table());
            if (ex != 1) factors += "^" + std::to_string(ex);
        }
        if (factors.empty()) {
            out += rat_str(c);
        } else {
            if (c != 1) out += rat_str(c) + "*";
            out += factors;
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// parser

namespace detail {

class Parser {
  public:
    Parser(std::shared_ptr<const SymbolTable> st, std::string_view s)
        : st_(std::move(st)), s_(s) {}

    Expression parse() {
        Expression e = parse_sum();
        skip_ws();
        if (pos_ != s_.size()) throw parse_error("unexpected input", pos_);
        return e;
    }

  private:
    Expression parse_sum() {
        Expression e = parse_term();
        for (;;) {
            skip_ws();
            if (peek() == '+') {
                ++pos_;
                e = e + parse_term();
            } else if (peek() == '-') {
                ++pos_;
                e = e - parse_term();
            } else {
                return e;
            }
        }
    }
    Expression parse_term() {
        Expression e = parse_factor();
        for (;;) {
            skip_ws();
            if (peek() == '*') {
                ++pos_;
                e = e * parse_factor();
            } else if (peek() == '/') {
                ++pos_;
                e = e / parse_factor();
            } else {
                return e;
            }
        }
    }
    Expression parse_factor() {
        skip_ws();
        if (peek() == '-') {
            ++pos_;
            return -parse_factor();
        }
        if (peek() == '+') {
            ++pos_;
            return parse_factor();
        }
        Expression e = parse_primary();
        skip_ws();
        if (peek() == '^') {
            ++pos_;
            int ex = parse_int_exponent();
            e = e.pow(ex);
        }
        return e;
    }
    int parse_int_exponent() {
        skip_ws();
        bool paren = false;
        if (peek() == '(') {
            paren = true;
            ++pos_;
            skip_ws();
        }
        bool neg = false;
        if (peek() == '-') {
            neg = true;
            ++pos_;
        }
        std::size_t start = pos_;
        while (pos_ < s_.size() && std::isdigit(static_cast<unsigned char>(s_[pos_]))) ++pos_;
        if (start == pos_) throw parse_error("expected integer exponent", pos_);
        long v = std::stol(std::string(s_.substr(start, pos_ - start)));
        if (paren) {
            skip_ws();
            if (peek() != ')') throw parse_error("expected ')'", pos_);
            ++pos_;
        }
        return static_cast<int>(neg ? -v : v);
    }
    Expression parse_primary() {
        skip_ws();
        char c = peek();
        if (c == '(') {
            ++pos_;
            Expression e = parse_sum();
            skip_ws();
            if (peek() != ')') throw parse_error("expected ')'", pos_);
            ++pos_;
            return e;
        }
        if (std::isdigit(static_cast<unsigned char>(c))) return parse_number();
        if (std::isalpha(static_cast<unsigned char>(c))) return parse_identifier();
        throw parse_error("unexpected character", pos_);
    }
    Expression parse_number() {
        std::size_t start = pos_;
        while (pos_ < s_.size() && std::isdigit(static_cast<unsigned char>(s_[pos_]))) ++pos_;
        Rational r(Integer(std::string(s_.substr(start, pos_ - start))));
        if (peek() == '.') {
            ++pos_;
            std::size_t fs = pos_;
            while (pos_ < s_.size() && std::isdigit(static_cast<unsigned char>(s_[pos_]))) ++pos_;
            if (fs == pos_) throw parse_error("expected digits after '.'", pos_);
            std::string frac(s_.substr(fs, pos_ - fs));
            Integer num(frac);
            Integer den = 1;
            for (std::size_t i = 0; i < frac.size(); ++i) den *= 10;
            r += Rational(num, den);
        }
        return Expression::constant(st_, r);
    }
    Expression parse_identifier() {
        std::size_t start = pos_;
        while (pos_ < s_.size() && (std::isalnum(static_cast<unsigned char>(s_[pos_])) ||
                                    s_[pos_] == '_'))
            ++pos_;
        std::string name(s_.substr(start, pos_ - start));
        if (name == "exp") {
            skip_ws();
            if (peek() != '(') throw parse_error("expected '(' after exp", pos_);
            ++pos_;
            Expression a = parse_sum();
            skip_ws();
            if (peek() != ')') throw parse_error("expected ')'", pos_);
            ++pos_;
            return exp(a);
        }
        if (name == "log") {
            skip_ws();
            if (peek() != '(') throw parse_error("expected '(' after log", pos_);
            ++pos_;
            Expression a = parse_sum();
            skip_ws();
            if (peek() != ')') throw parse_error("expected ')'", pos_);
            ++pos_;
            return log(a);
        }
        int ticks = 0;
        while (peek() == '\'') {
            ++ticks;
            ++pos_;
        }
        if (!st_->has(name))
            throw undeclared_error("undeclared symbol '" + name + "' at offset " +
                                   std::to_string(start));
        AtomId id = st_->id_of(name);
        const AtomInfo& a = st_->atom(id);
        if (ticks == 0) return Expression::atom(st_, id);
        if (a.kind == AtomKind::Opaque)
            return Expression::atom(st_, st_->opaque_order(id, a.order + ticks));
        if (a.kind == AtomKind::Antideriv) {
            Expression e(st_, *a.integrand);
            for (int i = 1; i < ticks; ++i) e = e.diff(st_->time_atom);
            return e;
        }
        throw parse_error("'" + name + "' cannot carry derivative ticks", start);
    }

    char peek() const { return pos_ < s_.size() ? s_[pos_] : '\0'; }
    void skip_ws() {
        while (pos_ < s_.size() && std::isspace(static_cast<unsigned char>(s_[pos_]))) ++pos_;
    }

    std::shared_ptr<const SymbolTable> st_;
    std::string_view s_;
    std::size_t pos_ = 0;
};

} // namespace detail

inline Expression parse(const std::shared_ptr<const SymbolTable>& st, std::string_view text) {
    return detail::Parser(st, text).parse();
}

} // namespace symfin
