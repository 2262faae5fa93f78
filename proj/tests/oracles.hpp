#pragma once
// Brute-force reference implementations used by the tests. Deliberately naive and
// independent of the library code paths they check.

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdint>
#include <map>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include <gmpxx.h>

#include "abc/abc.hpp"
#include "abc/analytic.hpp"
#include "abc/blockslide.hpp"
#include "abc/symbolic.hpp"

namespace oracle {

// j with p*j = i mod q by linear search
inline int64_t inv_index(int64_t p, int64_t q, int64_t i) {
    for (int64_t j = 0; j < q; ++j)
        if ((p * j) % q == i % q) return j;
    throw std::logic_error("p not invertible mod q");
}

inline abc::Word circular(const std::vector<abc::Word>& w, int64_t p, int64_t q, int64_t l) {
    abc::Word out;
    for (int64_t i = 0; i < q; ++i) {
        const int64_t ji = inv_index(p, q, i);
        for (const auto& wj : w) {
            for (int64_t t = 0; t < q - ji; ++t) out.push_back(abc::kSymB);
            for (int64_t c = 0; c + 1 < l; ++c)
                for (auto x : wj) out.push_back(x);
            for (int64_t t = 0; t < ji; ++t) out.push_back(abc::kSymE);
        }
    }
    return out;
}

// true when some w occurs in u.v at an offset strictly inside u
inline bool readable(const std::vector<abc::Word>& fam) {
    for (const auto& u : fam)
        for (const auto& v : fam) {
            abc::Word uv = u;
            uv.insert(uv.end(), v.begin(), v.end());
            for (const auto& w : fam)
                for (size_t off = 1; off < u.size(); ++off) {
                    if (off + w.size() > uv.size()) break;
                    bool eq = true;
                    for (size_t t = 0; t < w.size() && eq; ++t) eq = uv[off + t] == w[t];
                    if (eq) return false;
                }
        }
    return true;
}

inline int64_t gcd64(int64_t a, int64_t b) {
    while (b) {
        int64_t t = a % b;
        a = b;
        b = t;
    }
    return a < 0 ? -a : a;
}

// Where each atom goes, by exact rational application of the map to refine^2 sample points per atom.
// Returns -1 entries for atoms that are split or not carried onto an atom.
inline std::vector<int64_t> realized(const abc::BlockSlideMap& m, int64_t cols, int64_t rows, int refine = 2) {
    std::vector<int64_t> out(static_cast<size_t>(cols * rows), -1);
    for (int64_t r = 0; r < rows; ++r)
        for (int64_t c = 0; c < cols; ++c) {
            int64_t img = -2;
            mpq_class t1, t2;
            bool ok = true;
            for (int u = 0; u < refine && ok; ++u)
                for (int v = 0; v < refine && ok; ++v) {
                    mpq_class x1(2 * (c * refine + u) + 1, 2 * refine * cols), x2(2 * (r * refine + v) + 1, 2 * refine * rows);
                    x1.canonicalize();
                    x2.canonicalize();
                    abc::RatPoint pt{abc::BigRatio(x1), abc::BigRatio(x2)};
                    abc::RatPoint y = abc::apply(m, pt);
                    mpq_class y1 = y.x1.frac().raw(), y2 = y.x2.frac().raw();
                    mpq_class a1 = y1 * cols, a2 = y2 * rows;
                    mpz_class f1, f2;
                    mpz_fdiv_q(f1.get_mpz_t(), a1.get_num_mpz_t(), a1.get_den_mpz_t());
                    mpz_fdiv_q(f2.get_mpz_t(), a2.get_num_mpz_t(), a2.get_den_mpz_t());
                    mpq_class d1 = y1 - x1, d2 = y2 - x2;
                    const int64_t a = f1.get_si() + cols * f2.get_si();
                    if (img == -2) {
                        img = a, t1 = d1, t2 = d2;
                    } else if (img != a || t1 != d1 || t2 != d2) {
                        ok = false;
                    }
                }
            // translation must move atoms onto atoms
            mpq_class s1 = t1 * cols, s2 = t2 * rows;
            if (ok && s1.get_den() == 1 && s2.get_den() == 1) out[c + cols * r] = img;
        }
    return out;
}

inline std::vector<int64_t> identity_perm(size_t n) {
    std::vector<int64_t> v(n);
    for (size_t i = 0; i < n; ++i) v[i] = static_cast<int64_t>(i);
    return v;
}

// naive trig series in long double
inline long double trig(const abc::TrigPolynomial& tp, long double x) {
    const long double two_pi = 6.283185307179586476925286766559L;
    long double s = tp.a[0];
    for (size_t j = 1; j < tp.a.size(); ++j)
        s += tp.a[j] * std::cos(two_pi * j * tp.N * x) + tp.b[j] * std::sin(two_pi * j * tp.N * x);
    return s;
}

inline std::complex<long double> trig(const abc::TrigPolynomial& tp, std::complex<long double> z) {
    const long double two_pi = 6.283185307179586476925286766559L;
    std::complex<long double> s = tp.a[0];
    for (size_t j = 1; j < tp.a.size(); ++j) {
        const std::complex<long double> ph = two_pi * static_cast<long double>(j * tp.N) * z;
        s += static_cast<long double>(tp.a[j]) * std::cos(ph) + static_cast<long double>(tp.b[j]) * std::sin(ph);
    }
    return s;
}

// random untwisted 1/q-commuting permutation given by a uniformly random fundamental block
inline abc::GridPermutation random_perm(const abc::Grid& g, std::mt19937_64& rng) {
    std::vector<int32_t> f(static_cast<size_t>(g.k * g.s));
    for (size_t i = 0; i < f.size(); ++i) f[i] = static_cast<int32_t>(i);
    std::shuffle(f.begin(), f.end(), rng);
    return abc::GridPermutation::from_fundamental(g, f);
}

// per-column vertical rotation (one V slide), or per-row horizontal rotation (one H slide, q = 1 only)
inline abc::GridPermutation random_rotation(const abc::Grid& g, bool rows, std::mt19937_64& rng) {
    std::vector<int32_t> f(static_cast<size_t>(g.k * g.s));
    std::vector<int64_t> sh(static_cast<size_t>(rows ? g.s : g.k));
    for (auto& x : sh) x = static_cast<int64_t>(rng() % static_cast<uint64_t>(rows ? g.k : g.s));
    for (int64_t r = 0; r < g.s; ++r)
        for (int64_t c = 0; c < g.k; ++c)
            f[c + g.k * r] = static_cast<int32_t>(rows ? (c + sh[r]) % g.k + g.k * r : c + g.k * ((r + sh[c]) % g.s));
    return abc::GridPermutation::from_fundamental(g, f);
}

inline abc::Word random_word(size_t n, int sigma, std::mt19937_64& rng) {
    abc::Word w(n);
    for (auto& x : w) x = static_cast<abc::Symbol>(rng() % static_cast<uint64_t>(sigma));
    return w;
}

}  // namespace oracle
