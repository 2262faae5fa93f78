#include "abc/blockslide.hpp"

#include <algorithm>
#include <numeric>
#include <stdexcept>
#include <string>

namespace abc {

namespace {

BigRatio R(long n, long d) { return BigRatio(BigInt(n), BigInt(d)); }

BigRatio centered(const BigRatio& v) {
    BigRatio r = v.frac();
    if (r > R(1, 2)) r = r - BigRatio(1);
    return r;
}

int64_t lcm_checked(int64_t a, int64_t b) {
    __int128 l = static_cast<__int128>(a / std::gcd(a, b)) * b;
    if (l > (static_cast<__int128>(1) << 62)) throw std::overflow_error("lattice denominator too large");
    return static_cast<int64_t>(l);
}

// Fold a step function to the smallest equivalent (N, K) description.
StepFunction simplify(StepFunction f) {
    bool all_equal = true;
    for (const auto& v : f.values) all_equal = all_equal && v == f.values[0];
    if (all_equal) return StepFunction::constant(f.values[0]);
    bool changed = true;
    while (changed) {
        changed = false;
        for (int64_t d = 2; d <= f.K; ++d) {
            if (f.K % d) continue;
            const int64_t P = f.K / d;
            bool periodic = true;
            for (int64_t i = 0; i < f.K && periodic; ++i) periodic = f.values[i] == f.values[i % P];
            if (periodic) {
                f.values.resize(P);
                f.N *= d;
                f.K = P;
                changed = true;
                break;
            }
            bool runs = true;
            for (int64_t i = 0; i < f.K && runs; ++i) runs = f.values[i] == f.values[(i / d) * d];
            if (runs) {
                std::vector<BigRatio> v;
                for (int64_t i = 0; i < f.K; i += d) v.push_back(f.values[i]);
                f.values = std::move(v);
                f.K /= d;
                changed = true;
                break;
            }
        }
    }
    return f;
}

StepFunction add(const StepFunction& a, const StepFunction& b) {
    const int64_t N = std::gcd(a.N, b.N);
    const int64_t M = lcm_checked(a.K * a.N, b.K * b.N);
    const int64_t K = M / N;
    std::vector<BigRatio> v(static_cast<size_t>(K));
    for (int64_t i = 0; i < K; ++i) {
        const int64_t ia = (i / (M / (a.K * a.N))) % a.K;
        const int64_t ib = (i / (M / (b.K * b.N))) % b.K;
        v[i] = centered(a.values[ia] + b.values[ib]);
    }
    return simplify(StepFunction::cells(N, K, std::move(v)));
}

}  // namespace

StepFunction StepFunction::constant(const BigRatio& v) { return cells(1, 1, {v}); }

StepFunction StepFunction::cells(int64_t N, int64_t K, std::vector<BigRatio> values) {
    if (N < 1 || K < 1) throw std::invalid_argument("step function needs N, K >= 1");
    if (static_cast<int64_t>(values.size()) != K) throw std::invalid_argument("step function needs K values");
    StepFunction f;
    f.N = N;
    f.K = K;
    f.values = std::move(values);
    return f;
}

BigRatio StepFunction::operator()(const BigRatio& t) const {
    BigRatio u = t.frac() * BigRatio(BigInt(static_cast<long>(K)) * BigInt(static_cast<long>(N)), 1);
    BigInt i = u.floor() % BigInt(static_cast<long>(K));
    return values[static_cast<size_t>(i.get_si())];
}

bool StepFunction::is_zero() const {
    for (const auto& v : values)
        if (v.den() != 1) return false;
    return true;
}

StepFunction StepFunction::negated() const {
    StepFunction f = *this;
    for (auto& v : f.values) v = -v;
    return f;
}

std::vector<BigRatio> StepFunction::breakpoints() const {
    std::vector<BigRatio> b;
    for (int64_t i = 0; i < K; ++i) b.push_back(BigRatio(BigInt(static_cast<long>(i)), BigInt(static_cast<long>(K * N))));
    return b;
}

BigRatio StepFunction::total_variation() const {
    BigRatio tv(0);
    for (int64_t i = 0; i < K; ++i) {
        BigRatio d = values[i] - values[(i + K - 1) % K];
        tv = tv + (d < BigRatio(0) ? -d : d);
    }
    return tv;
}

BlockSlideMap BlockSlideMap::inverse() const {
    BlockSlideMap m;
    for (auto it = steps.rbegin(); it != steps.rend(); ++it) m.steps.push_back({it->axis, it->f.negated()});
    return m;
}

BlockSlideMap BlockSlideMap::then(const BlockSlideMap& next) const {
    BlockSlideMap m = *this;
    m.steps.insert(m.steps.end(), next.steps.begin(), next.steps.end());
    return m;
}

void BlockSlideMap::normalize() {
    std::vector<Slide> out;
    for (const auto& s : steps) {
        if (!out.empty() && out.back().axis == s.axis)
            out.back().f = add(out.back().f, s.f);
        else
            out.push_back(s);
        if (out.back().f.is_zero()) out.pop_back();
    }
    steps = std::move(out);
}

RatPoint apply(const BlockSlideMap& map, const RatPoint& pt) {
    RatPoint p{pt.x1.frac(), pt.x2.frac()};
    for (const auto& s : map.steps) {
        if (s.axis == Axis::H)
            p.x1 = (p.x1 + s.f(p.x2)).frac();
        else
            p.x2 = (p.x2 + s.f(p.x1)).frac();
    }
    return p;
}

std::vector<int64_t> atom_images(const BlockSlideMap& map, const Grid& g, int refine, int64_t col_limit) {
    if (refine < 1) throw std::invalid_argument("refine must be >= 1");
    const int64_t cols = g.cols(), rows = g.s;
    int64_t D1 = 2 * refine * cols, D2 = 2 * refine * rows;
    for (const auto& s : map.steps) {
        int64_t& grid_d = s.axis == Axis::V ? D1 : D2;   // breakpoints live on the other axis
        int64_t& val_d = s.axis == Axis::V ? D2 : D1;
        grid_d = lcm_checked(grid_d, s.f.K * s.f.N);
        for (const auto& v : s.f.values) val_d = lcm_checked(val_d, to_i64(v.den()));
    }
    struct Compiled {
        Axis axis;
        int64_t cell;   // lattice units per grid interval
        int64_t K;
        std::vector<int64_t> shift;
    };
    std::vector<Compiled> cs;
    for (const auto& s : map.steps) {
        Compiled c{s.axis, 0, s.f.K, {}};
        const int64_t Dg = s.axis == Axis::V ? D1 : D2, Dv = s.axis == Axis::V ? D2 : D1;
        c.cell = Dg / (s.f.K * s.f.N);
        for (const auto& v : s.f.values) {
            BigRatio sc = v * BigRatio(Dv);
            int64_t x = to_i64(sc.num()) % Dv;
            c.shift.push_back(x < 0 ? x + Dv : x);
        }
        cs.push_back(std::move(c));
    }
    const int64_t s1 = D1 / (2 * refine * cols), s2 = D2 / (2 * refine * rows);
    const int64_t c1 = D1 / cols, c2 = D2 / rows;
    const int64_t ncols = col_limit > 0 ? std::min(col_limit, cols) : cols;
    std::vector<int64_t> out(static_cast<size_t>(ncols * rows));
    for (int64_t r = 0; r < rows; ++r)
        for (int64_t c = 0; c < ncols; ++c) {
            int64_t img = -1, t1 = 0, t2 = 0;
            for (int u = 0; u < refine; ++u)
                for (int v = 0; v < refine; ++v) {
                    const int64_t X1 = (2 * (c * refine + u) + 1) * s1, X2 = (2 * (r * refine + v) + 1) * s2;
                    int64_t y1 = X1, y2 = X2;
                    for (const auto& st : cs) {
                        if (st.axis == Axis::H) {
                            y1 += st.shift[(y2 / st.cell) % st.K];
                            if (y1 >= D1) y1 -= D1;
                        } else {
                            y2 += st.shift[(y1 / st.cell) % st.K];
                            if (y2 >= D2) y2 -= D2;
                        }
                    }
                    const int64_t d1 = ((y1 - X1) % D1 + D1) % D1, d2 = ((y2 - X2) % D2 + D2) % D2;
                    const int64_t a = (y1 / c1) + cols * (y2 / c2);
                    if (d1 % c1 || d2 % c2)
                        throw std::domain_error("map does not send atom (" + std::to_string(c) + "," + std::to_string(r) +
                                                ") onto an atom");
                    if (img < 0) {
                        img = a, t1 = d1, t2 = d2;
                    } else if (img != a || t1 != d1 || t2 != d2) {
                        throw std::domain_error("map splits atom (" + std::to_string(c) + "," + std::to_string(r) + ")");
                    }
                }
            out[c + ncols * r] = img;
        }
    return out;
}

namespace {

Slide hs(StepFunction f) { return {Axis::H, std::move(f)}; }
Slide vs(StepFunction f) { return {Axis::V, std::move(f)}; }

BlockSlideMap interchange0(int64_t k, int64_t q) {
    const BigRatio w = R(1, k * q), z(0), half = R(1, 2);
    auto sig1 = StepFunction::cells(1, 2, {z, w});
    auto sig2 = StepFunction::cells(1, 2, {w, z});
    std::vector<BigRatio> v3(k, half), v4(k, half);
    v3[0] = z;
    v4[0] = z;
    if (k > 1) v4[1] = z;
    auto sig3 = StepFunction::cells(q, k, v3);
    auto sig4 = StepFunction::cells(q, k, v4);
    BlockSlideMap m;
    m.steps = {hs(sig1.negated()), vs(sig3),  hs(sig2),  vs(StepFunction::constant(half)),
               hs(sig2.negated()), vs(sig3), hs(sig1), vs(sig4)};
    return m;
}

// swap (0,s-1) <-> (1,s-1), on the doubled grid internally
BlockSlideMap base_swap(int64_t k, int64_t q, int64_t s) {
    std::vector<BigRatio> rv(2 * s, BigRatio(0));
    rv[2 * s - 2] = R(2, k * q);
    std::vector<BigRatio> cv(k, BigRatio(0));
    cv[2] = cv[3] = R(1, 2 * s);
    BlockSlideMap pre;
    pre.steps = {hs(StepFunction::cells(1, 2 * s, rv)), vs(StepFunction::cells(q, k, cv))};
    BlockSlideMap m = pre.then(double_two_cycle(k, q, 2 * s)).then(pre.inverse());
    m.normalize();
    return m;
}

}  // namespace

BlockSlideMap column_interchange(int64_t i, int64_t k, int64_t q) {
    if (k < 1 || q < 1) throw std::invalid_argument("k, q must be >= 1");
    if (i < 0 || i >= k) throw std::invalid_argument("column index out of range");
    BlockSlideMap m = interchange0(k, q);
    if (i > 0) {
        BlockSlideMap sh;
        sh.steps = {hs(StepFunction::constant(R(-i, k * q)))};
        m = sh.then(m).then(sh.inverse());
        m.normalize();
    }
    return m;
}

BlockSlideMap double_two_cycle(int64_t k, int64_t q, int64_t s) {
    if (k < 4) throw std::invalid_argument("double 2-cycle needs at least 4 columns per block");
    if (q < 1 || s < 1) throw std::invalid_argument("q, s must be >= 1");
    std::vector<BigRatio> v(s, BigRatio(0));
    v[s - 1] = R(2, k * q);
    auto sig5 = StepFunction::cells(1, s, v);
    BlockSlideMap f0 = interchange0(k, q);
    BlockSlideMap g1, g2;
    g1.steps = {hs(sig5.negated())};
    g2.steps = {hs(sig5)};
    BlockSlideMap m = f0.then(g1).then(f0).then(g2);
    m.normalize();
    return m;
}

BlockSlideMap swap_cells(Cell a, Cell b, int64_t k, int64_t q, int64_t s) {
    if (a.col < 0 || a.col >= k || b.col < 0 || b.col >= k || a.row < 0 || a.row >= s || b.row < 0 || b.row >= s)
        throw std::invalid_argument("cell outside the first block");
    if (a == b) throw std::invalid_argument("cannot swap a cell with itself");
    if (k < 4 || s < 2) {
        const int64_t gx = k < 4 ? (4 + k - 1) / k : 1, gy = s < 2 ? 2 : 1;
        BlockSlideMap m;
        for (int64_t u = 0; u < gx; ++u)
            for (int64_t v = 0; v < gy; ++v)
                m = m.then(swap_cells({a.col * gx + u, a.row * gy + v}, {b.col * gx + u, b.row * gy + v}, k * gx, q, s * gy));
        m.normalize();
        return m;
    }
    BlockSlideMap Q;
    int64_t jb = b.row;
    if (a.row == b.row) {
        std::vector<BigRatio> cv(k, BigRatio(0));
        cv[b.col] = R(1, s);
        Q.steps.push_back(vs(StepFunction::cells(q, k, cv)));
        jb = (jb + 1) % s;
    }
    std::vector<BigRatio> rv(s, BigRatio(0));
    rv[a.row] = R(-a.col, k * q);
    rv[jb] = R(1 - b.col, k * q);
    Q.steps.push_back(hs(StepFunction::cells(1, s, rv)));
    std::vector<BigRatio> cv(k, BigRatio(0));
    cv[0] = R(s - 1 - a.row, s);
    cv[1] = R(s - 1 - jb, s);
    Q.steps.push_back(vs(StepFunction::cells(q, k, cv)));
    BlockSlideMap m = Q.then(base_swap(k, q, s)).then(Q.inverse());
    m.normalize();
    return m;
}

BlockSlideMap transposition(int64_t i, int64_t j, int64_t k, int64_t q, int64_t s) {
    if (i == 0 && j == s - 1) throw std::invalid_argument("transposition of (0,s-1) with itself");
    return swap_cells({0, s - 1}, {i, j}, k, q, s);
}

BlockSlideMap permutation_to_blockslide(const GridPermutation& perm) {
    const Grid& g = perm.grid();
    const int64_t k = g.k, s = g.s, q = g.q;
    BlockSlideMap m;
    if (perm.is_identity()) return m;
    const auto& f = perm.fundamental();
    // per-column vertical rotation
    {
        bool ok = true;
        std::vector<BigRatio> v(k, BigRatio(0));
        for (int64_t c = 0; c < k && ok; ++c) {
            const int32_t img0 = f[c];
            const int64_t e = img0 / k;
            for (int64_t r = 0; r < s && ok; ++r) {
                const int32_t img = f[c + k * r];
                ok = img % k == c && img / k == (r + e) % s;
            }
            v[c] = centered(R(e, s));
        }
        if (ok) {
            m.steps.push_back(vs(simplify(StepFunction::cells(q, k, v))));
            return m;
        }
    }
    if (q == 1) {
        bool ok = true;
        std::vector<BigRatio> v(s, BigRatio(0));
        for (int64_t r = 0; r < s && ok; ++r) {
            const int64_t d = f[k * r] % k;
            for (int64_t c = 0; c < k && ok; ++c) {
                const int32_t img = f[c + k * r];
                ok = img / k == r && img % k == (c + d) % k;
            }
            v[r] = centered(R(d, k));
        }
        if (ok) {
            m.steps.push_back(hs(simplify(StepFunction::cells(1, s, v))));
            return m;
        }
    }
    std::vector<char> seen(f.size(), 0);
    for (size_t start = 0; start < f.size(); ++start) {
        if (seen[start]) continue;
        std::vector<int32_t> cyc;
        for (int32_t x = static_cast<int32_t>(start); !seen[x]; x = f[x]) {
            seen[x] = 1;
            cyc.push_back(x);
        }
        for (size_t t = 1; t < cyc.size(); ++t)
            m = m.then(swap_cells({cyc[0] % k, cyc[0] / k}, {cyc[t] % k, cyc[t] / k}, k, q, s));
    }
    m.normalize();
    // every slide above commutes with x1 -> x1 + 1/q, so the first block decides
    std::vector<int64_t> want(static_cast<size_t>(k * s));
    const int64_t cols = g.cols();
    for (int64_t r = 0; r < s; ++r)
        for (int64_t c = 0; c < k; ++c) {
            Cell img = perm.apply({c, r});
            want[c + k * r] = img.col + cols * img.row;
        }
    if (atom_images(m, g, 1, k) != want) throw std::logic_error("block-slide decomposition does not realize the permutation");
    return m;
}

nlohmann::json to_json(const BlockSlideMap& m) {
    nlohmann::json arr = nlohmann::json::array();
    for (const auto& s : m.steps) {
        std::vector<std::string> b, v;
        for (const auto& x : s.f.breakpoints()) b.push_back(x.str());
        for (const auto& x : s.f.values) v.push_back(x.str());
        arr.push_back({{"axis", s.axis == Axis::H ? "h" : "v"}, {"period_divisor", s.f.N}, {"breakpoints", b}, {"values", v}});
    }
    return arr;
}

BlockSlideMap blockslide_from_json(const nlohmann::json& j) {
    BlockSlideMap m;
    for (const auto& e : j) {
        const std::string ax = e.at("axis").get<std::string>();
        if (ax != "h" && ax != "v") throw std::invalid_argument("axis must be h or v");
        std::vector<BigRatio> v;
        for (const auto& x : e.at("values")) v.push_back(BigRatio::parse(x.get<std::string>()));
        const int64_t N = e.at("period_divisor").get<int64_t>();
        const int64_t K = static_cast<int64_t>(v.size());
        m.steps.push_back({ax == "h" ? Axis::H : Axis::V, StepFunction::cells(N, K, std::move(v))});
    }
    return m;
}

}  // namespace abc
