#include "abc/abc.hpp"

#include <algorithm>
#include <map>
#include <set>
#include <stdexcept>
#include <string>

namespace abc {

namespace {

std::vector<int32_t> invert(const std::vector<int32_t>& f) {
    std::vector<int32_t> inv(f.size(), -1);
    for (size_t i = 0; i < f.size(); ++i) {
        if (f[i] < 0 || static_cast<size_t>(f[i]) >= f.size() || inv[f[i]] >= 0)
            throw std::invalid_argument("mapping is not a bijection");
        inv[f[i]] = static_cast<int32_t>(i);
    }
    return inv;
}

void check_grid(const Grid& g) {
    if (g.k < 1 || g.q < 1 || g.s < 1) throw std::invalid_argument("grid dimensions must be positive");
    if (g.k * g.s > (int64_t(1) << 30)) throw std::invalid_argument("fundamental block too large");
}

}  // namespace

GridPermutation GridPermutation::identity(const Grid& g) {
    check_grid(g);
    std::vector<int32_t> f(static_cast<size_t>(g.k * g.s));
    for (size_t i = 0; i < f.size(); ++i) f[i] = static_cast<int32_t>(i);
    return from_fundamental(g, std::move(f));
}

GridPermutation GridPermutation::from_fundamental(const Grid& g, std::vector<int32_t> fundamental) {
    check_grid(g);
    if (static_cast<int64_t>(fundamental.size()) != g.k * g.s)
        throw std::invalid_argument("fundamental mapping has wrong size");
    GridPermutation h;
    h.g_ = g;
    h.inv_ = invert(fundamental);
    h.f_ = std::move(fundamental);
    return h;
}

GridPermutation GridPermutation::from_full(const Grid& g, const std::vector<int64_t>& full) {
    check_grid(g);
    const int64_t cols = g.cols();
    if (static_cast<int64_t>(full.size()) != cols * g.s) throw std::invalid_argument("full mapping has wrong size");
    std::vector<int32_t> f(static_cast<size_t>(g.k * g.s));
    for (int64_t r = 0; r < g.s; ++r)
        for (int64_t c = 0; c < g.k; ++c) {
            int64_t img = full[c + cols * r];
            if (img < 0 || img >= cols * g.s) throw std::invalid_argument("image out of range");
            int64_t ic = img % cols, ir = img / cols;
            if (ic >= g.k) throw std::invalid_argument("permutation is twisted: atom leaves its 1/q column block");
            f[c + g.k * r] = static_cast<int32_t>(ic + g.k * ir);
        }
    GridPermutation h = from_fundamental(g, std::move(f));
    for (int64_t r = 0; r < g.s; ++r)
        for (int64_t c = 0; c < cols; ++c) {
            Cell img = h.apply({c, r});
            if (full[c + cols * r] != img.col + cols * img.row)
                throw std::invalid_argument("permutation does not commute with the 1/q rotation (atom " +
                                            std::to_string(c) + "," + std::to_string(r) + ")");
        }
    return h;
}

Cell GridPermutation::apply(Cell c) const {
    const int64_t b = c.col / g_.k, pos = c.col % g_.k;
    const int32_t img = f_[pos + g_.k * c.row];
    return {b * g_.k + img % g_.k, img / g_.k};
}

Cell GridPermutation::apply_inverse(Cell c) const {
    const int64_t b = c.col / g_.k, pos = c.col % g_.k;
    const int32_t img = inv_[pos + g_.k * c.row];
    return {b * g_.k + img % g_.k, img / g_.k};
}

GridPermutation GridPermutation::inverse() const { return from_fundamental(g_, inv_); }

GridPermutation GridPermutation::then(const GridPermutation& next) const {
    if (next.g_.k != g_.k || next.g_.q != g_.q || next.g_.s != g_.s) throw std::invalid_argument("grid mismatch");
    std::vector<int32_t> f(f_.size());
    for (size_t i = 0; i < f.size(); ++i) f[i] = next.f_[f_[i]];
    return from_fundamental(g_, std::move(f));
}

std::vector<int64_t> GridPermutation::to_full() const {
    const int64_t cols = g_.cols();
    std::vector<int64_t> full(static_cast<size_t>(cols * g_.s));
    for (int64_t r = 0; r < g_.s; ++r)
        for (int64_t c = 0; c < cols; ++c) {
            Cell img = apply({c, r});
            full[c + cols * r] = img.col + cols * img.row;
        }
    return full;
}

bool GridPermutation::is_identity() const {
    for (size_t i = 0; i < f_.size(); ++i)
        if (f_[i] != static_cast<int32_t>(i)) return false;
    return true;
}

bool GridPermutation::operator==(const GridPermutation& o) const {
    return g_.k == o.g_.k && g_.q == o.g_.q && g_.s == o.g_.s && f_ == o.f_;
}

GridPermutation h_from_words(const std::vector<std::vector<int>>& tuples, int64_t k, int64_t q, int64_t s_prev) {
    if (tuples.empty()) throw std::invalid_argument("no tuples");
    if (k < 1 || q < 1 || s_prev < 1) throw std::invalid_argument("bad grid parameters");
    if (k % s_prev != 0) throw std::invalid_argument("s_n does not divide k_n");
    const int64_t s_next = static_cast<int64_t>(tuples.size());
    if (s_next % s_prev != 0) throw std::invalid_argument("s_{n+1} is not a multiple of s_n");
    {
        // s_prev^k >= s_next
        BigInt pw;
        mpz_ui_pow_ui(pw.get_mpz_t(), static_cast<unsigned long>(s_prev), static_cast<unsigned long>(k));
        if (pw < BigInt(static_cast<long>(s_next)))
            throw std::invalid_argument("s_{n+1} exceeds s_n^k_n");
    }
    const int64_t f = k / s_prev;
    for (size_t s = 0; s < tuples.size(); ++s) {
        if (static_cast<int64_t>(tuples[s].size()) != k) throw std::invalid_argument("tuple length differs from k");
        std::vector<int64_t> cnt(s_prev, 0);
        for (int x : tuples[s]) {
            if (x < 0 || x >= s_prev) throw std::invalid_argument("tuple letter out of range");
            cnt[x]++;
        }
        for (int64_t x = 0; x < s_prev; ++x)
            if (cnt[x] != f)
                throw std::invalid_argument("tuple " + std::to_string(s) + ": letter " + std::to_string(x) + " occurs " +
                                            std::to_string(cnt[x]) + " times, expected " + std::to_string(f));
    }
    const int64_t c = s_next / s_prev;   // rows per band
    Grid g{k, q, s_next};
    std::vector<int32_t> fm(static_cast<size_t>(k * s_next), -1);
    std::vector<char> taken(fm.size(), 0);
    auto idx = [&](int64_t col, int64_t row) { return static_cast<size_t>(col + k * row); };
    for (int64_t s = 0; s < s_next; ++s)
        for (int64_t t = 0; t < k; ++t)
            if (s / c == tuples[s][t]) {
                fm[idx(t, s)] = static_cast<int32_t>(idx(t, s));
                taken[idx(t, s)] = 1;
            }
    for (int64_t s = 0; s < s_next; ++s)
        for (int64_t t = 0; t < k; ++t) {
            if (fm[idx(t, s)] >= 0) continue;
            const int64_t band = tuples[s][t];
            int64_t target = -1;
            for (int64_t r = band * c; r < (band + 1) * c && target < 0; ++r)
                if (!taken[idx(t, r)]) target = static_cast<int64_t>(idx(t, r));
            for (int64_t r = band * c; r < (band + 1) * c && target < 0; ++r)
                for (int64_t cc = 0; cc < k && target < 0; ++cc)
                    if (!taken[idx(cc, r)]) target = static_cast<int64_t>(idx(cc, r));
            if (target < 0) throw std::logic_error("no free cell in target band");
            fm[idx(t, s)] = static_cast<int32_t>(target);
            taken[target] = 1;
        }
    return GridPermutation::from_fundamental(g, std::move(fm));
}

RequirementsReport requirements_check(const std::vector<StageParams>& params,
                                      const std::vector<std::vector<std::vector<int>>>& prescriptions) {
    RequirementsReport rep;
    if (params.size() < 2) {
        rep.r1 = false;
        rep.violations.push_back("R1: fewer than two stages");
        return rep;
    }
    for (size_t n = 0; n + 1 < params.size(); ++n) {
        const auto& a = params[n];
        const auto& b = params[n + 1];
        if (b.s > a.s) continue;
        bool at_max = false;
        if (a.s > 0 && a.k % a.s == 0) {
            BigInt num, den, part;
            mpz_fac_ui(num.get_mpz_t(), static_cast<unsigned long>(a.k));
            mpz_fac_ui(part.get_mpz_t(), static_cast<unsigned long>(a.k / a.s));
            mpz_pow_ui(den.get_mpz_t(), part.get_mpz_t(), static_cast<unsigned long>(a.s));
            at_max = (num / den) == BigInt(static_cast<long>(b.s));
        }
        if (!at_max) {
            rep.r1 = false;
            rep.violations.push_back("R1: s does not grow from stage " + std::to_string(n) + " to " +
                                     std::to_string(n + 1) + " (s=" + std::to_string(a.s) + ")");
        }
    }
    if (params.back().s < 2) {
        rep.r1 = false;
        rep.violations.push_back("R1: final s < 2");
    }
    for (size_t n = 0; n < prescriptions.size() && n + 1 < params.size(); ++n) {
        const auto& a = params[n];
        for (size_t t = 0; t < prescriptions[n].size(); ++t) {
            std::map<int, int64_t> cnt;
            for (int x : prescriptions[n][t]) cnt[x]++;
            bool good = a.k % a.s == 0 && static_cast<int64_t>(cnt.size()) == a.s;
            for (auto& [x, c] : cnt) good = good && c == a.k / a.s;
            if (!good) {
                rep.r2 = false;
                rep.violations.push_back("R2: stage " + std::to_string(n + 1) + " tuple " + std::to_string(t) +
                                         " is not equidistributed");
            }
        }
        std::map<std::vector<int>, size_t> seen;
        for (size_t t = 0; t < prescriptions[n].size(); ++t) {
            auto [it, fresh] = seen.emplace(prescriptions[n][t], t);
            if (!fresh) {
                rep.r3 = false;
                rep.violations.push_back("R3: stage " + std::to_string(n + 1) + " rows " + std::to_string(it->second) +
                                         " and " + std::to_string(t) + " share a tuple");
            }
        }
    }
    return rep;
}

namespace {

int64_t stage_cols(const std::vector<AbcStage>& st, int n) { return to_i64(st[n].params.q); }

Cell apply_h(const std::vector<AbcStage>& st, int m, int64_t cols, int64_t rows, Cell c, bool inverse) {
    const GridPermutation& h = st[m].h;
    const Grid& g = h.grid();
    const int64_t fx = cols / g.cols(), fy = rows / g.s;
    Cell coarse{c.col / fx, c.row / fy};
    Cell img = inverse ? h.apply_inverse(coarse) : h.apply(coarse);
    return {c.col + (img.col - coarse.col) * fx, c.row + (img.row - coarse.row) * fy};
}

}  // namespace

Cell H_apply(const std::vector<AbcStage>& st, int n, Cell c) {
    const int64_t cols = stage_cols(st, n), rows = st[n].params.s;
    for (int m = n; m >= 1; --m) c = apply_h(st, m, cols, rows, c, false);
    return c;
}

Cell H_apply_inverse(const std::vector<AbcStage>& st, int n, Cell c) {
    const int64_t cols = stage_cols(st, n), rows = st[n].params.s;
    for (int m = 1; m <= n; ++m) c = apply_h(st, m, cols, rows, c, true);
    return c;
}

Cell T_apply(const std::vector<AbcStage>& st, int n, Cell c) {
    const int64_t q = stage_cols(st, n);
    const int64_t p = to_i64(st[n].params.p % st[n].params.q);
    Cell y = H_apply_inverse(st, n, c);
    y.col = (y.col + p) % q;
    return H_apply(st, n, y);
}

PeriodicProcess::PeriodicProcess(int64_t cols, int64_t rows, std::vector<int64_t> next, std::vector<int64_t> bases)
    : cols_(cols), rows_(rows), next_(std::move(next)), bases_(std::move(bases)) {
    const int64_t n = cols_ * rows_;
    if (static_cast<int64_t>(next_.size()) != n) throw std::invalid_argument("permutation size mismatch");
    if (bases_.empty()) throw std::invalid_argument("no towers");
    tower_.assign(n, -1);
    level_.assign(n, -1);
    for (size_t t = 0; t < bases_.size(); ++t) {
        int64_t a = bases_[t];
        int64_t h = 0;
        do {
            if (a < 0 || a >= n || tower_[a] >= 0) throw std::invalid_argument("towers overlap or permutation invalid");
            tower_[a] = static_cast<int64_t>(t);
            level_[a] = h++;
            a = next_[a];
        } while (a != bases_[t]);
        if (t == 0) height_ = h;
        if (h != height_) throw std::invalid_argument("cycles of unequal length");
    }
    if (height_ * static_cast<int64_t>(bases_.size()) != n) throw std::invalid_argument("towers do not cover all atoms");
    by_level_.assign(n, -1);
    for (int64_t a = 0; a < n; ++a) by_level_[tower_[a] * height_ + level_[a]] = a;
}

PeriodicProcess stage_process(const std::vector<AbcStage>& st, int n) {
    const int64_t cols = stage_cols(st, n), rows = st[n].params.s;
    std::vector<int64_t> next(static_cast<size_t>(cols * rows));
    for (int64_t r = 0; r < rows; ++r)
        for (int64_t c = 0; c < cols; ++c) {
            Cell y = T_apply(st, n, {c, r});
            next[c + cols * r] = y.col + cols * y.row;
        }
    std::vector<int64_t> bases;
    for (int64_t s = 0; s < rows; ++s) {
        Cell b = H_apply(st, n, {0, s});
        bases.push_back(b.col + cols * b.row);
    }
    return PeriodicProcess(cols, rows, std::move(next), std::move(bases));
}

EpsApproxResult epsilon_approximation_check(const PeriodicProcess& coarse, const PeriodicProcess& fine, double eps) {
    EpsApproxResult res;
    if (fine.cols() % coarse.cols() != 0 || fine.rows() % coarse.rows() != 0)
        throw std::invalid_argument("fine partition does not refine the coarse one");
    const int64_t fx = fine.cols() / coarse.cols(), fy = fine.rows() / coarse.rows();
    auto parent = [&](int64_t a) {
        const int64_t c = a % fine.cols(), r = a / fine.cols();
        return (c / fx) + coarse.cols() * (r / fy);
    };
    int64_t bad = 0;
    for (int64_t b = 0; b < fine.size(); ++b) {
        const int64_t A = parent(b);
        if (coarse.level_of(A) == coarse.height() - 1) continue;
        if (parent(fine.next()[b]) != coarse.next()[A]) ++bad;
    }
    res.d_atoms = bad;
    res.mass = BigRatio(BigInt(static_cast<long>(bad)), BigInt(static_cast<long>(fine.size())));
    res.ok = res.mass.to_double() < eps;
    return res;
}

std::vector<Word> tower_names(const std::vector<AbcStage>& st, int n) {
    if (n < 1 || n >= static_cast<int>(st.size())) throw std::invalid_argument("tower_names needs 1 <= n < #stages");
    const AbcStage& prev = st[n - 1];
    if (!prev.materialized || prev.tower_words.empty()) throw std::invalid_argument("stage n-1 names not available");
    const PeriodicProcess coarse = stage_process(st, n - 1);
    const int64_t qn = stage_cols(st, n), sn = st[n].params.s;
    const int64_t qp = stage_cols(st, n - 1), sp = prev.params.s;
    const int64_t pn = to_i64(st[n].params.p % st[n].params.q);
    const int64_t l = prev.params.l;
    const int64_t blk = l * qp;
    const int64_t fx = qn / qp, fy = sn / sp;
    std::vector<Word> names;
    std::vector<int64_t> atom(static_cast<size_t>(qn));
    for (int64_t s = 0; s < sn; ++s) {
        for (int64_t t = 0; t < qn; ++t) {
            const int64_t i = static_cast<int64_t>(static_cast<__int128>(t) * pn % qn);
            if (t % blk == 0 && i % blk != 0)
                throw std::logic_error("tower " + std::to_string(s) + ": block start not aligned at t=" + std::to_string(t));
            Cell x = H_apply(st, n, {i, s});
            atom[t] = (x.col / fx) + qp * (x.row / fy);
        }
        Word w(static_cast<size_t>(qn));
        for (int64_t b0 = 0; b0 < qn; b0 += blk) {
            int64_t first = -1, last = -1;
            for (int64_t u = 0; u < blk; ++u)
                if (coarse.level_of(atom[b0 + u]) == qp - 1) {
                    if (first < 0) first = u;
                    last = u;
                }
            if (first < 0) throw std::logic_error("membership ambiguous: block never reaches a top level");
            for (int64_t u = 0; u < blk; ++u) {
                const int64_t a = atom[b0 + u];
                if (u <= first) {
                    w[b0 + u] = kSymB;
                } else if (u > last) {
                    w[b0 + u] = kSymE;
                } else {
                    if (coarse.next()[atom[b0 + u - 1]] != a)
                        throw std::logic_error("membership ambiguous: middle step leaves the stage tower");
                    w[b0 + u] = prev.tower_words[coarse.tower_of(a)][coarse.level_of(a)];
                }
            }
        }
        names.push_back(std::move(w));
    }
    return names;
}

std::vector<AbcStage> drive_from_construction_sequence(const ConstructionSequence& seq, int64_t cap) {
    std::vector<AbcStage> st;
    AbcStage s0;
    s0.params = seq.params.at(0);
    s0.h = GridPermutation::identity(Grid{1, 1, s0.params.s});
    for (size_t i = 0; i < seq.alphabet.size(); ++i) s0.tower_words.push_back(Word{static_cast<Symbol>(i)});
    s0.materialized = true;
    st.push_back(std::move(s0));
    for (size_t n = 0; n < seq.prescriptions.size(); ++n) {
        const StageParams& a = seq.params[n];
        if (a.k % a.s != 0)
            throw std::invalid_argument("stage " + std::to_string(n) + ": s_n=" + std::to_string(a.s) +
                                        " does not divide k_n=" + std::to_string(a.k));
        AbcStage nx;
        nx.params = seq.params[n + 1];
        nx.h = h_from_words(seq.prescriptions[n], a.k, to_i64(a.q), a.s);
        st.push_back(std::move(nx));
        if (st[n].materialized && st.back().params.q <= cap) {
            st.back().tower_words = tower_names(st, static_cast<int>(n + 1));
            st.back().materialized = true;
        }
    }
    return st;
}

std::optional<RoundTripMismatch> round_trip_check(const std::vector<AbcStage>& st, const ConstructionSequence& seq) {
    for (size_t n = 0; n < st.size() && n < seq.stages.size(); ++n) {
        if (!st[n].materialized || !seq.materialized(n)) continue;
        const auto& a = st[n].tower_words;
        const auto& b = seq.stages[n].words;
        if (a.size() != b.size()) return RoundTripMismatch{static_cast<int>(n), std::min(a.size(), b.size()), 0};
        for (size_t w = 0; w < a.size(); ++w) {
            const size_t L = std::min(a[w].size(), b[w].size());
            for (size_t i = 0; i < L; ++i)
                if (a[w][i] != b[w][i]) return RoundTripMismatch{static_cast<int>(n), w, i};
            if (a[w].size() != b[w].size()) return RoundTripMismatch{static_cast<int>(n), w, L};
        }
    }
    return std::nullopt;
}

nlohmann::json to_json(const GridPermutation& h) {
    return {{"k", h.grid().k}, {"q", h.grid().q}, {"s", h.grid().s}, {"fundamental", h.fundamental()}};
}

GridPermutation grid_permutation_from_json(const nlohmann::json& j) {
    Grid g{j.at("k").get<int64_t>(), j.at("q").get<int64_t>(), j.at("s").get<int64_t>()};
    return GridPermutation::from_fundamental(g, j.at("fundamental").get<std::vector<int32_t>>());
}

}  // namespace abc
