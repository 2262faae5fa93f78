#include "abc/transect.hpp"

#include <numeric>
#include <ostream>
#include <stdexcept>
#include <string>

namespace abc {

const char* to_string(Segment s) {
    switch (s) {
        case Segment::Begin: return "begin";
        case Segment::Middle: return "middle";
        default: return "end";
    }
}

TransectTrace simulate_transect(int64_t p, int64_t q, int64_t k, int64_t l) {
    if (q < 1 || k < 1 || l < 2) throw std::invalid_argument("need q >= 1, k >= 1, l >= 2");
    if (std::gcd(p, q) != 1) throw std::invalid_argument("p and q are not coprime");
    TransectTrace tr;
    tr.p = p, tr.q = q, tr.k = k, tr.l = l;
    tr.qp = k * l * q * q;
    tr.pp = p * q * k * l + 1;
    const auto jt = j_table(p, q);
    // level of a coarse interval c = j + k i inside w_j is j_i
    const int64_t n = tr.qp;
    tr.positions.resize(n);
    tr.coarse.resize(n);
    tr.segments.assign(n, Segment::Middle);
    tr.level.assign(n, -1);
    const int64_t pp = tr.pp % n;
    for (int64_t t = 0; t < n; ++t) {
        const int64_t pos = static_cast<int64_t>(static_cast<__int128>(t) * pp % n);
        tr.positions[t] = pos;
        tr.coarse[t] = static_cast<int64_t>(static_cast<__int128>(pos) * (k * q) / n);
    }
    // blocks of length lq start where the fine cell is geometrically first in its kq-interval
    const int64_t blk = l * q;
    for (int64_t b0 = 0; b0 < n; b0 += blk) {
        if (tr.positions[b0] % blk != 0)
            throw std::logic_error("transect block at t=" + std::to_string(b0) + " does not start a kq-interval");
        int64_t first = -1, last = -1;
        for (int64_t u = 0; u < blk; ++u) {
            const int64_t c = tr.coarse[b0 + u];
            const int64_t lev = jt[c / k];
            tr.level[b0 + u] = lev;
            if (lev == q - 1) {
                if (first < 0) first = u;
                last = u;
            }
        }
        if (first < 0) throw std::logic_error("transect block never reaches the top level");
        const int64_t j = tr.coarse[b0 + first + (first + 1 < blk ? 1 : 0)] % k;
        for (int64_t u = 0; u < blk; ++u) {
            Segment sg = u <= first ? Segment::Begin : (u > last ? Segment::End : Segment::Middle);
            tr.segments[b0 + u] = sg;
            if (sg == Segment::Middle) {
                const int64_t prev = tr.level[b0 + u - 1];
                if (tr.coarse[b0 + u] % k != j || tr.level[b0 + u] != (prev + 1) % q)
                    throw std::logic_error("transect middle segment leaves its column at t=" + std::to_string(b0 + u));
            }
        }
    }
    return tr;
}

Word transect_name(const TransectTrace& tr, const std::vector<Word>& letters) {
    if (static_cast<int64_t>(letters.size()) != tr.k) throw std::invalid_argument("need one word per column");
    for (const auto& w : letters)
        if (static_cast<int64_t>(w.size()) != tr.q) throw std::invalid_argument("column word has wrong length");
    Word out(tr.positions.size());
    for (size_t t = 0; t < out.size(); ++t) {
        switch (tr.segments[t]) {
            case Segment::Begin: out[t] = kSymB; break;
            case Segment::End: out[t] = kSymE; break;
            default: out[t] = letters[tr.coarse[t] % tr.k][tr.level[t]];
        }
    }
    return out;
}

void write_trace_csv(std::ostream& os, const TransectTrace& tr) {
    os << "t,position,coarse_index,segment_tag\n";
    for (size_t t = 0; t < tr.positions.size(); ++t)
        os << t << "," << tr.positions[t] << "," << tr.coarse[t] << "," << to_string(tr.segments[t]) << "\n";
}

}  // namespace abc
