#include "abc/symbolic.hpp"

#include <istream>
#include <numeric>
#include <ostream>
#include <sstream>
#include <stdexcept>

namespace abc {

Alphabet::Alphabet(std::vector<std::string> letters) : letters_(std::move(letters)) {
    if (letters_.size() >= kSymB) throw std::invalid_argument("alphabet too large");
    for (size_t i = 0; i < letters_.size(); ++i) {
        const auto& a = letters_[i];
        if (a.empty() || a == "b" || a == "e" || a == "*" || a == "∗")
            throw std::invalid_argument("letter '" + a + "' is reserved or empty");
        if (a.find_first_of(" \t\r\n") != std::string::npos)
            throw std::invalid_argument("letter contains whitespace");
        for (size_t j = 0; j < i; ++j)
            if (letters_[j] == a) throw std::invalid_argument("duplicate letter '" + a + "'");
    }
}

Alphabet Alphabet::of_size(size_t n) {
    std::vector<std::string> ls;
    for (size_t i = 0; i < n; ++i) ls.push_back(n <= 10 ? std::to_string(i) : "a" + std::to_string(i));
    return Alphabet(std::move(ls));
}

std::string Alphabet::name(Symbol s) const {
    if (s == kSymB) return "b";
    if (s == kSymE) return "e";
    if (s == kSymStar) return "*";
    if (s >= letters_.size()) throw std::out_of_range("symbol outside alphabet");
    return letters_[s];
}

Symbol Alphabet::parse(const std::string& tok) const {
    if (tok == "b") return kSymB;
    if (tok == "e") return kSymE;
    if (tok == "*" || tok == "∗") return kSymStar;
    for (size_t i = 0; i < letters_.size(); ++i)
        if (letters_[i] == tok) return static_cast<Symbol>(i);
    throw std::invalid_argument("unknown letter '" + tok + "'");
}

std::string Alphabet::render(const Word& w, const std::string& sep) const {
    std::string out;
    for (size_t i = 0; i < w.size(); ++i) {
        if (i && !sep.empty()) out += sep;
        out += name(w[i]);
    }
    return out;
}

Word Alphabet::word(const std::string& text) const {
    Word w;
    if (text.find_first_of(" \t") != std::string::npos) {
        std::istringstream is(text);
        std::string tok;
        while (is >> tok) w.push_back(parse(tok));
        return w;
    }
    for (size_t i = 0; i < text.size();) {
        // U+2217 is three bytes
        if (text.compare(i, 3, "∗") == 0) {
            w.push_back(kSymStar);
            i += 3;
            continue;
        }
        w.push_back(parse(text.substr(i, 1)));
        ++i;
    }
    return w;
}

Word circular_op(const std::vector<Word>& tuple, int64_t p, int64_t q, int64_t l) {
    if (tuple.empty()) throw std::invalid_argument("empty tuple");
    if (l < 2) throw std::invalid_argument("l must be >= 2");
    if (q < 1) throw std::invalid_argument("q must be >= 1");
    for (size_t j = 0; j < tuple.size(); ++j)
        if (static_cast<int64_t>(tuple[j].size()) != q)
            throw std::invalid_argument("word " + std::to_string(j) + " has length " +
                                        std::to_string(tuple[j].size()) + ", expected " + std::to_string(q));
    auto jt = j_table(p, q);
    const int64_t k = static_cast<int64_t>(tuple.size());
    Word out;
    out.reserve(static_cast<size_t>(k * l * q * q));
    for (int64_t i = 0; i < q; ++i) {
        for (int64_t j = 0; j < k; ++j) {
            out.insert(out.end(), static_cast<size_t>(q - jt[i]), kSymB);
            for (int64_t c = 0; c < l - 1; ++c) out.insert(out.end(), tuple[j].begin(), tuple[j].end());
            out.insert(out.end(), static_cast<size_t>(jt[i]), kSymE);
        }
    }
    return out;
}

bool readability_guaranteed(const BigInt& q, int64_t l, const std::vector<std::vector<int>>& P) {
    if (!(BigInt(2) * q < BigInt(static_cast<long>(l)))) return false;
    if (q >= 2) return true;
    std::vector<Word> tuples;
    for (const auto& t : P) tuples.emplace_back(t.begin(), t.end());
    return unique_readability_check(tuples).readable;
}

namespace {

std::vector<size_t> z_function(const std::vector<uint32_t>& s) {
    size_t n = s.size();
    std::vector<size_t> z(n, 0);
    if (n) z[0] = n;
    for (size_t i = 1, l = 0, r = 0; i < n; ++i) {
        if (i < r) z[i] = std::min(r - i, z[i - l]);
        while (i + z[i] < n && s[z[i]] == s[i + z[i]]) ++z[i];
        if (i + z[i] > r) l = i, r = i + z[i];
    }
    return z;
}

std::vector<uint32_t> joined(const Word& a, const Word& b) {
    std::vector<uint32_t> s(a.begin(), a.end());
    s.push_back(0x10000u);
    s.insert(s.end(), b.begin(), b.end());
    return s;
}

}  // namespace

ReadabilityResult unique_readability_check(const std::vector<Word>& family) {
    ReadabilityResult res;
    if (family.empty()) return res;
    const size_t L = family[0].size();
    for (const auto& w : family)
        if (w.size() != L) throw std::invalid_argument("family words differ in length");
    if (L < 2) return res;
    const size_t F = family.size();
    for (size_t wi = 0; wi < F; ++wi) {
        const Word& w = family[wi];
        // left[o] = some u with u[o..L) == w[0..L-o); right[o] = some v with v[0..o) == w[L-o..L)
        std::vector<long> left(L, -1), right(L, -1);
        for (size_t ui = 0; ui < F; ++ui) {
            auto z = z_function(joined(w, family[ui]));
            for (size_t o = 1; o < L; ++o)
                if (left[o] < 0 && z[L + 1 + o] >= L - o) left[o] = static_cast<long>(ui);
        }
        for (size_t vi = 0; vi < F; ++vi) {
            auto z = z_function(joined(family[vi], w));
            for (size_t o = 1; o < L; ++o)
                if (right[o] < 0 && z[L + 1 + (L - o)] >= o) right[o] = static_cast<long>(vi);
        }
        for (size_t o = 1; o < L; ++o) {
            if (left[o] >= 0 && right[o] >= 0) {
                res.readable = false;
                res.witness = ReadabilityWitness{static_cast<size_t>(left[o]), static_cast<size_t>(right[o]), wi, o};
                return res;
            }
        }
    }
    return res;
}

ConstructionSequence build_construction_sequence(const Alphabet& alphabet, const std::vector<int64_t>& k,
                                                 const std::vector<int64_t>& l,
                                                 const std::vector<std::vector<std::vector<int>>>& prescriptions,
                                                 int64_t cap) {
    if (k.size() != l.size() || k.size() != prescriptions.size())
        throw std::invalid_argument("k, l and prescription schedules differ in length");
    if (alphabet.size() == 0) throw std::invalid_argument("empty alphabet");
    ConstructionSequence seq;
    seq.alphabet = alphabet;
    ParamSchedule sched(static_cast<int64_t>(alphabet.size()));
    WordFamily w0;
    for (size_t i = 0; i < alphabet.size(); ++i) w0.words.push_back(Word{static_cast<Symbol>(i)});
    seq.stages.push_back(w0);
    for (size_t n = 0; n < k.size(); ++n) {
        const auto& P = prescriptions[n];
        const int64_t s_n = sched.back().s;
        if (P.empty()) throw std::invalid_argument("stage " + std::to_string(n + 1) + ": no prescriptions");
        if (k[n] % s_n != 0)
            throw std::invalid_argument("stage " + std::to_string(n + 1) + ": s_" + std::to_string(n) + " = " + std::to_string(s_n) +
                                        " does not divide k_" + std::to_string(n) + " = " + std::to_string(k[n]));
        for (const auto& tup : P) {
            if (static_cast<int64_t>(tup.size()) != k[n])
                throw std::invalid_argument("stage " + std::to_string(n + 1) + ": tuple length != k_" + std::to_string(n));
            for (int x : tup)
                if (x < 0 || x >= s_n)
                    throw std::invalid_argument("stage " + std::to_string(n + 1) + ": tuple entry out of range");
        }
        const StageParams prev = sched.back();
        sched.extend(k[n], l[n], static_cast<int64_t>(P.size()));
        const StageParams& cur = sched.back();
        WordFamily fam;
        fam.stage = cur.n;
        fam.q = cur.q;
        if (!seq.stages.back().words.empty() && cur.q <= cap) {
            const int64_t p = to_i64(prev.p % prev.q), q = to_i64(prev.q);
            for (const auto& tup : P) {
                std::vector<Word> ws;
                for (int x : tup) ws.push_back(seq.stages.back().words[x]);
                fam.words.push_back(circular_op(ws, p == 0 ? 1 : p, q, l[n]));
            }
        }
        seq.stages.push_back(std::move(fam));
    }
    seq.params = sched.stages();
    seq.prescriptions = prescriptions;
    return seq;
}

UniformityReport uniformity_check(const ConstructionSequence& seq, int n) {
    if (n < 0 || static_cast<size_t>(n) >= seq.prescriptions.size())
        throw std::invalid_argument("stage " + std::to_string(n) + " has no successor");
    const auto& P = seq.prescriptions[n];
    const StageParams& sp = seq.params[n];
    const StageParams& nx = seq.params[n + 1];
    const size_t s_n = static_cast<size_t>(sp.s);
    UniformityReport r;
    r.stage = n;
    r.counts.assign(P.size(), std::vector<int64_t>(s_n, 0));
    for (size_t a = 0; a < P.size(); ++a)
        for (int x : P[a]) r.counts[a][x]++;
    // interior occurrences: every slot contributes q_n blocks of l_n - 1 copies
    BigRatio scale(sp.q * sp.q * BigInt(static_cast<long>(sp.l - 1)), nx.q);
    r.d.assign(s_n, BigRatio(0));
    for (size_t w = 0; w < s_n; ++w) {
        BigRatio sum(0);
        for (size_t a = 0; a < P.size(); ++a) sum = sum + scale * BigRatio(r.counts[a][w]);
        r.d[w] = sum / BigRatio(static_cast<long>(P.size()));
    }
    r.max_deviation = BigRatio(0);
    for (size_t a = 0; a < P.size(); ++a)
        for (size_t w = 0; w < s_n; ++w) {
            BigRatio dev = scale * BigRatio(r.counts[a][w]) - r.d[w];
            if (dev < BigRatio(0)) dev = -dev;
            if (dev > r.max_deviation) r.max_deviation = dev;
        }
    r.strongly_uniform = (sp.k % sp.s == 0);
    r.f = r.strongly_uniform ? sp.k / sp.s : 0;
    for (auto& row : r.counts)
        for (auto c : row)
            if (c != r.f) r.strongly_uniform = false;
    if (!r.strongly_uniform) r.f = 0;
    return r;
}

nlohmann::json to_json(const UniformityReport& r) {
    nlohmann::json j;
    j["stage"] = r.stage;
    j["counts"] = r.counts;
    std::vector<std::string> d;
    for (const auto& x : r.d) d.push_back(x.str());
    j["d"] = d;
    j["max_deviation"] = r.max_deviation.str();
    j["strongly_uniform"] = r.strongly_uniform;
    j["f"] = r.f;
    return j;
}

const char* to_string(Membership m) {
    switch (m) {
        case Membership::Yes: return "yes";
        case Membership::No: return "no";
        default: return "indeterminate";
    }
}

bool contains(const Word& host, const Word& w) {
    if (w.empty()) return true;
    if (w.size() > host.size()) return false;
    std::vector<uint32_t> s(w.begin(), w.end());
    s.push_back(0x10000u);
    s.insert(s.end(), host.begin(), host.end());
    auto z = z_function(s);
    for (size_t i = w.size() + 1; i < s.size(); ++i)
        if (z[i] >= w.size()) return true;
    return false;
}

size_t count_occurrences(const Word& w, const Word& host) {
    if (w.empty() || w.size() > host.size()) return 0;
    std::vector<uint32_t> s(w.begin(), w.end());
    s.push_back(0x10000u);
    s.insert(s.end(), host.begin(), host.end());
    auto z = z_function(s);
    size_t c = 0;
    for (size_t i = w.size() + 1; i < s.size(); ++i)
        if (z[i] >= w.size()) ++c;
    return c;
}

Membership subshift_member(const Word& window, const ConstructionSequence& seq) {
    size_t top = 0;
    for (size_t n = 0; n < seq.stages.size(); ++n)
        if (seq.materialized(n)) top = n;
    for (size_t n = 0; n <= top; ++n)
        for (const auto& w : seq.stages[n].words)
            if (contains(w, window)) return Membership::Yes;
    const BigInt len(static_cast<long>(window.size()));
    size_t nstar = 0;
    for (size_t n = 1; n < seq.params.size(); ++n)
        if (seq.params[n].q >= len + seq.params[n - 1].q) {
            nstar = n;
            break;
        }
    if (nstar == 0 || top < nstar + 1) return Membership::Indeterminate;
    return Membership::No;
}

BigRatio empirical_cylinder_frequency(const Word& w, const Word& host) {
    if (host.empty()) throw std::invalid_argument("empty host");
    if (w.size() > host.size()) throw std::invalid_argument("cylinder longer than host");
    return BigRatio(BigInt(static_cast<unsigned long>(count_occurrences(w, host))),
                    BigInt(static_cast<unsigned long>(host.size())));
}

Word canonical_factor(const Word& x) {
    Word out(x.size());
    for (size_t i = 0; i < x.size(); ++i) out[i] = (x[i] == kSymB || x[i] == kSymE) ? x[i] : kSymStar;
    return out;
}

void write_word_family(std::ostream& os, const WordFamily& fam, const Alphabet& alphabet) {
    os << "# stage " << fam.stage << " q=" << to_decimal(fam.q) << "\n";
    for (const auto& w : fam.words) os << alphabet.render(w, " ") << "\n";
}

WordFamily read_word_family(std::istream& is, Alphabet& alphabet, bool extend) {
    std::string line;
    size_t lineno = 0;
    WordFamily fam;
    bool header = false;
    auto fail = [&](const std::string& msg) {
        throw std::runtime_error("line " + std::to_string(lineno) + ": " + msg);
    };
    while (std::getline(is, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (!header) {
            std::istringstream hs(line);
            std::string hash, kw, qtok;
            if (!(hs >> hash >> kw >> fam.stage >> qtok) || hash != "#" || kw != "stage" || qtok.rfind("q=", 0) != 0)
                fail("expected header '# stage n q=<q>'");
            try {
                fam.q = parse_big(qtok.substr(2));
            } catch (const std::exception&) {
                fail("bad q in header");
            }
            header = true;
            continue;
        }
        if (line.find_first_not_of(" \t") == std::string::npos) continue;
        std::istringstream ls(line);
        std::string tok;
        Word w;
        while (ls >> tok) {
            try {
                w.push_back(alphabet.parse(tok));
            } catch (const std::invalid_argument&) {
                if (!extend) fail("unknown letter '" + tok + "'");
                auto letters = alphabet.letters();
                letters.push_back(tok);
                try {
                    alphabet = Alphabet(letters);
                } catch (const std::invalid_argument& e) {
                    fail(e.what());
                }
                w.push_back(alphabet.parse(tok));
            }
        }
        if (BigInt(static_cast<unsigned long>(w.size())) != fam.q)
            fail("word has length " + std::to_string(w.size()) + ", header says q=" + to_decimal(fam.q));
        fam.words.push_back(std::move(w));
    }
    if (!header) {
        lineno = std::max<size_t>(lineno, 1);
        fail("empty file (missing header)");
    }
    if (fam.words.empty()) fail("no words");
    return fam;
}

}  // namespace abc
