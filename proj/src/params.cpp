#include "abc/params.hpp"

#include <stdexcept>

namespace abc {

BigRatio::BigRatio(const BigInt& num, const BigInt& den) {
    if (den == 0) throw std::invalid_argument("zero denominator");
    v_ = mpq_class(num, den);
    v_.canonicalize();
}

BigRatio BigRatio::operator/(const BigRatio& o) const {
    if (o.v_ == 0) throw std::domain_error("division by zero");
    return BigRatio(mpq_class(v_ / o.v_));
}

std::string BigRatio::str() const {
    if (v_.get_den() == 1) return v_.get_num().get_str();
    return v_.get_num().get_str() + "/" + v_.get_den().get_str();
}

BigRatio BigRatio::parse(const std::string& s) {
    auto slash = s.find('/');
    try {
        if (slash == std::string::npos) return BigRatio(parse_big(s), 1);
        return BigRatio(parse_big(s.substr(0, slash)), parse_big(s.substr(slash + 1)));
    } catch (const std::invalid_argument&) {
        throw std::invalid_argument("bad rational: '" + s + "'");
    }
}

BigInt BigRatio::floor() const {
    BigInt f;
    mpz_fdiv_q(f.get_mpz_t(), v_.get_num_mpz_t(), v_.get_den_mpz_t());
    return f;
}

BigRatio BigRatio::frac() const { return *this - BigRatio(floor(), 1); }

std::string to_decimal(const BigInt& v) { return v.get_str(); }

BigInt parse_big(const std::string& s) {
    BigInt v;
    if (s.empty() || v.set_str(s, 10) != 0) throw std::invalid_argument("bad integer: '" + s + "'");
    return v;
}

bool fits_i64(const BigInt& v) {
    static const BigInt lo("-9223372036854775808"), hi("9223372036854775807");
    return v >= lo && v <= hi;
}

int64_t to_i64(const BigInt& v) {
    if (!fits_i64(v)) throw std::overflow_error("integer does not fit in 64 bits: " + v.get_str());
    return std::stoll(v.get_str());
}

StageParams initial_stage(int64_t s0) {
    if (s0 < 1) throw std::invalid_argument("s_0 must be >= 1");
    StageParams sp;
    sp.s = s0;
    return sp;
}

StageParams advance(const StageParams& prev, int64_t k, int64_t l, int64_t s_next) {
    if (k < 2 || l < 2) throw std::invalid_argument("k and l must be >= 2");
    if (s_next < 1 || s_next % prev.s != 0)
        throw std::invalid_argument("s_next=" + std::to_string(s_next) + " is not a multiple of s=" +
                                    std::to_string(prev.s));
    StageParams nx;
    nx.n = prev.n + 1;
    nx.s = s_next;
    BigInt kl = BigInt(static_cast<long>(k)) * BigInt(static_cast<long>(l));
    nx.p = prev.p * prev.q * kl + 1;
    nx.q = kl * prev.q * prev.q;
    BigInt g;
    mpz_gcd(g.get_mpz_t(), nx.p.get_mpz_t(), nx.q.get_mpz_t());
    if (g != 1) throw std::logic_error("gcd(p,q) != 1 after advance (p=" + nx.p.get_str() + ")");
    return nx;
}

std::vector<int64_t> j_table(const BigInt& p, const BigInt& q) {
    if (q < 1) throw std::invalid_argument("q must be >= 1");
    BigInt g;
    mpz_gcd(g.get_mpz_t(), p.get_mpz_t(), q.get_mpz_t());
    if (g != 1) throw std::invalid_argument("p and q are not coprime");
    int64_t qq = to_i64(q);
    std::vector<int64_t> out(static_cast<size_t>(qq), 0);
    if (qq == 1) return out;
    BigInt inv;
    mpz_invert(inv.get_mpz_t(), p.get_mpz_t(), q.get_mpz_t());
    BigInt pm = p % q;
    if (pm < 0) pm += q;
    int64_t iv = to_i64(inv), pp = to_i64(pm);
    for (int64_t i = 0; i < qq; ++i) {
        __int128 j = static_cast<__int128>(iv) * i % qq;
        out[i] = static_cast<int64_t>(j);
        if (static_cast<__int128>(pp) * out[i] % qq != i)
            throw std::logic_error("j_table verification failed at i=" + std::to_string(i));
    }
    return out;
}

std::vector<int64_t> j_table(int64_t p, int64_t q) {
    return j_table(BigInt(static_cast<long>(p)), BigInt(static_cast<long>(q)));
}

nlohmann::json to_json(const StageParams& sp) {
    return {{"n", sp.n}, {"k", sp.k}, {"l", sp.l}, {"s", sp.s}, {"p", to_decimal(sp.p)}, {"q", to_decimal(sp.q)}};
}

StageParams stage_params_from_json(const nlohmann::json& j) {
    StageParams sp;
    sp.n = j.at("n").get<int>();
    sp.k = j.at("k").get<int64_t>();
    sp.l = j.at("l").get<int64_t>();
    sp.s = j.at("s").get<int64_t>();
    sp.p = parse_big(j.at("p").get<std::string>());
    sp.q = parse_big(j.at("q").get<std::string>());
    return sp;
}

const StageParams& ParamSchedule::extend(int64_t k, int64_t l, int64_t s_next) {
    StageParams nx = advance(stages_.back(), k, l, s_next);
    stages_.back().k = k;
    stages_.back().l = l;
    stages_.push_back(nx);
    return stages_.back();
}

}  // namespace abc
