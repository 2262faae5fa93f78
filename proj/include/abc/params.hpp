#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <gmpxx.h>
#include <json.hpp>

namespace abc {

using BigInt = mpz_class;

// Reduced rational with positive denominator.
class BigRatio {
public:
    BigRatio() : v_(0) {}
    BigRatio(long n) : v_(n) {}
    BigRatio(const BigInt& num, const BigInt& den);
    explicit BigRatio(const mpq_class& v) : v_(v) { v_.canonicalize(); }

    BigInt num() const { return v_.get_num(); }
    BigInt den() const { return v_.get_den(); }
    const mpq_class& raw() const { return v_; }

    double to_double() const { return v_.get_d(); }
    std::string str() const;                 // "n/d" or "n"
    static BigRatio parse(const std::string& s);

    // representative in [0,1)
    BigRatio frac() const;
    BigInt floor() const;

    BigRatio operator+(const BigRatio& o) const { return BigRatio(mpq_class(v_ + o.v_)); }
    BigRatio operator-(const BigRatio& o) const { return BigRatio(mpq_class(v_ - o.v_)); }
    BigRatio operator*(const BigRatio& o) const { return BigRatio(mpq_class(v_ * o.v_)); }
    BigRatio operator/(const BigRatio& o) const;
    BigRatio operator-() const { return BigRatio(mpq_class(-v_)); }
    bool operator==(const BigRatio& o) const { return v_ == o.v_; }
    bool operator!=(const BigRatio& o) const { return v_ != o.v_; }
    bool operator<(const BigRatio& o) const { return v_ < o.v_; }
    bool operator<=(const BigRatio& o) const { return v_ <= o.v_; }
    bool operator>(const BigRatio& o) const { return v_ > o.v_; }
    bool operator>=(const BigRatio& o) const { return v_ >= o.v_; }

private:
    mpq_class v_;
};

std::string to_decimal(const BigInt& v);
BigInt parse_big(const std::string& s);
// throws std::overflow_error when v does not fit
int64_t to_i64(const BigInt& v);
bool fits_i64(const BigInt& v);

struct StageParams {
    int n = 0;
    int64_t k = 0;   // 0 until the transition out of this stage is fixed
    int64_t l = 0;
    int64_t s = 1;
    BigInt p = 1;
    BigInt q = 1;

    BigRatio alpha() const { return BigRatio(p, q); }
};

StageParams initial_stage(int64_t s0);

// Stage n+1 record from stage n and the transition parameters (k_n, l_n).
StageParams advance(const StageParams& prev, int64_t k, int64_t l, int64_t s_next);

// j_i = p^{-1} i mod q, verified by multiplication.
std::vector<int64_t> j_table(const BigInt& p, const BigInt& q);
std::vector<int64_t> j_table(int64_t p, int64_t q);

nlohmann::json to_json(const StageParams& sp);
StageParams stage_params_from_json(const nlohmann::json& j);

// Whole schedule: record n carries k_n, l_n once stage n+1 exists.
class ParamSchedule {
public:
    explicit ParamSchedule(int64_t s0) { stages_.push_back(initial_stage(s0)); }
    const StageParams& extend(int64_t k, int64_t l, int64_t s_next);
    const std::vector<StageParams>& stages() const { return stages_; }
    const StageParams& back() const { return stages_.back(); }
    size_t size() const { return stages_.size(); }

private:
    std::vector<StageParams> stages_;
};

}  // namespace abc
