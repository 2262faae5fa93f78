#pragma once

#include <array>
#include <complex>
#include <cstdint>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "abc/abc.hpp"
#include "abc/blockslide.hpp"
#include "abc/params.hpp"

namespace abc {

using cplx = std::complex<double>;
using Vec2 = std::array<double, 2>;
using CVec2 = std::array<cplx, 2>;

// a_0 + sum_{j=1..m} a_j cos(2 pi j N x) + b_j sin(2 pi j N x).
// When built by Gaussian smoothing of a step function, the smoothed step is kept as well: on the
// real line it agrees with the truncated series within tail_bound and is evaluated in closed form.
struct TrigPolynomial {
    int64_t N = 1;
    std::vector<double> a{0.0};
    std::vector<double> b{0.0};

    double sigma_u = 0.0;          // Gaussian width in phase units u = N x; 0 when not smoothed
    std::vector<double> cells;     // step values on [i/K, (i+1)/K) in phase units
    double tail_bound = 0.0;
    double eps = 0.0, delta = 0.0;  // targets it was built for

    size_t m() const { return a.size() - 1; }
    double series(double x) const;      // truncated series (Clenshaw)
    double value(double x) const;       // closed form when available and m is large, else series
    double derivative(double x) const;
    cplx eval(cplx z) const;            // analytic continuation; std::range_error on overflow
    cplx eval_derivative(cplx z) const;
    double strip_sup_bound(double rho) const;   // sum |c_j| cosh(2 pi j N rho)
};

TrigPolynomial constant_polynomial(double c);
// Gaussian smoothing of width sigma_u (phase units) then truncation with tail below tol.
TrigPolynomial smooth_step(const StepFunction& sf, int64_t N, double sigma_u, double tol = 1e-15);
// Lemma approx: sup error < eps outside F, F = intervals of length delta/(KN) at the grid points.
TrigPolynomial approximate_step(const StepFunction& sf, int64_t N, double eps, double delta);
double sampled_error_outside_F(const TrigPolynomial& tp, const StepFunction& sf, int64_t N, double delta, int samples);

cplx complex_eval(const TrigPolynomial& tp, cplx z);

struct AnalyticStep {
    enum Kind : uint8_t { H, V, Rot } kind = Rot;
    std::shared_ptr<const TrigPolynomial> f;
    double sign = 1.0;
    BigRatio alpha;   // Rot only; x1 -> x1 + alpha
    double ahi = 0.0, alo = 0.0;   // frac(alpha) as an unevaluated double pair

    void set_alpha(const BigRatio& a);
};

struct AnalyticMap {
    std::vector<AnalyticStep> steps;   // applied left to right

    static AnalyticMap rotation(const BigRatio& alpha);
    AnalyticMap inverse() const;
    AnalyticMap then(const AnalyticMap& next) const;
    size_t shear_count() const;

    Vec2 apply(Vec2 x) const;                      // lift, not reduced mod 1
    std::array<double, 4> jacobian(Vec2 x) const;  // row-major d(out)/d(in)
    CVec2 apply(CVec2 z) const;
    // image of z and of the tangent vector dz at z
    std::pair<CVec2, CVec2> apply_tangent(CVec2 z, CVec2 dz) const;
};

struct ApproxOptions {
    double eps = 0.05;
    double sigma_floor_x = 0.0;   // minimum Gaussian width in x units (strip budget)
    size_t samples = 100000;
    uint64_t seed = 1;
};

struct ApproxResult {
    AnalyticMap map;
    double exceptional_mass = 0.0;   // sum of per-slide delta
    size_t slides = 0;
    double good_fraction = 1.0;      // sampled cell-membership agreement (permutations only)
    size_t samples = 0;
};

ApproxResult approx_blockslide(const BlockSlideMap& map, int64_t q, double eps, double delta,
                               double sigma_floor_x = 0.0);
ApproxResult approx_permutation(const GridPermutation& perm, const ApproxOptions& opt);
// fraction of sampled points x with h(x) in Pi(cell(x))
double good_set_fraction(const AnalyticMap& h, const GridPermutation& perm, size_t samples, uint64_t seed);

double torus_distance(double a, double b);
// sup over samples of max component torus distance between h(R x) and R h(x), R = x1 + 1/q
double commutation_residual(const AnalyticMap& h, int64_t q, size_t samples, uint64_t seed);
double max_jacobian_defect(const AnalyticMap& h, size_t samples, uint64_t seed);

struct StripNormEstimate {
    double rho = 0.0;
    int grid_density = 0;
    double value = 0.0;          // +inf when evaluation overflowed
    CVec2 attained_at{};
    bool overflow = false;
};
StripNormEstimate strip_distance_oneway(const AnalyticMap& f, const AnalyticMap& g, double rho, int grid);
StripNormEstimate strip_distance(const AnalyticMap& f, const AnalyticMap& g, double rho, int grid);

// H^(a)_n and T^(a)_n from per-stage approximants h^(a)_1..h^(a)_n (h_0 = identity).
AnalyticMap conjugator(const std::vector<AnalyticMap>& h);
AnalyticMap conjugated_rotation(const AnalyticMap& H, const BigRatio& alpha);

struct StageBuild {
    AnalyticMap H, T;
    double gap = 0.0;   // d_rho(T_{n+1}, T_n)
    bool gap_overflow = false;
};
StageBuild build_stage(const std::vector<AnalyticMap>& h_prev, const AnalyticMap& h_next, const StageParams& prev_params,
                       const StageParams& next_params, double rho, int grid);

// d_rho(H R^a H^-1, H h R^{a+d} h^-1 H^-1) for h commuting with R^a; first order in d when d is tiny.
StripNormEstimate rotation_change_gap(const AnalyticMap& H, const AnalyticMap& h, const BigRatio& alpha, double dalpha,
                                      double rho, int grid);

struct LStarResult {
    int64_t l = 2;
    double gap = 0.0;
    bool found = false;
    std::vector<std::pair<int64_t, double>> scanned;
};
// eps_n/2 threshold on max over candidates of d_rho(T_n, T_{n+1}(l)).
LStarResult find_l_star(const AnalyticMap& H_n, const std::vector<AnalyticMap>& candidates, const StageParams& stage_n,
                        double rho, double eps_n, int64_t l_budget, int grid);
double l_gap(const AnalyticMap& H_n, const std::vector<AnalyticMap>& candidates, const StageParams& stage_n, int64_t l,
             double rho, int grid);

double eps_schedule(double eps0, int n);

nlohmann::json to_json(const TrigPolynomial& tp);
TrigPolynomial trig_polynomial_from_json(const nlohmann::json& j);
nlohmann::json to_json(const AnalyticMap& m);
AnalyticMap analytic_map_from_json(const nlohmann::json& j);
std::string hex_double(double v);
double parse_hex_double(const std::string& s);

}  // namespace abc
