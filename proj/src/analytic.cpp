#include "abc/analytic.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <limits>
#include <numeric>
#include <random>
#include <stdexcept>
#include <string>

#include "abc/parallel.hpp"

namespace abc {

namespace {

using ld = long double;
constexpr ld kPiL = 3.141592653589793238462643383279502884L;
constexpr double kPi = 3.14159265358979323846;
constexpr int kRefresh = 64;   // recurrences are reseeded this often

ld fracl(ld x) { return x - std::floor(x); }

// Values of one 1/N period in phase units, K cells.
struct PhaseCells {
    std::vector<double> v;
};

PhaseCells phase_cells(const StepFunction& sf, int64_t N) {
    if (N < 1) throw std::invalid_argument("period divisor must be >= 1");
    if (sf.N % N != 0) throw std::invalid_argument("step function is not 1/N-periodic for N=" + std::to_string(N));
    const int64_t rep = sf.N / N;
    PhaseCells pc;
    pc.v.reserve(static_cast<size_t>(sf.K * rep));
    for (int64_t r = 0; r < rep; ++r)
        for (const auto& x : sf.values) pc.v.push_back(x.to_double());
    return pc;
}

// |J| sum over one period of the cyclic step
double jump_mass(const std::vector<double>& c) {
    double A = 0;
    for (size_t i = 0; i < c.size(); ++i) A += std::fabs(c[i] - c[(i + c.size() - 1) % c.size()]);
    return A;
}

// Smoothed-minus-raw step contribution of a unit jump at distance d (phase units).
ld jump_kernel(ld d, ld sigma) {
    const ld t = d / (sigma * std::sqrt(2.0L));
    return d >= 0 ? -0.5L * std::erfc(t) : 0.5L * std::erfc(-t);
}

struct TailPlan {
    size_t m = 0;
    double bound = 0;
};

TailPlan plan_truncation(double A, double sigma_u, double tol, size_t cap) {
    TailPlan tp;
    if (A == 0) return tp;
    if (!(sigma_u > 0)) throw std::runtime_error("failure to converge: zero smoothing width");
    const double c = 2 * kPi * kPi * sigma_u * sigma_u;
    for (size_t m = 0;; ++m) {
        const double j = static_cast<double>(m + 1);
        const double r = std::exp(-4 * kPi * kPi * sigma_u * sigma_u * j);
        const double tail = A / (kPi * j) * std::exp(-c * j * j) / std::max(1 - r, 1e-300);
        if (tail <= tol) {
            tp.m = m;
            tp.bound = tail;
            return tp;
        }
        if (m >= cap)
            throw std::runtime_error("failure to converge within " + std::to_string(cap) +
                                     " coefficients; achieved tail " + std::to_string(tail));
    }
}

}  // namespace

std::string hex_double(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%a", v);
    return buf;
}

double parse_hex_double(const std::string& s) {
    char* end = nullptr;
    const double v = std::strtod(s.c_str(), &end);
    if (end == s.c_str() || *end != '\0') throw std::invalid_argument("bad float literal: " + s);
    return v;
}

double TrigPolynomial::series(double x) const {
    const ld u = fracl(static_cast<ld>(N) * x);
    const ld th = 2 * kPiL * u;
    ld acc = a[0];
    const ld c1 = std::cos(th), s1 = std::sin(th);
    ld c = 1, s = 0;
    for (size_t j = 1; j < a.size(); ++j) {
        if (j % kRefresh == 0) {
            c = std::cos(th * j);
            s = std::sin(th * j);
        } else {
            const ld nc = c * c1 - s * s1;
            s = s * c1 + c * s1;
            c = nc;
        }
        acc += a[j] * c + b[j] * s;
    }
    return static_cast<double>(acc);
}

namespace {

// Closed form of the smoothed step in phase units, with its derivative.
std::pair<ld, ld> smoothed(const TrigPolynomial& tp, ld u) {
    const size_t K = tp.cells.size();
    const ld sg = tp.sigma_u;
    size_t ci = static_cast<size_t>(u * K);
    if (ci >= K) ci = K - 1;
    ld val = tp.cells[ci], der = 0;
    const ld reach = 40 * sg;
    const int64_t L = static_cast<int64_t>(std::ceil(reach)) + 1;
    const ld norm = 1.0L / (sg * std::sqrt(2 * kPiL));
    for (size_t i = 0; i < K; ++i) {
        const ld J = tp.cells[i] - tp.cells[(i + K - 1) % K];
        if (J == 0) continue;
        const ld bi = static_cast<ld>(i) / K;
        for (int64_t n = -L; n <= L; ++n) {
            const ld d = u - bi - n;
            if (std::fabs(d) > reach) continue;
            val += J * jump_kernel(d, sg);
            der += J * norm * std::exp(-d * d / (2 * sg * sg));
        }
    }
    return {val, der};
}

bool use_closed_form(const TrigPolynomial& tp) { return tp.sigma_u > 0 && !tp.cells.empty() && tp.m() > 32; }

ld value_l(const TrigPolynomial& tp, ld x) {
    if (use_closed_form(tp)) return smoothed(tp, fracl(static_cast<ld>(tp.N) * x)).first;
    return tp.series(static_cast<double>(x));
}

ld derivative_l(const TrigPolynomial& tp, ld x) {
    const ld u = fracl(static_cast<ld>(tp.N) * x);
    if (use_closed_form(tp)) return tp.N * smoothed(tp, u).second;
    const ld th = 2 * kPiL * u;
    ld acc = 0;
    for (size_t j = 1; j < tp.a.size(); ++j)
        acc += 2 * kPiL * j * (-tp.a[j] * std::sin(th * j) + tp.b[j] * std::cos(th * j));
    return tp.N * acc;
}

}  // namespace

double TrigPolynomial::value(double x) const { return static_cast<double>(value_l(*this, x)); }
double TrigPolynomial::derivative(double x) const { return static_cast<double>(derivative_l(*this, x)); }

namespace {

// sum a_j cos(j phi) + b_j sin(j phi), and optionally its phi-derivative, phi = theta + i eta
std::pair<cplx, cplx> eval_phase(const TrigPolynomial& tp, cplx z, bool want_der) {
    const double re = static_cast<double>(fracl(static_cast<ld>(tp.N) * static_cast<ld>(z.real())));
    const double th = 2 * kPi * re, eta = 2 * kPi * tp.N * z.imag();
    cplx val = tp.a[0], der = 0;
    const double c1 = std::cos(th), s1 = std::sin(th);
    const double e1 = std::exp(eta);
    double c = 1, s = 0, ep = 1;
    for (size_t j = 1; j < tp.a.size(); ++j) {
        if (j % kRefresh == 0) {
            c = std::cos(th * j);
            s = std::sin(th * j);
            ep = std::exp(eta * j);
        } else {
            const double nc = c * c1 - s * s1;
            s = s * c1 + c * s1;
            c = nc;
            ep *= e1;
        }
        const double ch = 0.5 * (ep + 1 / ep), sh = 0.5 * (ep - 1 / ep);
        const cplx cosj(c * ch, -s * sh), sinj(s * ch, c * sh);
        val += tp.a[j] * cosj + tp.b[j] * sinj;
        if (want_der) der += static_cast<double>(j) * (-tp.a[j] * sinj + tp.b[j] * cosj);
    }
    if (!std::isfinite(val.real()) || !std::isfinite(val.imag()) || !std::isfinite(der.real()) ||
        !std::isfinite(der.imag()))
        throw std::range_error("trig polynomial overflow at Im z = " + std::to_string(z.imag()));
    return {val, der};
}

}  // namespace

cplx TrigPolynomial::eval(cplx z) const { return eval_phase(*this, z, false).first; }

cplx TrigPolynomial::eval_derivative(cplx z) const { return 2 * kPi * static_cast<double>(N) * eval_phase(*this, z, true).second; }

cplx complex_eval(const TrigPolynomial& tp, cplx z) { return tp.eval(z); }

double TrigPolynomial::strip_sup_bound(double rho) const {
    double s = std::fabs(a[0]);
    for (size_t j = 1; j < a.size(); ++j) s += std::hypot(a[j], b[j]) * std::cosh(2 * kPi * j * N * rho);
    return s;
}

TrigPolynomial constant_polynomial(double c) {
    TrigPolynomial tp;
    tp.a = {c};
    tp.b = {0.0};
    return tp;
}

TrigPolynomial smooth_step(const StepFunction& sf, int64_t N, double sigma_u, double tol) {
    const PhaseCells pc = phase_cells(sf, N);
    const std::vector<double>& v = pc.v;
    const size_t K = v.size();
    double mean = 0;
    for (double x : v) mean += x;
    mean /= static_cast<double>(K);
    const double A = jump_mass(v);
    TrigPolynomial tp = constant_polynomial(mean);
    tp.N = N;
    if (A == 0) return tp;
    const TailPlan plan = plan_truncation(A, sigma_u, tol, size_t(1) << 22);
    tp.sigma_u = sigma_u;
    tp.cells = v;
    tp.tail_bound = plan.bound;
    tp.a.assign(plan.m + 1, 0.0);
    tp.b.assign(plan.m + 1, 0.0);
    tp.a[0] = mean;
    std::vector<double> J(K), cs(K), sn(K);
    for (size_t i = 0; i < K; ++i) {
        J[i] = v[i] - v[(i + K - 1) % K];
        cs[i] = static_cast<double>(std::cos(2 * kPiL * i / K));
        sn[i] = static_cast<double>(std::sin(2 * kPiL * i / K));
    }
    for (size_t j = 1; j <= plan.m; ++j) {
        const double g = std::exp(-2 * kPi * kPi * static_cast<double>(j * j) * sigma_u * sigma_u) / (kPi * j);
        double aj = 0, bj = 0;
        for (size_t i = 0; i < K; ++i) {
            if (J[i] == 0) continue;
            const size_t r = (j % K) * i % K;   // j * i mod K
            aj -= J[i] * sn[r];
            bj += J[i] * cs[r];
        }
        tp.a[j] = aj * g;
        tp.b[j] = bj * g;
    }
    return tp;
}

double sampled_error_outside_F(const TrigPolynomial& tp, const StepFunction& sf, int64_t N, double delta, int samples) {
    const PhaseCells pc = phase_cells(sf, N);
    const size_t K = pc.v.size();
    const double half = delta / (2.0 * K * N);   // F intervals have length delta/(KN)
    const bool direct = static_cast<double>(tp.m()) * samples <= 2e8;
    std::vector<double> err(static_cast<size_t>(samples), 0.0);
    parallel_for(err.size(), [&](size_t i) {
        const double x = (static_cast<double>(i) + 0.5) / samples;
        const double g = x * K * N;
        const double near = std::fabs(g - std::round(g)) / (static_cast<double>(K) * N);
        if (near < half) return;
        const size_t cell = static_cast<size_t>(std::floor(g)) % K;
        const double y = direct ? tp.series(x) : tp.value(x);
        err[i] = std::fabs(y - pc.v[cell]);
    });
    return *std::max_element(err.begin(), err.end());
}

namespace {

// sigma with A * erfc(w / (sigma sqrt 2)) / 2 <= target
double sigma_for(double A, double w, double target) {
    double lo = 0, hi = 40;   // x = w / sigma
    if (0.5 * A * std::erfc(hi / std::sqrt(2.0)) > target) return w / hi;
    for (int it = 0; it < 200; ++it) {
        const double mid = 0.5 * (lo + hi);
        if (0.5 * A * std::erfc(mid / std::sqrt(2.0)) <= target)
            hi = mid;
        else
            lo = mid;
    }
    return w / hi;
}

TrigPolynomial approximate_step_impl(const StepFunction& sf, int64_t N, double eps, double delta, double sigma_floor_u) {
    if (!(eps > 0) || !(delta > 0)) throw std::invalid_argument("eps and delta must be positive");
    const PhaseCells pc = phase_cells(sf, N);
    const size_t K = pc.v.size();
    const double A = jump_mass(pc.v);
    if (A == 0) {
        double mean = 0;
        for (double x : pc.v) mean += x;
        TrigPolynomial tp = constant_polynomial(mean / K);
        tp.N = N;
        tp.eps = eps;
        tp.delta = delta;
        return tp;
    }
    const double w = std::min(delta, 1.0) / (2.0 * K);
    double sigma = sigma_for(A, w, eps / 4);
    double achieved = 0;
    for (int attempt = 0; attempt < 40; ++attempt) {
        const bool floored = sigma < sigma_floor_u;
        TrigPolynomial tp = smooth_step(sf, N, std::max(sigma, sigma_floor_u), std::min(1e-15, eps * 1e-6));
        achieved = sampled_error_outside_F(tp, sf, N, delta, 10000);
        tp.delta = delta;
        if (achieved < eps || floored) {
            tp.eps = achieved < eps ? eps : achieved;
            return tp;
        }
        sigma *= 0.7;
    }
    throw std::runtime_error("failure to converge: achieved sampled error " + std::to_string(achieved) + " >= eps " +
                             std::to_string(eps));
}

}  // namespace

TrigPolynomial approximate_step(const StepFunction& sf, int64_t N, double eps, double delta) {
    return approximate_step_impl(sf, N, eps, delta, 0.0);
}

void AnalyticStep::set_alpha(const BigRatio& a) {
    alpha = a;
    const BigRatio fr = a.frac();
    ahi = fr.to_double();
    alo = mpq_class(fr.raw() - mpq_class(ahi)).get_d();
}

AnalyticMap AnalyticMap::rotation(const BigRatio& alpha) {
    AnalyticMap m;
    AnalyticStep st;
    st.kind = AnalyticStep::Rot;
    st.set_alpha(alpha);
    m.steps.push_back(st);
    return m;
}

AnalyticMap AnalyticMap::inverse() const {
    AnalyticMap m;
    for (auto it = steps.rbegin(); it != steps.rend(); ++it) {
        AnalyticStep st = *it;
        if (st.kind == AnalyticStep::Rot)
            st.set_alpha(-st.alpha);
        else
            st.sign = -st.sign;
        m.steps.push_back(std::move(st));
    }
    return m;
}

AnalyticMap AnalyticMap::then(const AnalyticMap& next) const {
    AnalyticMap m = *this;
    m.steps.insert(m.steps.end(), next.steps.begin(), next.steps.end());
    return m;
}

size_t AnalyticMap::shear_count() const {
    size_t n = 0;
    for (const auto& s : steps) n += s.kind != AnalyticStep::Rot;
    return n;
}

namespace {

std::pair<ld, ld> apply_ld(const AnalyticMap& m, ld x1, ld x2) {
    for (const auto& s : m.steps) {
        switch (s.kind) {
        case AnalyticStep::H: x1 += s.sign * value_l(*s.f, x2); break;
        case AnalyticStep::V: x2 += s.sign * value_l(*s.f, x1); break;
        case AnalyticStep::Rot: x1 += static_cast<ld>(s.ahi) + static_cast<ld>(s.alo); break;
        }
    }
    return {x1, x2};
}

}  // namespace

Vec2 AnalyticMap::apply(Vec2 x) const {
    const auto r = apply_ld(*this, x[0], x[1]);
    return {static_cast<double>(r.first), static_cast<double>(r.second)};
}

std::array<double, 4> AnalyticMap::jacobian(Vec2 x) const {
    ld x1 = x[0], x2 = x[1];
    ld m00 = 1, m01 = 0, m10 = 0, m11 = 1;
    for (const auto& s : steps) {
        if (s.kind == AnalyticStep::H) {
            const ld d = s.sign * derivative_l(*s.f, x2);
            x1 += s.sign * value_l(*s.f, x2);
            m00 += d * m10;
            m01 += d * m11;
        } else if (s.kind == AnalyticStep::V) {
            const ld d = s.sign * derivative_l(*s.f, x1);
            x2 += s.sign * value_l(*s.f, x1);
            m10 += d * m00;
            m11 += d * m01;
        } else {
            x1 += static_cast<ld>(s.ahi) + static_cast<ld>(s.alo);
        }
    }
    return {static_cast<double>(m00), static_cast<double>(m01), static_cast<double>(m10), static_cast<double>(m11)};
}

CVec2 AnalyticMap::apply(CVec2 z) const {
    for (const auto& s : steps) {
        switch (s.kind) {
        case AnalyticStep::H: z[0] += s.sign * s.f->eval(z[1]); break;
        case AnalyticStep::V: z[1] += s.sign * s.f->eval(z[0]); break;
        case AnalyticStep::Rot: z[0] += s.ahi; break;
        }
    }
    return z;
}

std::pair<CVec2, CVec2> AnalyticMap::apply_tangent(CVec2 z, CVec2 dz) const {
    for (const auto& s : steps) {
        switch (s.kind) {
        case AnalyticStep::H:
            dz[0] += s.sign * s.f->eval_derivative(z[1]) * dz[1];
            z[0] += s.sign * s.f->eval(z[1]);
            break;
        case AnalyticStep::V:
            dz[1] += s.sign * s.f->eval_derivative(z[0]) * dz[0];
            z[1] += s.sign * s.f->eval(z[0]);
            break;
        case AnalyticStep::Rot: z[0] += s.ahi; break;
        }
        if (!std::isfinite(std::abs(dz[0])) || !std::isfinite(std::abs(dz[1])))
            throw std::range_error("tangent overflow");
    }
    return {z, dz};
}

namespace {

// Same function described with a period divisor that is a multiple of q, when it has that period.
StepFunction with_period_multiple(const StepFunction& f, int64_t q) {
    if (f.N % q == 0) return f;
    const int64_t Np = std::lcm(f.N, q);
    const int64_t M = std::lcm(f.K * f.N, Np);
    const int64_t Kp = M / Np;
    auto orig = [&](int64_t i) { return f.values[static_cast<size_t>((i / (M / (f.K * f.N))) % f.K)]; };
    std::vector<BigRatio> v;
    for (int64_t i = 0; i < Kp; ++i) v.push_back(orig(i));
    for (int64_t i = 0; i < M; ++i)
        if (orig(i) != v[static_cast<size_t>(i % Kp)])
            throw std::invalid_argument("vertical slide with period divisor " + std::to_string(f.N) +
                                        " does not commute with the 1/" + std::to_string(q) + " rotation");
    return StepFunction::cells(Np, Kp, std::move(v));
}

}  // namespace

ApproxResult approx_blockslide(const BlockSlideMap& map, int64_t q, double eps, double delta, double sigma_floor_x) {
    if (q < 1) throw std::invalid_argument("q must be >= 1");
    std::vector<const Slide*> live;
    for (const auto& s : map.steps)
        if (!s.f.is_zero()) live.push_back(&s);
    ApproxResult res;
    res.slides = live.size();
    if (live.empty()) return res;
    const double S = static_cast<double>(live.size());
    for (const Slide* s : live) {
        StepFunction c = s->axis == Axis::V ? with_period_multiple(s->f, q) : s->f;
        for (auto& v : c.values) {
            v = v.frac();
            if (v > BigRatio(BigInt(1), BigInt(2))) v = v - BigRatio(1);
        }
        auto tp = std::make_shared<TrigPolynomial>(
            approximate_step_impl(c, c.N, eps / S, delta / S, sigma_floor_x * static_cast<double>(c.N)));
        AnalyticStep st;
        st.kind = s->axis == Axis::H ? AnalyticStep::H : AnalyticStep::V;
        st.f = std::move(tp);
        res.map.steps.push_back(std::move(st));
    }
    res.exceptional_mass = delta;
    return res;
}

namespace {

std::vector<Vec2> sample_points(size_t n, uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::vector<Vec2> pts(n);
    // 53-bit uniform in [0,1) without relying on distribution internals
    auto u = [&] { return static_cast<double>(rng() >> 11) * 0x1.0p-53; };
    for (auto& p : pts) {
        p[0] = u();
        p[1] = u();
    }
    return pts;
}

double wrap01(double v) { return v - std::floor(v); }

}  // namespace

double good_set_fraction(const AnalyticMap& h, const GridPermutation& perm, size_t samples, uint64_t seed) {
    const Grid& g = perm.grid();
    const auto pts = sample_points(samples, seed);
    std::vector<double> ok(samples, 0.0);
    parallel_for(samples, [&](size_t i) {
        const Vec2 x = pts[i];
        const Cell c{std::min<int64_t>(static_cast<int64_t>(x[0] * g.cols()), g.cols() - 1),
                     std::min<int64_t>(static_cast<int64_t>(x[1] * g.s), g.s - 1)};
        const Cell t = perm.apply(c);
        const Vec2 y = h.apply(x);
        const int64_t c1 = std::min<int64_t>(static_cast<int64_t>(wrap01(y[0]) * g.cols()), g.cols() - 1);
        const int64_t c2 = std::min<int64_t>(static_cast<int64_t>(wrap01(y[1]) * g.s), g.s - 1);
        ok[i] = (c1 == t.col && c2 == t.row) ? 1.0 : 0.0;
    });
    return samples ? tree_sum(ok.data(), ok.size()) / static_cast<double>(samples) : 1.0;
}

ApproxResult approx_permutation(const GridPermutation& perm, const ApproxOptions& opt) {
    const BlockSlideMap bs = permutation_to_blockslide(perm);
    // sup error far below the cell scale; exceptional strips take half of eps
    ApproxResult res = approx_blockslide(bs, perm.grid().q, 1e-3 * opt.eps, 0.5 * opt.eps, opt.sigma_floor_x);
    res.samples = opt.samples;
    res.good_fraction = perm.is_identity() ? 1.0 : good_set_fraction(res.map, perm, opt.samples, opt.seed);
    return res;
}

double torus_distance(double a, double b) {
    double d = std::fabs(a - b);
    d -= std::floor(d);
    return std::min(d, 1 - d);
}

double commutation_residual(const AnalyticMap& h, int64_t q, size_t samples, uint64_t seed) {
    const auto pts = sample_points(samples, seed);
    std::vector<double> r(samples, 0.0);
    const ld step = 1.0L / static_cast<ld>(q);
    parallel_for(samples, [&](size_t i) {
        const Vec2 x = pts[i];
        const auto a = apply_ld(h, x[0] + step, x[1]);
        const auto b = apply_ld(h, x[0], x[1]);
        const ld d1 = a.first - b.first - step, d2 = a.second - b.second;
        r[i] = static_cast<double>(std::max(std::fabs(d1 - std::round(d1)), std::fabs(d2 - std::round(d2))));
    });
    return samples ? *std::max_element(r.begin(), r.end()) : 0.0;
}

double max_jacobian_defect(const AnalyticMap& h, size_t samples, uint64_t seed) {
    const auto pts = sample_points(samples, seed);
    std::vector<double> r(samples, 0.0);
    parallel_for(samples, [&](size_t i) {
        const auto J = h.jacobian(pts[i]);
        const ld det = std::fma(static_cast<ld>(J[0]), J[3], -static_cast<ld>(J[1]) * J[2]);
        r[i] = static_cast<double>(std::fabs(det - 1));
    });
    return samples ? *std::max_element(r.begin(), r.end()) : 0.0;
}

namespace {

std::vector<CVec2> strip_samples(double rho, int grid) {
    if (grid < 1) throw std::invalid_argument("grid density must be >= 1");
    if (!(rho >= 0)) throw std::invalid_argument("rho must be >= 0");
    std::vector<CVec2> z;
    z.reserve(static_cast<size_t>(grid) * grid * 4);
    for (int i = 0; i < grid; ++i)
        for (int j = 0; j < grid; ++j)
            for (int sy : {-1, 1})
                for (int sx : {-1, 1})
                    z.push_back({cplx(static_cast<double>(i) / grid, sx * rho), cplx(static_cast<double>(j) / grid, sy * rho)});
    return z;
}

// max_c inf_n sup |d_c + n| over the sampled differences (n near the first sample's offset)
StripNormEstimate reduce_differences(const std::vector<CVec2>& diffs, const std::vector<CVec2>& where, bool overflow,
                                     double rho, int grid, bool shift) {
    StripNormEstimate est;
    est.rho = rho;
    est.grid_density = grid;
    if (overflow) {
        est.value = std::numeric_limits<double>::infinity();
        est.overflow = true;
        return est;
    }
    for (int c = 0; c < 2; ++c) {
        const double n0 = shift && !diffs.empty() ? -std::round(diffs[0][c].real()) : 0.0;
        double best = std::numeric_limits<double>::infinity();
        size_t best_at = 0;
        for (double n : {n0 - 1, n0, n0 + 1}) {
            if (!shift && n != n0) continue;
            double sup = 0;
            size_t at = 0;
            for (size_t i = 0; i < diffs.size(); ++i) {
                const double v = std::abs(diffs[i][c] + n);
                if (v > sup) sup = v, at = i;
            }
            if (sup < best) best = sup, best_at = at;
        }
        if (c == 0 || best > est.value) {
            est.value = best;
            if (!where.empty()) est.attained_at = where[best_at];
        }
    }
    return est;
}

}  // namespace

StripNormEstimate strip_distance_oneway(const AnalyticMap& f, const AnalyticMap& g, double rho, int grid) {
    const auto zs = strip_samples(rho, grid);
    std::vector<CVec2> d(zs.size());
    std::vector<char> bad(zs.size(), 0);
    parallel_for(zs.size(), [&](size_t i) {
        try {
            const CVec2 a = f.apply(zs[i]), b = g.apply(zs[i]);
            d[i] = {a[0] - b[0], a[1] - b[1]};
            if (!std::isfinite(std::abs(d[i][0])) || !std::isfinite(std::abs(d[i][1]))) bad[i] = 1;
        } catch (const std::range_error&) {
            bad[i] = 1;
        }
    });
    const bool overflow = std::find(bad.begin(), bad.end(), 1) != bad.end();
    return reduce_differences(d, zs, overflow, rho, grid, true);
}

namespace {

bool same_map(const AnalyticMap& f, const AnalyticMap& g) {
    if (f.steps.size() != g.steps.size()) return false;
    for (size_t i = 0; i < f.steps.size(); ++i) {
        const AnalyticStep &a = f.steps[i], &b = g.steps[i];
        if (a.kind != b.kind) return false;
        if (a.kind == AnalyticStep::Rot) {
            if (a.alpha != b.alpha) return false;
            continue;
        }
        if (a.sign != b.sign) return false;
        if (a.f != b.f && (a.f->N != b.f->N || a.f->a != b.f->a || a.f->b != b.f->b)) return false;
    }
    return true;
}

}  // namespace

StripNormEstimate strip_distance(const AnalyticMap& f, const AnalyticMap& g, double rho, int grid) {
    // exact zero without evaluating, which could overflow on long compositions
    if (same_map(f, g)) {
        StripNormEstimate z;
        z.rho = rho;
        z.grid_density = grid;
        return z;
    }
    const StripNormEstimate a = strip_distance_oneway(f, g, rho, grid);
    const StripNormEstimate b = strip_distance_oneway(f.inverse(), g.inverse(), rho, grid);
    return b.value > a.value ? b : a;
}

AnalyticMap conjugator(const std::vector<AnalyticMap>& h) {
    AnalyticMap H;
    for (auto it = h.rbegin(); it != h.rend(); ++it) H = H.then(*it);
    return H;
}

AnalyticMap conjugated_rotation(const AnalyticMap& H, const BigRatio& alpha) {
    return H.inverse().then(AnalyticMap::rotation(alpha)).then(H);
}

namespace {

// sup_z |P(R^d Q z) - P(Q z)| component-wise; first order through the chain rule when |d| is tiny
StripNormEstimate perturbation_gap(const AnalyticMap& P, const AnalyticMap& Q, double d, double rho, int grid) {
    const auto zs = strip_samples(rho, grid);
    std::vector<CVec2> diff(zs.size());
    std::vector<char> bad(zs.size(), 0);
    const bool linear = std::fabs(d) < 1e-6;
    parallel_for(zs.size(), [&](size_t i) {
        try {
            const CVec2 v = Q.apply(zs[i]);
            if (linear) {
                const auto r = P.apply_tangent(v, {cplx(d, 0), cplx(0, 0)});
                diff[i] = r.second;
            } else {
                const CVec2 a = P.apply(CVec2{v[0] + d, v[1]}), b = P.apply(v);
                diff[i] = {a[0] - b[0], a[1] - b[1]};
            }
            if (!std::isfinite(std::abs(diff[i][0])) || !std::isfinite(std::abs(diff[i][1]))) bad[i] = 1;
        } catch (const std::range_error&) {
            bad[i] = 1;
        }
    });
    const bool overflow = std::find(bad.begin(), bad.end(), 1) != bad.end();
    return reduce_differences(diff, zs, overflow, rho, grid, false);
}

}  // namespace

StripNormEstimate rotation_change_gap(const AnalyticMap& H, const AnalyticMap& h, const BigRatio& alpha, double dalpha,
                                      double rho, int grid) {
    const AnalyticMap Hinv = H.inverse(), hinv = h.inverse();
    // forward: T' z - T z = P(R^d v) - P(v), P = H R^a h, v = h^-1 H^-1 z
    const AnalyticMap Pf = h.then(AnalyticMap::rotation(alpha)).then(H);
    const AnalyticMap Qf = Hinv.then(hinv);
    // inverse: P = H h, v = h^-1 R^-a H^-1 z, shift -d
    const AnalyticMap Pi = h.then(H);
    const AnalyticMap Qi = Hinv.then(AnalyticMap::rotation(-alpha)).then(hinv);
    const StripNormEstimate a = perturbation_gap(Pf, Qf, dalpha, rho, grid);
    const StripNormEstimate b = perturbation_gap(Pi, Qi, -dalpha, rho, grid);
    return b.value > a.value ? b : a;
}

namespace {

double rotation_increment(const StageParams& sp, int64_t l) {
    // alpha_{n+1} - alpha_n = 1/(k l q^2)
    const mpq_class d(BigInt(1), BigInt(sp.k) * BigInt(l) * sp.q * sp.q);
    return d.get_d();
}

}  // namespace

StageBuild build_stage(const std::vector<AnalyticMap>& h_prev, const AnalyticMap& h_next, const StageParams& prev_params,
                       const StageParams& next_params, double rho, int grid) {
    StageBuild sb;
    const AnalyticMap Hn = conjugator(h_prev);
    std::vector<AnalyticMap> all = h_prev;
    all.push_back(h_next);
    sb.H = conjugator(all);
    sb.T = conjugated_rotation(sb.H, next_params.alpha());
    const BigRatio da = next_params.alpha() - prev_params.alpha();
    const StripNormEstimate g = rotation_change_gap(Hn, h_next, prev_params.alpha(), da.to_double(), rho, grid);
    sb.gap = g.value;
    sb.gap_overflow = g.overflow;
    return sb;
}

double l_gap(const AnalyticMap& H_n, const std::vector<AnalyticMap>& candidates, const StageParams& stage_n, int64_t l,
             double rho, int grid) {
    const double d = rotation_increment(stage_n, l);
    double worst = 0;
    if (candidates.empty()) {
        worst = rotation_change_gap(H_n, AnalyticMap{}, stage_n.alpha(), d, rho, grid).value;
    }
    for (const auto& h : candidates) worst = std::max(worst, rotation_change_gap(H_n, h, stage_n.alpha(), d, rho, grid).value);
    return worst;
}

LStarResult find_l_star(const AnalyticMap& H_n, const std::vector<AnalyticMap>& candidates, const StageParams& stage_n,
                        double rho, double eps_n, int64_t l_budget, int grid) {
    if (stage_n.k < 2) throw std::invalid_argument("find_l_star needs k_n >= 2");
    LStarResult res;
    const double thr = eps_n / 2;
    auto gap = [&](int64_t l) {
        const double g = l_gap(H_n, candidates, stage_n, l, rho, grid);
        res.scanned.emplace_back(l, g);
        return g;
    };
    int64_t lo = 1, hi = 2;   // gap(lo) fails (or lo below the minimum), gap(hi) is being tried
    double ghi = gap(hi);
    while (!(ghi < thr)) {
        lo = hi;
        if (hi > l_budget / 2) {
            res.l = hi;
            res.gap = ghi;
            res.found = false;
            return res;
        }
        hi *= 2;
        ghi = gap(hi);
    }
    while (hi - lo > 1) {
        const int64_t mid = lo + (hi - lo) / 2;
        const double gm = gap(mid);
        if (gm < thr)
            hi = mid, ghi = gm;
        else
            lo = mid;
    }
    res.l = hi;
    res.gap = ghi;
    res.found = true;
    return res;
}

double eps_schedule(double eps0, int n) { return std::ldexp(eps0, -2 * n); }

nlohmann::json to_json(const TrigPolynomial& tp) {
    nlohmann::json j;
    j["N"] = tp.N;
    std::vector<std::string> a, b, c;
    for (double x : tp.a) a.push_back(hex_double(x));
    for (double x : tp.b) b.push_back(hex_double(x));
    for (double x : tp.cells) c.push_back(hex_double(x));
    j["a"] = a;
    j["b"] = b;
    j["sigma_u"] = hex_double(tp.sigma_u);
    j["cells"] = c;
    j["tail_bound"] = hex_double(tp.tail_bound);
    j["eps"] = hex_double(tp.eps);
    j["delta"] = hex_double(tp.delta);
    return j;
}

TrigPolynomial trig_polynomial_from_json(const nlohmann::json& j) {
    TrigPolynomial tp;
    tp.N = j.at("N").get<int64_t>();
    tp.a.clear();
    tp.b.clear();
    for (const auto& x : j.at("a")) tp.a.push_back(parse_hex_double(x.get<std::string>()));
    for (const auto& x : j.at("b")) tp.b.push_back(parse_hex_double(x.get<std::string>()));
    if (tp.a.empty() || tp.a.size() != tp.b.size()) throw std::invalid_argument("coefficient arrays malformed");
    if (tp.N < 1) throw std::invalid_argument("N must be >= 1");
    tp.sigma_u = parse_hex_double(j.value("sigma_u", std::string("0x0p+0")));
    if (j.contains("cells"))
        for (const auto& x : j.at("cells")) tp.cells.push_back(parse_hex_double(x.get<std::string>()));
    tp.tail_bound = parse_hex_double(j.value("tail_bound", std::string("0x0p+0")));
    tp.eps = parse_hex_double(j.value("eps", std::string("0x0p+0")));
    tp.delta = parse_hex_double(j.value("delta", std::string("0x0p+0")));
    return tp;
}

nlohmann::json to_json(const AnalyticMap& m) {
    nlohmann::json steps = nlohmann::json::array();
    for (const auto& s : m.steps) {
        if (s.kind == AnalyticStep::Rot) {
            steps.push_back({{"kind", "rot"}, {"alpha", s.alpha.str()}});
        } else {
            steps.push_back({{"kind", s.kind == AnalyticStep::H ? "h" : "v"}, {"sign", s.sign}, {"f", to_json(*s.f)}});
        }
    }
    return {{"steps", steps}};
}

AnalyticMap analytic_map_from_json(const nlohmann::json& j) {
    AnalyticMap m;
    for (const auto& e : j.at("steps")) {
        AnalyticStep st;
        const std::string kind = e.at("kind").get<std::string>();
        if (kind == "rot") {
            st.kind = AnalyticStep::Rot;
            st.set_alpha(BigRatio::parse(e.at("alpha").get<std::string>()));
        } else if (kind == "h" || kind == "v") {
            st.kind = kind == "h" ? AnalyticStep::H : AnalyticStep::V;
            st.sign = e.at("sign").get<double>();
            if (st.sign != 1.0 && st.sign != -1.0) throw std::invalid_argument("shear sign must be +-1");
            st.f = std::make_shared<TrigPolynomial>(trig_polynomial_from_json(e.at("f")));
        } else {
            throw std::invalid_argument("unknown step kind: " + kind);
        }
        m.steps.push_back(std::move(st));
    }
    return m;
}

}  // namespace abc
