#include "abc/run.hpp"

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <random>
#include <set>
#include <sstream>

#include "abc/blockslide.hpp"
#include "abc/parallel.hpp"
#include "abc/transect.hpp"

namespace fs = std::filesystem;

namespace abc {

namespace {

std::string trim(const std::string& s) {
    const auto a = s.find_first_not_of(" \t\r\n");
    if (a == std::string::npos) return "";
    const auto b = s.find_last_not_of(" \t\r\n");
    return s.substr(a, b - a + 1);
}

std::vector<std::string> tokens(const std::string& v) {
    std::string t = v;
    for (char& c : t)
        if (c == ',' || c == '[' || c == ']') c = ' ';
    std::istringstream is(t);
    std::vector<std::string> out;
    for (std::string w; is >> w;) out.push_back(w);
    return out;
}

int64_t parse_int(const std::string& key, const std::string& v) {
    try {
        size_t pos = 0;
        const long long x = std::stoll(v, &pos);
        if (pos != v.size()) throw std::invalid_argument(v);
        return x;
    } catch (const std::exception&) {
        throw UsageError("config key '" + key + "': not an integer: '" + v + "'");
    }
}

double parse_real(const std::string& key, const std::string& v) {
    try {
        size_t pos = 0;
        const double x = std::stod(v, &pos);
        if (pos != v.size()) throw std::invalid_argument(v);
        return x;
    } catch (const std::exception&) {
        throw UsageError("config key '" + key + "': not a number: '" + v + "'");
    }
}

bool parse_bool(const std::string& key, const std::string& v) {
    if (v == "true" || v == "1" || v == "yes") return true;
    if (v == "false" || v == "0" || v == "no") return false;
    throw UsageError("config key '" + key + "': not a boolean: '" + v + "'");
}

std::vector<int64_t> parse_ints(const std::string& key, const std::string& v) {
    std::vector<int64_t> out;
    for (const auto& t : tokens(v)) out.push_back(parse_int(key, t));
    return out;
}

std::string join(const std::vector<int64_t>& v) {
    std::string s;
    for (size_t i = 0; i < v.size(); ++i) s += (i ? " " : "") + std::to_string(v[i]);
    return s;
}

BigInt multinomial(int64_t k, int64_t s) {
    BigInt num, part, den;
    mpz_fac_ui(num.get_mpz_t(), static_cast<unsigned long>(k));
    mpz_fac_ui(part.get_mpz_t(), static_cast<unsigned long>(k / s));
    mpz_pow_ui(den.get_mpz_t(), part.get_mpz_t(), static_cast<unsigned long>(s));
    return num / den;
}

std::string fmt(double v) {
    std::ostringstream os;
    os.precision(9);
    os << v;
    return os.str();
}

void write_text(const fs::path& p, const std::string& text) {
    fs::create_directories(p.parent_path());
    std::ofstream os(p, std::ios::binary);
    if (!os) throw std::runtime_error("cannot write " + p.string());
    os << text;
}

void write_json(const fs::path& p, const nlohmann::json& j) { write_text(p, j.dump(1) + "\n"); }

nlohmann::json read_json(const fs::path& p) {
    std::ifstream is(p);
    if (!is) throw UsageError("cannot open " + p.string());
    try {
        return nlohmann::json::parse(is);
    } catch (const nlohmann::json::exception& e) {
        throw UsageError(p.string() + ": " + e.what());
    }
}

uint64_t mix(uint64_t seed, uint64_t tag) {
    uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (tag + 1);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

// Fisher-Yates with an explicit index draw so the order does not depend on the library.
template <class T>
void shuffle_with(std::vector<T>& v, std::mt19937_64& rng) {
    for (size_t i = v.size(); i > 1; --i) std::swap(v[i - 1], v[rng() % i]);
}

}  // namespace

double RunConfig::sigma_floor() const { return rho / std::sqrt(2.0 * std::log(strip_budget)); }

void RunConfig::set(const std::string& key0, const std::string& value0) {
    const std::string key = trim(key0), v = trim(value0);
    if (key == "stages") {
        stages = static_cast<int>(parse_int(key, v));
    } else if (key == "k" || key == "k_schedule") {
        k = parse_ints(key, v);
    } else if (key == "l" || key == "l_schedule") {
        l_auto = v == "auto";
        l = l_auto ? std::vector<int64_t>{} : parse_ints(key, v);
    } else if (key == "s" || key == "s_schedule") {
        s = parse_ints(key, v);
    } else if (key == "sigma_size") {
        sigma_size = parse_int(key, v);
    } else if (key == "rho") {
        rho = parse_real(key, v);
    } else if (key == "eps0") {
        eps0 = parse_real(key, v);
    } else if (key == "seed") {
        seed = static_cast<uint64_t>(parse_int(key, v));
    } else if (key == "output_dir" || key == "out") {
        output_dir = v;
    } else if (key == "samples" || key == "sample_counts") {
        samples = static_cast<size_t>(parse_int(key, v));
    } else if (key == "grid") {
        grid = static_cast<int>(parse_int(key, v));
    } else if (key == "l_budget") {
        l_budget = parse_int(key, v);
    } else if (key == "strip_budget") {
        strip_budget = parse_real(key, v);
    } else if (key == "approx_eps") {
        approx_eps = parse_real(key, v);
    } else if (key == "cap") {
        cap = parse_int(key, v);
    } else if (key == "record_timings") {
        record_timings = parse_bool(key, v);
    } else if (key == "plots") {
        plots = parse_bool(key, v);
    } else if (key.rfind("prescription.", 0) == 0) {
        const int n = static_cast<int>(parse_int(key, key.substr(13)));
        std::vector<std::vector<int>> P;
        std::istringstream is(v);
        for (std::string part; std::getline(is, part, '|');) {
            std::vector<int> tup;
            for (auto x : parse_ints(key, part)) tup.push_back(static_cast<int>(x));
            if (tup.empty()) throw UsageError("config key '" + key + "': empty tuple");
            P.push_back(std::move(tup));
        }
        prescriptions[n] = std::move(P);
    } else {
        throw UsageError("unknown config key '" + key + "'");
    }
}

void RunConfig::validate() const {
    auto bad = [](const std::string& m) { throw UsageError("invalid config: " + m); };
    if (stages < 1) bad("stages must be >= 1");
    if (static_cast<int>(k.size()) != stages) bad("k schedule has " + std::to_string(k.size()) + " entries, stages = " + std::to_string(stages));
    if (!l_auto && static_cast<int>(l.size()) != stages) bad("l schedule has " + std::to_string(l.size()) + " entries, stages = " + std::to_string(stages));
    if (static_cast<int>(s.size()) != stages + 1) bad("s schedule has " + std::to_string(s.size()) + " entries, expected stages+1 = " + std::to_string(stages + 1));
    if (!(rho > 0)) bad("rho must be > 0");
    if (!(eps0 > 0)) bad("eps0 must be > 0");
    if (!(strip_budget > 1)) bad("strip_budget must be > 1");
    if (!(approx_eps > 0 && approx_eps < 1)) bad("approx_eps must lie in (0,1)");
    if (sigma_size < 1 || sigma_size > 0xFFF0) bad("sigma_size out of range");
    if (s[0] != sigma_size) bad("s_0 must equal sigma_size");
    if (grid < 1) bad("grid must be >= 1");
    if (samples < 1) bad("samples must be >= 1");
    if (l_budget < 2) bad("l_budget must be >= 2");
    for (int n = 0; n < stages; ++n) {
        if (k[n] < 2) bad("k_" + std::to_string(n) + " must be >= 2");
        if (!l_auto && l[n] < 2) bad("l_" + std::to_string(n) + " must be >= 2");
        if (s[n] < 1 || k[n] % s[n] != 0) bad("s_" + std::to_string(n) + " must divide k_" + std::to_string(n));
        if (s[n + 1] % s[n] != 0) bad("s_" + std::to_string(n + 1) + " must be a multiple of s_" + std::to_string(n));
        if (multinomial(k[n], s[n]) < BigInt(static_cast<long>(s[n + 1])))
            bad("only " + to_decimal(multinomial(k[n], s[n])) + " distinct uniform tuples exist for s_" + std::to_string(n + 1) +
                " = " + std::to_string(s[n + 1]));
    }
    for (const auto& [n, P] : prescriptions) {
        if (n < 1 || n > stages) bad("prescription." + std::to_string(n) + " outside 1..stages");
        if (static_cast<int64_t>(P.size()) != s[n]) bad("prescription." + std::to_string(n) + " needs s_" + std::to_string(n) + " tuples");
        for (const auto& t : P) {
            if (static_cast<int64_t>(t.size()) != k[n - 1]) bad("prescription." + std::to_string(n) + ": tuple length != k");
            for (int x : t)
                if (x < 0 || x >= s[n - 1]) bad("prescription." + std::to_string(n) + ": entry out of range");
        }
    }
}

namespace {
// shortest decimal that reads back to the same double
std::string short_double(double v) {
    char buf[32];
    const auto r = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, r.ptr);
}
}  // namespace

std::string RunConfig::to_text() const {
    std::ostringstream os;
    os << "stages = " << stages << "\n";
    os << "k = " << join(k) << "\n";
    os << "l = " << (l_auto ? std::string("auto") : join(l)) << "\n";
    os << "s = " << join(s) << "\n";
    os << "sigma_size = " << sigma_size << "\n";
    os << "rho = " << short_double(rho) << "\n";
    os << "eps0 = " << short_double(eps0) << "\n";
    os << "seed = " << seed << "\n";
    os << "samples = " << samples << "\n";
    os << "grid = " << grid << "\n";
    os << "l_budget = " << l_budget << "\n";
    os << "strip_budget = " << short_double(strip_budget) << "\n";
    os << "approx_eps = " << short_double(approx_eps) << "\n";
    os << "cap = " << cap << "\n";
    os << "record_timings = " << (record_timings ? "true" : "false") << "\n";
    os << "plots = " << (plots ? "true" : "false") << "\n";
    for (const auto& [n, P] : prescriptions) {
        os << "prescription." << n << " =";
        for (size_t t = 0; t < P.size(); ++t) {
            os << (t ? " |" : "");
            for (int x : P[t]) os << " " << x;
        }
        os << "\n";
    }
    return os.str();
}

RunConfig parse_config(const std::string& text) {
    RunConfig cfg;
    std::istringstream is(text);
    int lineno = 0;
    for (std::string line; std::getline(is, line);) {
        ++lineno;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.resize(hash);
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos) throw UsageError("config line " + std::to_string(lineno) + ": expected key = value");
        try {
            cfg.set(line.substr(0, eq), line.substr(eq + 1));
        } catch (const UsageError& e) {
            throw UsageError("config line " + std::to_string(lineno) + ": " + e.what());
        }
    }
    return cfg;
}

RunConfig load_config(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw UsageError("cannot open config " + path);
    std::stringstream ss;
    ss << is.rdbuf();
    return parse_config(ss.str());
}

std::vector<std::vector<int>> generate_prescriptions(int64_t s_n, int64_t k_n, int64_t s_next, uint64_t seed) {
    if (s_n < 1 || k_n % s_n != 0) throw std::invalid_argument("s_n must divide k_n");
    std::vector<int> base;
    for (int64_t w = 0; w < s_n; ++w)
        for (int64_t c = 0; c < k_n / s_n; ++c) base.push_back(static_cast<int>(w));
    std::mt19937_64 rng(seed);
    const BigInt total = multinomial(k_n, s_n);
    if (total < BigInt(static_cast<long>(s_next))) throw std::invalid_argument("not enough distinct uniform tuples");
    std::vector<std::vector<int>> out;
    if (total <= BigInt(100000)) {
        std::vector<std::vector<int>> all;
        std::vector<int> t = base;
        do all.push_back(t);
        while (std::next_permutation(t.begin(), t.end()));
        shuffle_with(all, rng);
        out.assign(all.begin(), all.begin() + s_next);
        return out;
    }
    std::set<std::vector<int>> seen;
    while (static_cast<int64_t>(out.size()) < s_next) {
        std::vector<int> t = base;
        shuffle_with(t, rng);
        if (seen.insert(t).second) out.push_back(std::move(t));
    }
    return out;
}

bool RunReport::passed() const {
    return std::all_of(verdicts.begin(), verdicts.end(), [](const Verdict& v) { return v.pass; });
}

void RunReport::add(const std::string& name, bool pass, const std::string& detail) { verdicts.push_back({name, pass, detail}); }

nlohmann::json RunReport::to_json() const {
    nlohmann::json j = data;
    j["command"] = command;
    nlohmann::json vs = nlohmann::json::array();
    for (const auto& v : verdicts) vs.push_back({{"name", v.name}, {"pass", v.pass}, {"detail", v.detail}});
    j["verdicts"] = vs;
    j["passed"] = passed();
    return j;
}

std::string RunReport::summary() const {
    std::ostringstream os;
    for (const auto& v : verdicts) os << (v.pass ? "PASS " : "FAIL ") << v.name << (v.detail.empty() ? "" : ": " + v.detail) << "\n";
    os << (passed() ? "all verdicts pass" : "some verdicts failed") << "\n";
    return os.str();
}

double name_agreement(const AnalyticMap& T, const std::vector<AbcStage>& st, int n, size_t starts, uint64_t seed) {
    if (n < 1 || n >= static_cast<int>(st.size()) || !st[n].materialized) throw std::invalid_argument("stage names not available");
    const PeriodicProcess proc = stage_process(st, n);
    const int64_t q = proc.cols(), s = proc.rows(), s0 = st[0].params.s;
    std::mt19937_64 rng(seed);
    std::vector<Vec2> x0(starts);
    for (auto& x : x0) {
        x[0] = static_cast<double>(rng() >> 11) * 0x1.0p-53;
        x[1] = static_cast<double>(rng() >> 11) * 0x1.0p-53;
    }
    std::vector<double> hits(starts, 0.0);
    parallel_for(starts, [&](size_t i) {
        Vec2 x = x0[i];
        const int64_t atom = std::min<int64_t>(static_cast<int64_t>(x[0] * q), q - 1) +
                             q * std::min<int64_t>(static_cast<int64_t>(x[1] * s), s - 1);
        const Word& w = st[n].tower_words[proc.tower_of(atom)];
        const int64_t lev = proc.level_of(atom);
        int64_t good = 0;
        for (int64_t t = 0; t < q; ++t) {
            const int64_t row = std::min<int64_t>(static_cast<int64_t>((x[1] - std::floor(x[1])) * s0), s0 - 1);
            if (w[(lev + t) % q] == static_cast<Symbol>(row)) ++good;
            x = T.apply(x);
            x[0] -= std::floor(x[0]);
            x[1] -= std::floor(x[1]);
        }
        hits[i] = static_cast<double>(good) / static_cast<double>(q);
    });
    return tree_sum(hits.data(), hits.size()) / static_cast<double>(starts);
}

namespace {

struct Clock {
    std::chrono::steady_clock::time_point t0 = std::chrono::steady_clock::now();
    double lap() {
        const auto t = std::chrono::steady_clock::now();
        const double d = std::chrono::duration<double>(t - t0).count();
        t0 = t;
        return d;
    }
};

std::vector<uint8_t> palette(int64_t i) {
    static const uint8_t base[][3] = {{230, 80, 60},  {60, 120, 220}, {70, 180, 90},  {240, 190, 40},
                                      {150, 80, 200}, {40, 190, 200}, {220, 110, 170}, {120, 120, 120}};
    const auto& c = base[i % 8];
    const int shade = static_cast<int>((i / 8) % 3) * 30;
    return {static_cast<uint8_t>(std::max(0, c[0] - shade)), static_cast<uint8_t>(std::max(0, c[1] - shade)),
            static_cast<uint8_t>(std::max(0, c[2] - shade))};
}

void plot_partition(const fs::path& p, const AnalyticMap& H, int64_t s_n) {
    const int W = 256;
    const AnalyticMap Hinv = H.inverse();
    std::vector<uint8_t> img(static_cast<size_t>(3 * W * W));
    parallel_for(static_cast<size_t>(W * W), [&](size_t i) {
        const int px = static_cast<int>(i % W), py = static_cast<int>(i / W);
        const Vec2 x{(px + 0.5) / W, 1.0 - (py + 0.5) / W};
        const Vec2 y = Hinv.apply(x);
        const double y2 = y[1] - std::floor(y[1]);
        const auto c = palette(std::min<int64_t>(static_cast<int64_t>(y2 * s_n), s_n - 1));
        std::copy(c.begin(), c.end(), img.begin() + 3 * i);
    });
    write_png(p.string(), W, W, img);
}

void plot_orbits(const fs::path& p, const AnalyticMap& T, int64_t len, uint64_t seed) {
    const int W = 256;
    std::vector<uint8_t> img(static_cast<size_t>(3 * W * W), 255);
    std::mt19937_64 rng(seed);
    for (int o = 0; o < 6; ++o) {
        Vec2 x{static_cast<double>(rng() >> 11) * 0x1.0p-53, static_cast<double>(rng() >> 11) * 0x1.0p-53};
        const auto c = palette(o);
        for (int64_t t = 0; t < len; ++t) {
            const int px = std::min(W - 1, static_cast<int>(x[0] * W)), py = std::min(W - 1, static_cast<int>((1 - x[1]) * W));
            std::copy(c.begin(), c.end(), img.begin() + 3 * (py * W + px));
            x = T.apply(x);
            x[0] -= std::floor(x[0]);
            x[1] -= std::floor(x[1]);
        }
    }
    write_png(p.string(), W, W, img);
}

// log10 bars of the gaps against the eps_n/2 thresholds (tick marks)
void plot_gaps(const fs::path& p, const std::vector<double>& gaps, const std::vector<double>& thr) {
    const int W = 64 * std::max<int>(1, static_cast<int>(gaps.size())), Hh = 200;
    std::vector<uint8_t> img(static_cast<size_t>(3 * W * Hh), 255);
    auto ypix = [&](double v) {
        const double lg = std::clamp(std::log10(std::max(v, 1e-12)), -12.0, 8.0);
        return static_cast<int>((8.0 - lg) / 20.0 * (Hh - 1));
    };
    auto put = [&](int x, int y, const std::vector<uint8_t>& c) {
        if (x < 0 || x >= W || y < 0 || y >= Hh) return;
        std::copy(c.begin(), c.end(), img.begin() + 3 * (y * W + x));
    };
    for (size_t i = 0; i < gaps.size(); ++i) {
        const int x0 = static_cast<int>(i) * 64 + 12;
        const int top = std::isfinite(gaps[i]) ? ypix(gaps[i]) : 0;
        for (int x = x0; x < x0 + 40; ++x)
            for (int y = top; y < Hh; ++y) put(x, y, {60, 120, 220});
        const int ty = ypix(thr[i]);
        for (int x = x0 - 6; x < x0 + 46; ++x) put(x, ty, {220, 40, 40});
    }
    write_png(p.string(), W, Hh, img);
}

struct LoadedBuild {
    RunConfig cfg;
    Alphabet alphabet;
    std::vector<int64_t> k, l;
    std::vector<std::vector<std::vector<int>>> P;
    nlohmann::json report;
};

LoadedBuild load_build(const fs::path& dir) {
    LoadedBuild b;
    const nlohmann::json c = read_json(dir / "construction.json");
    try {
        b.alphabet = Alphabet(c.at("alphabet").get<std::vector<std::string>>());
        b.k = c.at("k").get<std::vector<int64_t>>();
        b.l = c.at("l").get<std::vector<int64_t>>();
        b.P = c.at("prescriptions").get<std::vector<std::vector<std::vector<int>>>>();
    } catch (const nlohmann::json::exception& e) {
        throw UsageError((dir / "construction.json").string() + ": " + e.what());
    }
    b.cfg = load_config((dir / "config.txt").string());
    if (fs::exists(dir / "report.json")) b.report = read_json(dir / "report.json");
    return b;
}

AnalyticMap load_map(const fs::path& p) {
    try {
        return analytic_map_from_json(read_json(p));
    } catch (const UsageError&) {
        throw;
    } catch (const std::exception& e) {
        throw UsageError(p.string() + ": " + e.what());
    }
}

}  // namespace

RunReport cmd_build(const RunConfig& cfg) {
    cfg.validate();
    if (cfg.output_dir.empty()) throw UsageError("no output directory given");
    const fs::path out(cfg.output_dir);
    fs::create_directories(out);
    RunReport rep;
    rep.command = "build";
    Clock clock;
    nlohmann::json timings = nlohmann::json::object();

    const Alphabet A = Alphabet::of_size(static_cast<size_t>(cfg.sigma_size));
    ParamSchedule sched(cfg.s[0]);
    std::vector<std::vector<std::vector<int>>> P;
    std::vector<int64_t> ls;
    std::vector<AnalyticMap> hA;
    std::vector<GridPermutation> hs;
    nlohmann::json stages_json = nlohmann::json::array();
    std::vector<double> gaps, thresholds;
    const double sigma_floor = cfg.sigma_floor();

    for (int n = 0; n < cfg.stages; ++n) {
        const std::string ctx = "stage " + std::to_string(n + 1) + ": ";
        try {
            const StageParams cur = sched.back();
            const auto it = cfg.prescriptions.find(n + 1);
            P.push_back(it != cfg.prescriptions.end()
                            ? it->second
                            : generate_prescriptions(cfg.s[n], cfg.k[n], cfg.s[n + 1], mix(cfg.seed, static_cast<uint64_t>(n))));
            if (!fits_i64(cur.q)) throw std::overflow_error("q_n does not fit a machine word");
            const GridPermutation h = h_from_words(P.back(), cfg.k[n], to_i64(cur.q), cfg.s[n]);
            const BlockSlideMap bs = permutation_to_blockslide(h);
            ApproxOptions opt;
            opt.eps = cfg.approx_eps;
            opt.sigma_floor_x = sigma_floor;
            opt.samples = cfg.samples;
            opt.seed = mix(cfg.seed, 100 + n);
            const ApproxResult ar = approx_permutation(h, opt);
            const double comm = commutation_residual(ar.map, to_i64(cur.q), std::min<size_t>(cfg.samples, 10000), mix(cfg.seed, 200 + n));
            const double jac = max_jacobian_defect(ar.map, 1000, mix(cfg.seed, 300 + n));
            const AnalyticMap Hn = conjugator(hA);
            StageParams spk = cur;
            spk.k = cfg.k[n];
            const double eps_n = eps_schedule(cfg.eps0, n);
            nlohmann::json sj;
            if (cfg.l_auto) {
                const LStarResult r = find_l_star(Hn, {ar.map}, spk, cfg.rho, eps_n, cfg.l_budget, cfg.grid);
                ls.push_back(r.l);
                nlohmann::json sc = nlohmann::json::array();
                for (const auto& [l, g] : r.scanned) sc.push_back({l, g});
                sj["l_star"] = {{"l", r.l}, {"gap", r.gap}, {"found", r.found}, {"scanned", sc}};
            } else {
                ls.push_back(cfg.l[n]);
            }
            const StageParams& nxt = sched.extend(cfg.k[n], ls.back(), cfg.s[n + 1]);
            const StripNormEstimate g =
                rotation_change_gap(Hn, ar.map, cur.alpha(), (nxt.alpha() - cur.alpha()).to_double(), cfg.rho, cfg.grid);
            hA.push_back(ar.map);
            hs.push_back(h);
            gaps.push_back(g.value);
            thresholds.push_back(eps_n / 2);
            sj["stage"] = n + 1;
            sj["h_grid"] = {{"k", h.grid().k}, {"q", h.grid().q}, {"s", h.grid().s}};
            sj["slides"] = bs.size();
            sj["shears"] = ar.map.shear_count();
            sj["good_fraction"] = ar.good_fraction;
            sj["exceptional_mass_bound"] = ar.exceptional_mass;
            sj["commutation_residual"] = comm;
            sj["jacobian_defect"] = jac;
            sj["gap"] = g.overflow ? nlohmann::json("inf") : nlohmann::json(g.value);
            sj["gap_threshold"] = eps_n / 2;
            sj["gap_attained_at"] = {{g.attained_at[0].real(), g.attained_at[0].imag()}, {g.attained_at[1].real(), g.attained_at[1].imag()}};
            stages_json.push_back(sj);
            rep.add("commutation h_" + std::to_string(n + 1), comm <= 1e-12, "residual " + fmt(comm));
            rep.add("jacobian h_" + std::to_string(n + 1), jac <= 1e-6, "max |det-1| " + fmt(jac));
            if (cfg.l_auto)
                rep.add("cauchy stage " + std::to_string(n), g.value < eps_n / 2,
                        "d_rho(T_" + std::to_string(n) + ",T_" + std::to_string(n + 1) + ") = " + fmt(g.value) + " vs eps_n/2 = " + fmt(eps_n / 2) +
                            " at l = " + std::to_string(ls.back()));
            write_json(out / "stages" / ("stage_" + std::to_string(n + 1) + ".json"),
                       {{"params", to_json(nxt)}, {"h", to_json(h)}, {"blockslide", to_json(bs)}, {"approx", sj}});
            write_json(out / "analytic" / ("h_" + std::to_string(n + 1) + ".json"), to_json(ar.map));
        } catch (const UsageError&) {
            throw;
        } catch (const std::exception& e) {
            throw std::runtime_error(ctx + e.what());
        }
    }
    timings["analytic_stages"] = clock.lap();

    const ConstructionSequence seq = build_construction_sequence(A, cfg.k, ls, P, cfg.cap);
    const std::vector<AbcStage> st = drive_from_construction_sequence(seq, cfg.cap);
    timings["symbolic"] = clock.lap();

    // params and construction
    nlohmann::json pj = nlohmann::json::array();
    for (const auto& sp : seq.params) pj.push_back(to_json(sp));
    write_json(out / "params.json", pj);
    write_json(out / "construction.json", {{"alphabet", A.letters()}, {"k", cfg.k}, {"l", ls}, {"s", cfg.s}, {"prescriptions", P}});
    write_text(out / "config.txt", cfg.to_text());

    bool params_ok = true;
    for (const auto& sp : seq.params) params_ok = params_ok && gcd(sp.p, sp.q) == 1;
    rep.add("params coprime", params_ok);

    nlohmann::json words_json = nlohmann::json::array();
    for (int n = 1; n <= cfg.stages; ++n) {
        if (!seq.materialized(n)) {
            words_json.push_back({{"stage", n}, {"materialized", false}, {"q", to_decimal(seq.params[n].q)}});
            continue;
        }
        const auto& fam = seq.stages[n];
        std::ostringstream os;
        write_word_family(os, fam, A);
        write_text(out / "words" / ("stage_" + std::to_string(n) + ".txt"), os.str());
        const ReadabilityResult rr = unique_readability_check(fam.words);
        std::string det = std::to_string(fam.words.size()) + " words of length " + to_decimal(fam.q);
        if (rr.witness)
            det += "; witness u=" + std::to_string(rr.witness->u) + " v=" + std::to_string(rr.witness->v) + " w=" +
                   std::to_string(rr.witness->w) + " offset=" + std::to_string(rr.witness->offset);
        const bool claimed = readability_guaranteed(seq.params[n - 1].q, ls[n - 1], P[n - 1]);
        if (!claimed) det += rr.readable ? "; not guaranteed" : "; not guaranteed, recorded without claim";
        rep.add("readability stage " + std::to_string(n), rr.readable || !claimed, det);
        words_json.push_back({{"stage", n}, {"materialized", true}, {"count", fam.words.size()}, {"length", to_decimal(fam.q)}, {"readable", rr.readable}});
    }
    nlohmann::json uni = nlohmann::json::array();
    for (int n = 0; n < cfg.stages; ++n) {
        const UniformityReport ur = uniformity_check(seq, n);
        uni.push_back(to_json(ur));
        rep.add("uniformity stage " + std::to_string(n + 1), ur.strongly_uniform, "max deviation " + ur.max_deviation.str());
    }
    const RequirementsReport rq = requirements_check(seq.params, P);
    {
        std::string det;
        for (const auto& v : rq.violations) det += (det.empty() ? "" : "; ") + v;
        rep.add("requirements", rq.ok(), det);
    }
    const auto rt = round_trip_check(st, seq);
    {
        int compared = 0;
        for (int n = 1; n <= cfg.stages; ++n) compared += st[n].materialized && seq.materialized(n);
        rep.add("oracle equivalence", !rt.has_value(),
                rt ? "stage " + std::to_string(rt->stage) + " word " + std::to_string(rt->word) + " position " + std::to_string(rt->position)
                   : std::to_string(compared) + " stages compared");
    }
    // transects against the circular operator
    for (int n = 0; n < cfg.stages; ++n) {
        const StageParams& a = seq.params[n];
        if (!seq.materialized(n) || !seq.materialized(n + 1) || seq.params[n + 1].q > BigInt(200000)) continue;
        const int64_t q = to_i64(a.q), p = to_i64(a.p % a.q);
        const TransectTrace tr = simulate_transect(p == 0 ? 1 : p, q, cfg.k[n], ls[n]);
        std::ostringstream csv;
        write_trace_csv(csv, tr);
        write_text(out / "transect" / ("stage_" + std::to_string(n + 1) + ".csv"), csv.str());
        int64_t mism = 0;
        for (size_t t = 0; t < P[n].size(); ++t) {
            std::vector<Word> tup;
            for (int x : P[n][t]) tup.push_back(seq.stages[n].words[x]);
            const Word a1 = transect_name(tr, tup);
            mism += a1 != seq.stages[n + 1].words[t];
        }
        rep.add("transect oracle stage " + std::to_string(n + 1), mism == 0, std::to_string(mism) + " mismatching words");
    }
    // epsilon-approximation of consecutive stage processes
    nlohmann::json epsj = nlohmann::json::array();
    for (int n = 0; n < cfg.stages; ++n) {
        const BigInt atoms = seq.params[n + 1].q * BigInt(static_cast<long>(cfg.s[n + 1]));
        if (atoms > BigInt(4000000)) continue;
        const PeriodicProcess coarse = stage_process(st, n), fine = stage_process(st, n + 1);
        const BigRatio bound(BigInt(3), BigInt(static_cast<long>(ls[n])));
        const EpsApproxResult er = epsilon_approximation_check(coarse, fine, bound.to_double());
        epsj.push_back({{"stage", n}, {"mass", er.mass.str()}, {"bound", bound.str()}});
        rep.add("eps-approximation stage " + std::to_string(n) + "->" + std::to_string(n + 1), er.mass <= bound,
                "mass " + er.mass.str() + " <= " + bound.str());
    }
    timings["checks"] = clock.lap();

    // conjugated rotations
    std::vector<AnalyticMap> Ts;
    for (int n = 0; n <= cfg.stages; ++n) {
        const AnalyticMap H = conjugator(std::vector<AnalyticMap>(hA.begin(), hA.begin() + n));
        Ts.push_back(conjugated_rotation(H, seq.params[n].alpha()));
        write_json(out / "analytic" / ("T_" + std::to_string(n) + ".json"), to_json(Ts.back()));
    }
    nlohmann::json extra = nlohmann::json::object();
    if (cfg.stages >= 1 && st[1].materialized && seq.params[1].q <= BigInt(100000)) {
        const double agree = name_agreement(Ts[1], st, 1, 1000, mix(cfg.seed, 400));
        const double need = 1.0 - 3.0 / static_cast<double>(ls[0]) - cfg.approx_eps;
        extra["name_agreement_stage1"] = agree;
        rep.add("name agreement stage 1", agree >= need, fmt(agree) + " >= " + fmt(need));
    }
    timings["names"] = clock.lap();
    if (cfg.plots) {
        fs::create_directories(out / "plots");
        for (int n = 1; n <= cfg.stages; ++n) {
            const AnalyticMap H = conjugator(std::vector<AnalyticMap>(hA.begin(), hA.begin() + n));
            plot_partition(out / "plots" / ("partition_" + std::to_string(n) + ".png"), H, cfg.s[n]);
            const int64_t len = seq.params[n].q > BigInt(4000) ? 4000 : to_i64(seq.params[n].q);
            plot_orbits(out / "plots" / ("orbit_" + std::to_string(n) + ".png"), Ts[n], len, mix(cfg.seed, 500 + n));
        }
        plot_gaps(out / "plots" / "gaps.png", gaps, thresholds);
        timings["plots"] = clock.lap();
    }

    nlohmann::json params_rows = nlohmann::json::array();
    for (const auto& sp : seq.params) params_rows.push_back(to_json(sp));
    rep.data["config"] = cfg.to_text();
    rep.data["params"] = params_rows;
    rep.data["words"] = words_json;
    rep.data["uniformity"] = uni;
    rep.data["eps_approximation"] = epsj;
    rep.data["analytic"] = stages_json;
    rep.data["l_auto"] = cfg.l_auto;
    rep.data["rho"] = cfg.rho;
    rep.data["eps0"] = cfg.eps0;
    rep.data["grid"] = cfg.grid;
    rep.data["sigma_floor"] = sigma_floor;
    for (auto& [k, v] : extra.items()) rep.data[k] = v;
    if (cfg.record_timings) rep.data["timings"] = timings;
    write_json(out / "report.json", rep.to_json());
    return rep;
}

namespace {

void verify_word_file(const fs::path& p, RunReport& rep) {
    std::ifstream is(p);
    if (!is) throw UsageError("cannot open " + p.string());
    Alphabet alpha;
    WordFamily fam;
    try {
        fam = read_word_family(is, alpha, true);
    } catch (const std::exception& e) {
        throw UsageError(p.string() + ": " + e.what());
    }
    const ReadabilityResult rr = unique_readability_check(fam.words);
    std::string det = p.filename().string() + ": " + std::to_string(fam.words.size()) + " words";
    if (rr.witness)
        det += "; words " + std::to_string(rr.witness->u) + "," + std::to_string(rr.witness->v) + " overlap word " +
               std::to_string(rr.witness->w) + " at offset " + std::to_string(rr.witness->offset);
    rep.add("readability " + p.filename().string(), rr.readable, det);
}

void verify_build_dir(const fs::path& dir, RunReport& rep) {
    const LoadedBuild b = load_build(dir);
    const int stages = static_cast<int>(b.k.size());
    const ConstructionSequence seq = build_construction_sequence(b.alphabet, b.k, b.l, b.P, b.cfg.cap);
    const std::vector<AbcStage> st = drive_from_construction_sequence(seq, b.cfg.cap);
    const std::string tag = dir.filename().string() + " ";
    for (int n = 1; n <= stages; ++n) {
        const fs::path wf = dir / "words" / ("stage_" + std::to_string(n) + ".txt");
        if (!fs::exists(wf)) continue;
        std::ifstream is(wf);
        Alphabet alpha = b.alphabet;
        WordFamily fam;
        try {
            fam = read_word_family(is, alpha, false);
        } catch (const std::exception& e) {
            throw UsageError(wf.string() + ": " + e.what());
        }
        const ReadabilityResult rr = unique_readability_check(fam.words);
        std::string det;
        if (rr.witness)
            det = "words " + std::to_string(rr.witness->u) + "," + std::to_string(rr.witness->v) + " overlap word " +
                  std::to_string(rr.witness->w) + " at offset " + std::to_string(rr.witness->offset);
        const bool claimed = readability_guaranteed(seq.params[n - 1].q, b.l[n - 1], b.P[n - 1]);
        if (!claimed && !rr.readable) det += "; not guaranteed, recorded without claim";
        rep.add(tag + "readability stage " + std::to_string(n), rr.readable || !claimed, det);
        // the file must match the tower names read off the dynamics
        std::string where;
        if (!st[n].materialized) {
            where = "names not materialized";
        } else if (fam.words.size() != st[n].tower_words.size()) {
            where = "word count " + std::to_string(fam.words.size()) + " != " + std::to_string(st[n].tower_words.size());
        } else {
            for (size_t w = 0; w < fam.words.size() && where.empty(); ++w) {
                const Word& a = fam.words[w];
                const Word& c = st[n].tower_words[w];
                for (size_t i = 0; i < std::max(a.size(), c.size()); ++i)
                    if (i >= a.size() || i >= c.size() || a[i] != c[i]) {
                        where = "word " + std::to_string(w) + " position " + std::to_string(i) + ": file has '" +
                                (i < a.size() ? alpha.name(a[i]) : std::string("<end>")) + "', tower name has '" +
                                (i < c.size() ? alpha.name(c[i]) : std::string("<end>")) + "'";
                        break;
                    }
            }
        }
        rep.add(tag + "name match stage " + std::to_string(n), where.empty(), where);
    }
    for (int n = 0; n < stages; ++n) {
        const UniformityReport ur = uniformity_check(seq, n);
        rep.add(tag + "uniformity stage " + std::to_string(n + 1), ur.strongly_uniform, "max deviation " + ur.max_deviation.str());
    }
    const RequirementsReport rq = requirements_check(seq.params, b.P);
    rep.add(tag + "requirements", rq.ok(), rq.violations.empty() ? "" : rq.violations.front());
    for (int n = 0; n < stages; ++n) {
        const BigInt atoms = seq.params[n + 1].q * BigInt(static_cast<long>(seq.params[n + 1].s));
        if (atoms > BigInt(4000000)) continue;
        const BigRatio bound(BigInt(3), BigInt(static_cast<long>(b.l[n])));
        const EpsApproxResult er = epsilon_approximation_check(stage_process(st, n), stage_process(st, n + 1), bound.to_double());
        rep.add(tag + "eps-approximation stage " + std::to_string(n) + "->" + std::to_string(n + 1), er.mass <= bound,
                "mass " + er.mass.str());
    }
    // analytic artifacts
    std::vector<AnalyticMap> hA;
    for (int n = 1; n <= stages; ++n) {
        const fs::path hp = dir / "analytic" / ("h_" + std::to_string(n) + ".json");
        if (!fs::exists(hp)) break;
        hA.push_back(load_map(hp));
        const int64_t q = to_i64(seq.params[n - 1].q);
        const double comm = commutation_residual(hA.back(), q, 2000, 7);
        rep.add(tag + "commutation h_" + std::to_string(n), comm <= 1e-12, "residual " + fmt(comm));
        const double jac = max_jacobian_defect(hA.back(), 1000, 8);
        rep.add(tag + "jacobian h_" + std::to_string(n), jac <= 1e-6, "max |det-1| " + fmt(jac));
    }
    if (static_cast<int>(hA.size()) == stages && b.report.is_object() && b.report.contains("analytic")) {
        const auto& an = b.report.at("analytic");
        const double rho = b.report.value("rho", b.cfg.rho);
        const int grid = b.report.value("grid", b.cfg.grid);
        const bool l_auto = b.report.value("l_auto", false);
        for (int n = 0; n < stages && n < static_cast<int>(an.size()); ++n) {
            const AnalyticMap Hn = conjugator(std::vector<AnalyticMap>(hA.begin(), hA.begin() + n));
            const BigRatio da = seq.params[n + 1].alpha() - seq.params[n].alpha();
            const StripNormEstimate g = rotation_change_gap(Hn, hA[n], seq.params[n].alpha(), da.to_double(), rho, grid);
            const auto& rec = an[n].at("gap");
            const bool same = rec.is_number() ? std::fabs(rec.get<double>() - g.value) <= 1e-9 * std::max(1.0, std::fabs(g.value))
                                              : g.overflow;
            rep.add(tag + "gap reproduced stage " + std::to_string(n), same, "d_rho = " + fmt(g.value));
            if (l_auto) {
                const double thr = eps_schedule(b.report.value("eps0", b.cfg.eps0), n) / 2;
                rep.add(tag + "cauchy stage " + std::to_string(n), g.value < thr, fmt(g.value) + " < " + fmt(thr));
            }
        }
    }
}

}  // namespace

RunReport cmd_verify(const std::vector<std::string>& paths) {
    if (paths.empty()) throw UsageError("verify needs at least one path");
    RunReport rep;
    rep.command = "verify";
    for (const auto& ps : paths) {
        const fs::path p(ps);
        if (fs::is_directory(p)) {
            if (!fs::exists(p / "construction.json")) throw UsageError(ps + ": not a build directory (no construction.json)");
            verify_build_dir(p, rep);
        } else if (fs::exists(p)) {
            verify_word_file(p, rep);
        } else {
            throw UsageError("no such file: " + ps);
        }
    }
    return rep;
}

RunReport cmd_compare(const std::string& dir_a, const std::string& dir_b, int grid) {
    const LoadedBuild a = load_build(dir_a), b = load_build(dir_b);
    if (a.alphabet.letters() != b.alphabet.letters()) throw UsageError("incompatible alphabets");
    RunReport rep;
    rep.command = "compare";
    const size_t na = a.k.size(), nb = b.k.size();
    // M: number of leading stages n >= 1 with identical word families
    int M = 0;
    for (size_t n = 0; n < std::min(na, nb); ++n) {
        if (a.k[n] != b.k[n] || a.l[n] != b.l[n] || a.P[n] != b.P[n]) break;
        ++M;
    }
    const double rho = a.report.is_object() ? a.report.value("rho", a.cfg.rho) : a.cfg.rho;
    const double eps0 = a.report.is_object() ? a.report.value("eps0", a.cfg.eps0) : a.cfg.eps0;
    const AnalyticMap Ta = load_map(fs::path(dir_a) / "analytic" / ("T_" + std::to_string(na) + ".json"));
    const AnalyticMap Tb = load_map(fs::path(dir_b) / "analytic" / ("T_" + std::to_string(nb) + ".json"));
    const StripNormEstimate est = strip_distance(Ta, Tb, rho, grid);
    double tri = 0;
    for (const LoadedBuild* x : {&a, &b})
        if (x->report.is_object() && x->report.contains("analytic"))
            for (size_t n = static_cast<size_t>(M); n < x->report["analytic"].size(); ++n) {
                const auto& g = x->report["analytic"][n]["gap"];
                tri += g.is_number() ? g.get<double>() : std::numeric_limits<double>::infinity();
            }
    rep.data["common_prefix"] = M;
    rep.data["d_rho"] = est.overflow ? nlohmann::json("inf") : nlohmann::json(est.value);
    rep.data["triangle_bound"] = std::isfinite(tri) ? nlohmann::json(tri) : nlohmann::json("inf");
    rep.data["rho"] = rho;
    rep.data["grid"] = grid;
    rep.data["stages"] = {na, nb};
    if (M >= 1) {
        const double thr = eps_schedule(eps0, M);
        rep.data["threshold"] = thr;
        rep.add("prefix proximity", est.value < thr,
                "common prefix M = " + std::to_string(M) + ", d_rho = " + fmt(est.value) + " < eps_M = " + fmt(thr));
    } else {
        rep.add("prefix proximity", true, "no common stage; d_rho = " + fmt(est.value) + " (not asserted)");
    }
    return rep;
}

}  // namespace abc
