#include "abc/abc_c.h"

#include <algorithm>
#include <cstdlib>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <string>

#include "abc/run.hpp"

struct abc_schedule {
    abc::ParamSchedule s;
};
struct abc_config {
    abc::RunConfig c;
};
struct abc_report {
    abc::RunReport r;
};
struct abc_map {
    abc::AnalyticMap m;
};

namespace {

thread_local std::string g_error;

char* dup(const std::string& s) {
    char* p = static_cast<char*>(std::malloc(s.size() + 1));
    if (p) std::memcpy(p, s.c_str(), s.size() + 1);
    return p;
}

abc_status fail(abc_status st, const std::string& msg) {
    g_error = msg;
    return st;
}

template <class F>
abc_status guard(F&& f) {
    try {
        g_error.clear();
        f();
        return ABC_OK;
    } catch (const abc::UsageError& e) {
        return fail(ABC_ERR_USAGE, e.what());
    } catch (const std::range_error& e) {
        return fail(ABC_ERR_RANGE, e.what());
    } catch (const std::overflow_error& e) {
        return fail(ABC_ERR_RANGE, e.what());
    } catch (const std::invalid_argument& e) {
        return fail(ABC_ERR_INVALID, e.what());
    } catch (const std::filesystem::filesystem_error& e) {
        return fail(ABC_ERR_IO, e.what());
    } catch (const std::exception& e) {
        return fail(ABC_ERR_RUNTIME, e.what());
    } catch (...) {
        return fail(ABC_ERR_RUNTIME, "unknown error");
    }
}

#define ABC_REQUIRE(p) \
    if (!(p)) return fail(ABC_ERR_INVALID, "null argument: " #p)

std::vector<abc::Word> words_of(const char* const* words, size_t count, abc::Alphabet& alpha) {
    // letters are registered in order of first appearance
    std::vector<std::string> letters;
    std::vector<std::vector<std::string>> toks(count);
    for (size_t i = 0; i < count; ++i) {
        const std::string w = words[i] ? words[i] : "";
        if (w.find_first_of(" \t") != std::string::npos) {
            std::string t;
            for (char c : w + " ") {
                if (c == ' ' || c == '\t') {
                    if (!t.empty()) toks[i].push_back(t);
                    t.clear();
                } else {
                    t += c;
                }
            }
        } else {
            for (char c : w) toks[i].push_back(std::string(1, c));
        }
        for (const auto& t : toks[i]) {
            if (t == "b" || t == "e" || t == "*" || t == "∗") continue;   // boundary and filler symbols
            if (std::find(letters.begin(), letters.end(), t) == letters.end()) letters.push_back(t);
        }
    }
    alpha = abc::Alphabet(letters);
    std::vector<abc::Word> out;
    for (const auto& ts : toks) {
        abc::Word w;
        for (const auto& t : ts) w.push_back(alpha.parse(t));
        out.push_back(std::move(w));
    }
    return out;
}

}  // namespace

extern "C" {

const char* abc_last_error(void) { return g_error.c_str(); }
const char* abc_version(void) { return "1.0.0"; }
void abc_string_free(char* s) { std::free(s); }

abc_status abc_schedule_new(int64_t s0, abc_schedule** out) {
    ABC_REQUIRE(out);
    return guard([&] {
        if (s0 < 1) throw std::invalid_argument("s0 must be >= 1");
        *out = new abc_schedule{abc::ParamSchedule(s0)};
    });
}

abc_status abc_schedule_extend(abc_schedule* sch, int64_t k, int64_t l, int64_t s_next) {
    ABC_REQUIRE(sch);
    return guard([&] { sch->s.extend(k, l, s_next); });
}

size_t abc_schedule_size(const abc_schedule* sch) { return sch ? sch->s.size() : 0; }

abc_status abc_schedule_stage_json(const abc_schedule* sch, size_t n, char** out) {
    ABC_REQUIRE(sch);
    ABC_REQUIRE(out);
    return guard([&] {
        if (n >= sch->s.size()) throw std::invalid_argument("stage index out of range");
        *out = dup(abc::to_json(sch->s.stages()[n]).dump());
    });
}

void abc_schedule_free(abc_schedule* sch) { delete sch; }

abc_status abc_circular_op(const char* const* words, size_t count, int64_t p, int64_t q, int64_t l, char** out) {
    ABC_REQUIRE(words);
    ABC_REQUIRE(out);
    return guard([&] {
        abc::Alphabet alpha;
        const auto ws = words_of(words, count, alpha);
        const abc::Word c = abc::circular_op(ws, p, q, l);
        bool multi = false;
        for (const auto& s : alpha.letters()) multi = multi || s.size() > 1;
        *out = dup(alpha.render(c, multi ? " " : ""));
    });
}

abc_status abc_unique_readability(const char* const* words, size_t count, int* readable, char** witness_json) {
    ABC_REQUIRE(words);
    ABC_REQUIRE(readable);
    return guard([&] {
        abc::Alphabet alpha;
        const auto r = abc::unique_readability_check(words_of(words, count, alpha));
        *readable = r.readable ? 1 : 0;
        if (witness_json) {
            nlohmann::json j = nullptr;
            if (r.witness) j = {{"u", r.witness->u}, {"v", r.witness->v}, {"w", r.witness->w}, {"offset", r.witness->offset}};
            *witness_json = dup(j.dump());
        }
    });
}

abc_status abc_config_new(abc_config** out) {
    ABC_REQUIRE(out);
    return guard([&] { *out = new abc_config{}; });
}

abc_status abc_config_load(const char* path, abc_config** out) {
    ABC_REQUIRE(path);
    ABC_REQUIRE(out);
    return guard([&] { *out = new abc_config{abc::load_config(path)}; });
}

abc_status abc_config_parse(const char* text, abc_config** out) {
    ABC_REQUIRE(text);
    ABC_REQUIRE(out);
    return guard([&] { *out = new abc_config{abc::parse_config(text)}; });
}

abc_status abc_config_set(abc_config* cfg, const char* key, const char* value) {
    ABC_REQUIRE(cfg);
    ABC_REQUIRE(key);
    ABC_REQUIRE(value);
    return guard([&] { cfg->c.set(key, value); });
}

abc_status abc_config_text(const abc_config* cfg, char** out) {
    ABC_REQUIRE(cfg);
    ABC_REQUIRE(out);
    return guard([&] { *out = dup(cfg->c.to_text()); });
}

void abc_config_free(abc_config* cfg) { delete cfg; }

abc_status abc_build(const abc_config* cfg, abc_report** out) {
    ABC_REQUIRE(cfg);
    ABC_REQUIRE(out);
    return guard([&] { *out = new abc_report{abc::cmd_build(cfg->c)}; });
}

abc_status abc_verify(const char* const* paths, size_t count, abc_report** out) {
    ABC_REQUIRE(paths);
    ABC_REQUIRE(out);
    return guard([&] {
        std::vector<std::string> ps;
        for (size_t i = 0; i < count; ++i) ps.emplace_back(paths[i] ? paths[i] : "");
        *out = new abc_report{abc::cmd_verify(ps)};
    });
}

abc_status abc_compare(const char* dir_a, const char* dir_b, int grid, abc_report** out) {
    ABC_REQUIRE(dir_a);
    ABC_REQUIRE(dir_b);
    ABC_REQUIRE(out);
    return guard([&] { *out = new abc_report{abc::cmd_compare(dir_a, dir_b, grid)}; });
}

int abc_report_passed(const abc_report* rep) { return rep && rep->r.passed() ? 1 : 0; }

abc_status abc_report_json(const abc_report* rep, char** out) {
    ABC_REQUIRE(rep);
    ABC_REQUIRE(out);
    return guard([&] { *out = dup(rep->r.to_json().dump(1)); });
}

abc_status abc_report_summary(const abc_report* rep, char** out) {
    ABC_REQUIRE(rep);
    ABC_REQUIRE(out);
    return guard([&] { *out = dup(rep->r.summary()); });
}

void abc_report_free(abc_report* rep) { delete rep; }

abc_status abc_map_load(const char* path, abc_map** out) {
    ABC_REQUIRE(path);
    ABC_REQUIRE(out);
    return guard([&] {
        std::ifstream is(path);
        if (!is) throw abc::UsageError(std::string("cannot open ") + path);
        nlohmann::json j;
        try {
            j = nlohmann::json::parse(is);
        } catch (const nlohmann::json::exception& e) {
            throw abc::UsageError(std::string(path) + ": " + e.what());
        }
        *out = new abc_map{abc::analytic_map_from_json(j)};
    });
}

abc_status abc_map_rotation(const char* alpha, abc_map** out) {
    ABC_REQUIRE(alpha);
    ABC_REQUIRE(out);
    return guard([&] { *out = new abc_map{abc::AnalyticMap::rotation(abc::BigRatio::parse(alpha))}; });
}

abc_status abc_map_apply(const abc_map* m, double xy[2]) {
    ABC_REQUIRE(m);
    ABC_REQUIRE(xy);
    return guard([&] {
        const abc::Vec2 y = m->m.apply(abc::Vec2{xy[0], xy[1]});
        xy[0] = y[0];
        xy[1] = y[1];
    });
}

abc_status abc_map_inverse(const abc_map* m, abc_map** out) {
    ABC_REQUIRE(m);
    ABC_REQUIRE(out);
    return guard([&] { *out = new abc_map{m->m.inverse()}; });
}

abc_status abc_map_strip_distance(const abc_map* f, const abc_map* g, double rho, int grid, double* value) {
    ABC_REQUIRE(f);
    ABC_REQUIRE(g);
    ABC_REQUIRE(value);
    return guard([&] { *value = abc::strip_distance(f->m, g->m, rho, grid).value; });
}

void abc_map_free(abc_map* m) { delete m; }

}  // extern "C"
