#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "abc/abc.hpp"
#include "abc/analytic.hpp"
#include "abc/symbolic.hpp"

namespace abc {

// Bad configuration or unreadable input (maps to exit code 2).
struct UsageError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct RunConfig {
    int stages = 1;
    std::vector<int64_t> k;
    std::vector<int64_t> l;
    bool l_auto = false;
    std::vector<int64_t> s;                 // s_0..s_stages, s_0 = sigma_size
    int64_t sigma_size = 2;
    double rho = 0.1;
    double eps0 = 1.0;
    uint64_t seed = 1;
    std::string output_dir;
    size_t samples = 20000;                 // Monte Carlo samples per estimate
    int grid = 16;                          // strip grid density
    int64_t l_budget = int64_t(1) << 40;
    double strip_budget = 1e6;
    double approx_eps = 0.05;
    int64_t cap = 2000000;                  // longest materialized word
    bool record_timings = false;
    bool plots = true;
    // prescriptions[n] = P_{n+1}; generated from the seed when absent
    std::map<int, std::vector<std::vector<int>>> prescriptions;

    void set(const std::string& key, const std::string& value);
    void validate() const;
    std::string to_text() const;
    // smoothing floor in x units from the strip budget
    double sigma_floor() const;
};

RunConfig parse_config(const std::string& text);
RunConfig load_config(const std::string& path);

std::vector<std::vector<int>> generate_prescriptions(int64_t s_n, int64_t k_n, int64_t s_next, uint64_t seed);

struct Verdict {
    std::string name;
    bool pass = true;
    std::string detail;
};

struct RunReport {
    std::string command;
    std::vector<Verdict> verdicts;
    nlohmann::json data = nlohmann::json::object();
    bool passed() const;
    void add(const std::string& name, bool pass, const std::string& detail = "");
    nlohmann::json to_json() const;
    std::string summary() const;
};

// Fraction of orbit positions where the Q-name of T_n^(a) matches the tower word (stage n >= 1).
double name_agreement(const AnalyticMap& T, const std::vector<AbcStage>& st, int n, size_t starts, uint64_t seed);

RunReport cmd_build(const RunConfig& cfg);
RunReport cmd_verify(const std::vector<std::string>& paths);
RunReport cmd_compare(const std::string& dir_a, const std::string& dir_b, int grid = 16);

// Write an 8-bit RGB PNG; rgb has 3*w*h bytes, rows top to bottom.
void write_png(const std::string& path, int w, int h, const std::vector<uint8_t>& rgb);

}  // namespace abc
