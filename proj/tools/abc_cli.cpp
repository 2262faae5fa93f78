// Command-line front end; talks to the library only through the C API.
#include <CLI11.hpp>

#include <cstdio>
#include <string>
#include <vector>

#include "abc/abc_c.h"

namespace {

int exit_for(abc_status st) {
    std::fprintf(stderr, "error: %s\n", abc_last_error());
    return st == ABC_ERR_USAGE || st == ABC_ERR_INVALID ? 2 : 1;
}

int finish(abc_report* rep, bool json) {
    char* text = nullptr;
    const abc_status st = json ? abc_report_json(rep, &text) : abc_report_summary(rep, &text);
    if (st != ABC_OK) {
        abc_report_free(rep);
        return exit_for(st);
    }
    std::fputs(text, stdout);
    if (json) std::fputc('\n', stdout);
    abc_string_free(text);
    const int code = abc_report_passed(rep) ? 0 : 1;
    abc_report_free(rep);
    return code;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"AbC construction toolkit: circular words, block slides and analytic approximants"};
    app.require_subcommand(1);
    bool json = false;
    app.add_flag("--json", json, "print the full report as JSON");

    auto* build = app.add_subcommand("build", "construct all stages and write artifacts");
    std::string config_path, out_dir, l_opt, rho_opt, seed_opt;
    int stages = 0;
    std::vector<std::string> sets;
    build->add_option("--config", config_path, "key = value configuration file")->check(CLI::ExistingFile);
    build->add_option("--out", out_dir, "output directory")->required();
    build->add_option("--stages", stages, "number of stages");
    build->add_option("--rho", rho_opt, "strip half-width");
    build->add_option("--l", l_opt, "l schedule, or auto");
    build->add_option("--seed", seed_opt, "prescription seed");
    build->add_option("--set", sets, "extra key=value override (repeatable)");

    auto* verify = app.add_subcommand("verify", "re-check a build directory or word files");
    std::vector<std::string> paths;
    verify->add_option("paths", paths, "build directories or word files")->required();

    auto* compare = app.add_subcommand("compare", "estimate d_rho between the final maps of two builds");
    std::string dir_a, dir_b;
    int grid = 16;
    compare->add_option("dir_a", dir_a)->required();
    compare->add_option("dir_b", dir_b)->required();
    compare->add_option("--grid", grid, "strip sampling density");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : 2;
    }

    abc_report* rep = nullptr;
    abc_status st = ABC_OK;
    if (*build) {
        abc_config* cfg = nullptr;
        st = config_path.empty() ? abc_config_new(&cfg) : abc_config_load(config_path.c_str(), &cfg);
        if (st != ABC_OK) return exit_for(st);
        auto set = [&](const char* k, const std::string& v) {
            if (st == ABC_OK && !v.empty()) st = abc_config_set(cfg, k, v.c_str());
        };
        if (stages > 0) set("stages", std::to_string(stages));
        set("rho", rho_opt);
        set("l", l_opt);
        set("seed", seed_opt);
        for (const auto& kv : sets) {
            const auto eq = kv.find('=');
            if (eq == std::string::npos) {
                std::fprintf(stderr, "error: --set expects key=value, got '%s'\n", kv.c_str());
                abc_config_free(cfg);
                return 2;
            }
            set(kv.substr(0, eq).c_str(), kv.substr(eq + 1));
        }
        set("output_dir", out_dir);
        if (st == ABC_OK) st = abc_build(cfg, &rep);
        abc_config_free(cfg);
    } else if (*verify) {
        std::vector<const char*> ps;
        for (const auto& p : paths) ps.push_back(p.c_str());
        st = abc_verify(ps.data(), ps.size(), &rep);
    } else if (*compare) {
        st = abc_compare(dir_a.c_str(), dir_b.c_str(), grid, &rep);
    }
    if (st != ABC_OK) return exit_for(st);
    return finish(rep, json);
}
