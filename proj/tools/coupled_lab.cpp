#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "clab/error.hpp"
#include "clab/io.hpp"

// Exit codes: 0 success, 1 condition-fail, 2 config error, 3 solver failure,
// 4 blow-up flag.
int main(int argc, char** argv) {
    CLI::App app{"coupled-lab: linearized iteration scheme and inequality lab"};
    app.require_subcommand(1);

    std::string config_path, out_dir;
    bool force = false;

    auto add_common = [&](CLI::App* sub) {
        sub->add_option("--config", config_path, "JSON run configuration")->required();
        sub->add_option("--out", out_dir, "output directory (overrides config)");
    };
    CLI::App* check = app.add_subcommand("check", "evaluate the structural conditions");
    add_common(check);
    CLI::App* run = app.add_subcommand("run", "run the linearized iteration scheme");
    add_common(run);
    run->add_flag("--force", force, "run even when the structural checks fail");
    CLI::App* gn = app.add_subcommand("gn", "tabulate Gagliardo-Nirenberg terms");
    add_common(gn);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        clab::RunConfig cfg = clab::parse_config_file(config_path);
        if (!out_dir.empty()) cfg.output_dir = out_dir;
        cfg.force = force;
        if (check->parsed()) return clab::cmd_check(cfg, std::cout);
        if (run->parsed()) return clab::cmd_run(cfg, std::cout);
        if (gn->parsed()) return clab::cmd_gn(cfg, std::cout);
    } catch (const clab::Error& e) {
        std::cerr << e.what() << "\n";
        if (e.code() == "config" || e.code() == "unknown-model" || e.code() == "bad-config" ||
            e.code() == "bad-grid")
            return 2;
        if (e.code() == "solver-failed") return 3;
        if (e.code() == "blow-up-suspected") return 4;
        return 2;
    } catch (const std::exception& e) {
        std::cerr << e.what() << "\n";
        return 2;
    }
    return 2;
}
