#ifndef CLAB_IO_HPP
#define CLAB_IO_HPP

#include <iosfwd>
#include <string>
#include <vector>

#include "clab/model.hpp"
#include "clab/scheme.hpp"

namespace clab {

struct InitialSpec {
    std::string kind = "bump"; // constant | bump | sine | cosine
    std::vector<double> amplitude{0.1};
    std::vector<double> values; // for kind = constant
};

struct CheckSpec {
    int n = 0; // 0 = grid dimension
    std::vector<double> box_min, box_max;
    double box = 10.0;
    int samples = 64;
};

struct GNSpec {
    std::string family = "sine";
    std::vector<double> p_list{1.0};
};

struct RunConfig {
    std::string model_name = "heat";
    std::string model_params_json; // raw parameter object for the builder
    Grid grid;
    InitialSpec initial;
    SchemeConfig scheme;
    CheckSpec check;
    GNSpec gn;
    std::string output_dir = "out";
    bool force = false; // --force: run even when the structural checks fail
};

// Strict parse: unknown keys anywhere are rejected.
RunConfig parse_config_file(const std::string& path);
RunConfig parse_config_text(const std::string& text);

ModelSpec build_model(const RunConfig& cfg);
GridFunction build_initial(const InitialSpec& spec, const Grid& g, int m);

std::vector<std::pair<std::string, GridFunction>> test_function_family(const std::string& name,
                                                                       const Grid& g);

// Honors COUPLED_LAB_THREADS when built with OpenMP; no-op otherwise.
void apply_thread_cap_env();

int cmd_check(const RunConfig& cfg, std::ostream& log);
int cmd_run(const RunConfig& cfg, std::ostream& log);
int cmd_gn(const RunConfig& cfg, std::ostream& log);

} // namespace clab

#endif
