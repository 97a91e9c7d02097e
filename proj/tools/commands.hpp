#pragma once

#include <CLI11.hpp>

namespace stereofov::cli {

void add_gen_stimulus(CLI::App& app);
void add_run_sim(CLI::App& app);
void add_fit_surface(CLI::App& app);
void add_eval(CLI::App& app);
void add_budget_map(CLI::App& app);
void add_foveate(CLI::App& app);
void add_validate(CLI::App& app);
void add_serve(CLI::App& app);

}  // namespace stereofov::cli
