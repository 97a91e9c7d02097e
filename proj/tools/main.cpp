#include <exception>
#include <iostream>

#include "commands.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Stereoacuity under blur: stimuli, staircases, fitting and foveation"};
  app.require_subcommand(1);
  app.set_version_flag("--version", "stereofov 0.1.0");

  stereofov::cli::add_gen_stimulus(app);
  stereofov::cli::add_run_sim(app);
  stereofov::cli::add_fit_surface(app);
  stereofov::cli::add_eval(app);
  stereofov::cli::add_budget_map(app);
  stereofov::cli::add_foveate(app);
  stereofov::cli::add_validate(app);
  stereofov::cli::add_serve(app);

  try {
    app.parse(argc, argv);
  } catch (const CLI::Success& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
