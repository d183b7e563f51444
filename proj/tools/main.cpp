#include <CLI11.hpp>
#include <iostream>

#include "ascent/config_io.hpp"

int main(int argc, char** argv) {
    CLI::App app{"Upper-stage guidance: nominal solves, closed-loop episodes, Monte Carlo campaigns"};
    app.require_subcommand(1);
    // subcommands are wired up once the solver stack lands
    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) ? 2 : 0;
    }
    return 0;
}
