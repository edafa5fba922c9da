#include <qbm_forge/cli.hpp>

int main(int argc, char** argv) { return qbm_forge::cli::run(argc, argv); }
