#include "hsl_cli.hpp"

int main(int argc, char** argv) { return hsl::cli::run(argc, argv); }
