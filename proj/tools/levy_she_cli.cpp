#include "levy_she/runner/experiments.hpp"

int main(int argc, char** argv) { return levy_she::runner::cli_main(argc, argv); }
