#include "kdsynth/cli.hpp"

int main(int argc, char** argv) { return kdsynth::cli::run(argc, argv); }
