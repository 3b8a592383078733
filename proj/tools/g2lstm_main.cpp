#include "g2lstm/cli.hpp"

int main(int argc, char** argv) { return g2lstm::cli::run(argc, argv); }
