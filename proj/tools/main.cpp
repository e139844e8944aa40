#include "cli.hpp"

int main(int argc, char** argv) { return siamese::cli::run(argc, argv); }
