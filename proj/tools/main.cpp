#include "nlts/cli.hpp"

int main(int argc, char** argv) { return nlts::cli::run(argc, argv); }
