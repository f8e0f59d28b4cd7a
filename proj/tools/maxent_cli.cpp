#include "maxent/cli.hpp"

int main(int argc, char** argv) { return maxent::cli::main(argc, argv); }
