#include "cmnrec/cli.hpp"

int main(int argc, char** argv) { return cmnrec::run_cli(argc, argv); }
