#include "set2seq/harness/cli.hpp"

int main(int argc, char** argv) { return set2seq::run_cli(argc, argv); }
