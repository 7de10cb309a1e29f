#include "cli.hpp"

int main(int argc, char** argv) { return fcco::cli::main_entry(argc, argv); }
