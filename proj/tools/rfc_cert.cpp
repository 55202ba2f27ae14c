#include "rfc/cli.hpp"

int main(int argc, char** argv) { return rfc::cli::main_entry(argc, argv); }
