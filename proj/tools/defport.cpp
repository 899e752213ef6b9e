#include "defport/cli.hpp"

int main(int argc, char** argv) { return defport::cli::run(argc, argv); }
