#include "tugscore/cli.hpp"

int main(int argc, char** argv) { return tugscore::cli::run(argc, argv); }
