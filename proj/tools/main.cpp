#include <iostream>

#include "gcnkit/cli/dispatch.hpp"

int main(int argc, char** argv) { return gcnkit::cli::dispatch(argc, argv, std::cout, std::cerr); }
