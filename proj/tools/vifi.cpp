#include "vifi/app.hpp"

#include <iostream>

int main(int argc, char** argv) { return vifi::run_cli(argc, argv, std::cout, std::cerr); }
