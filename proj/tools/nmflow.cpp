#include "nmflow/app.hpp"

#include <iostream>

int main(int argc, char** argv) { return nmflow::app::run_cli(argc, argv, std::cout, std::cerr); }
