#include <iostream>

#include "edu/teacher.hpp"

int main(int argc, char** argv) { return edu::teacher::run(argc, argv, std::cin, std::cout, std::cerr); }
