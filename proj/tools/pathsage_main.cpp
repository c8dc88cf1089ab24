// SPDX-License-Identifier: Apache-2.0
#include <iostream>

#include "pathsage/cli.hpp"

int main(int argc, char** argv) { return pathsage::run_cli(argc, argv, std::cout, std::cerr); }
