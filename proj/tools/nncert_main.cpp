// SPDX-License-Identifier: Apache-2.0

#include <iostream>

#include "nncert/cli/app.hpp"

int main(int argc, char** argv) { return nncert::run_cli(argc, argv, std::cout, std::cerr); }
