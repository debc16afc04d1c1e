#include <iostream>
#include <string>
#include <vector>

#include "binutil/cli_report.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return binutil::run_cli(args, std::cout, std::cerr);
}
