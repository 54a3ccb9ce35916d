#include <iostream>

#include "stratcube/app.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return stratcube::app::run_cli(args, std::cout, std::cerr);
}
