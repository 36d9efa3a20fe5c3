#include <string>
#include <vector>

#include "plagdet/cli.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return plagdet::cli::run(args);
}
