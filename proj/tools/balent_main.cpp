#include <string>
#include <vector>

#include "balent/cli.hpp"

int main(int argc, char** argv) {
  return balent::run_cli(std::vector<std::string>(argv + 1, argv + argc));
}
