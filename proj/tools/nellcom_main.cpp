#include <string>
#include <vector>

#include "nellcom/harness.hpp"

int main(int argc, char** argv) {
  return nellcom::cli_run(std::vector<std::string>(argv + 1, argv + argc));
}
