#include "noisectx_cli/cli.hpp"

int main(int argc, char** argv) {
  return noisectx::cli::run(std::vector<std::string>(argv, argv + argc));
}
