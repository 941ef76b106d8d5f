#define DOCTEST_CONFIG_IMPLEMENT
#include <doctest.h>

#include <string>

// Path of the CLI binary, handed in as the last plain argument by the
// test_cli target; empty elsewhere.
std::string g_cli_path;

int main(int argc, char** argv) {
  doctest::Context ctx;
  if (argc > 1 && argv[argc - 1][0] != '-') {
    g_cli_path = argv[argc - 1];
    --argc;
  }
  ctx.applyCommandLine(argc, argv);
  return ctx.run();
}
