#include <cstdio>

int main(int argc, char** argv) {
  (void)argc;
  (void)argv;
  std::puts("norad: subcommands not wired yet");
  return 0;
}
