#include <cstdio>

int main() {
  std::puts("satlens: not wired up yet");
  return 1;
}
