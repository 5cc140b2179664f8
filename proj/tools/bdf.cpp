#include <cstdio>

int main() {
    std::puts("bdf: subcommands pending");
    return 1;
}
