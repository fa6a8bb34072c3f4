#include <cstdio>

#include "treefuse/treefuse.hpp"

int main() {
    std::puts("treefuse: CLI wiring pending");
    return 0;
}
