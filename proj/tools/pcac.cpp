// placeholder while the library grows; the real CLI lands with the codec
#include <cstdio>

int main() {
    std::puts("pcac: not wired up yet");
    return 0;
}
