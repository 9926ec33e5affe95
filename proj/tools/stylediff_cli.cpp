#include <cstdio>

int main() {
    std::puts("stylediff cli placeholder");
    return 0;
}
