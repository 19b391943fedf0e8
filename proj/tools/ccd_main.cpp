#include <cstdio>
int main() { std::puts("ccd: placeholder"); return 0; }
