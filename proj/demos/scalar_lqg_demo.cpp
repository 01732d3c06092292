#include "mfsoc/pipeline.hpp"
#include <iostream>
int main() { std::cout << "demo stub\n"; }
