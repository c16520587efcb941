#include "nsift/cli.hpp"

int main(int argc, char** argv) { return nsift::run(argc, argv); }
