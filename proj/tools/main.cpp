#include "cstrans/cli.hpp"

int main(int argc, char** argv) { return cstrans::dispatch(argc, argv); }
