#include "sparse_rl/cli.hpp"

int main(int argc, char** argv) { return sparse_rl::dispatch(argc, argv); }
