#include "taas/commands.hpp"

int main(int argc, char** argv) { return taas::run_cli(argc, argv); }
