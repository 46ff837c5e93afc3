#include "latent_evo/cli.hpp"

int main(int argc, char** argv) { return latent_evo::cli_main(argc, argv); }
