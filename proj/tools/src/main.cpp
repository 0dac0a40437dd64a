#include "commands.hpp"

int main(int argc, char** argv) { return streamvae::cli::run(argc, argv); }
