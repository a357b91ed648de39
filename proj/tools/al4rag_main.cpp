#include "al4rag/cli.hpp"

int main(int argc, char** argv) { return al4rag::cli::run(argc, argv); }
