#include "postval/cli.hpp"

int main(int argc, char** argv) { return postval::cli::run(argc, argv); }
