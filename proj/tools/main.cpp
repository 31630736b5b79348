#include "bioalert/cli.hpp"

int main(int argc, char** argv) { return bioalert::cli::run(argc, argv); }
