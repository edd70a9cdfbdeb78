#include "ppgauth/cli.hpp"

int main(int argc, char** argv) { return ppgauth::cli::run(argc, argv); }
