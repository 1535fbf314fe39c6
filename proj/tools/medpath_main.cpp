#include "medpath/cli_io.hpp"

int main(int argc, char** argv) { return medpath::cli_dispatch(argc, argv); }
