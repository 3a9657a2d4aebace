// Apache License, Version 2.0, refer to LICENSE.txt
#include "nvil/cli.hpp"

int main(int argc, char** argv) { return nvil::main_cli(argc, argv); }
