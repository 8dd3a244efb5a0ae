#include "colloq/cli.hpp"

int main(int argc, char** argv) { return colloq::run_cli(argc, argv); }
