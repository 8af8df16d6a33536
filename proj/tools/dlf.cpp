#include "dlf/app/commands.hpp"

int main(int argc, char** argv) { return dlf::app::cli_main(argc, argv); }
