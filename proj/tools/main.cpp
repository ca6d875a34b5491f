#include "commands.hpp"

int main(int argc, char** argv) { return mmsb::cli::run(argc, argv); }
