#include "offcpu/cli/app.hpp"

int main(int argc, char** argv) { return offcpu::cli::run(argc, argv); }
