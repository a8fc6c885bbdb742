#include "forge/pipeline/pipeline.hpp"

int main(int argc, char** argv) { return forge::pipeline::run_cli(argc, argv); }
