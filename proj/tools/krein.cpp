#include <krein/cli.hpp>

int main(int argc, char** argv) { return krein::cli::dispatch(argc, argv); }
