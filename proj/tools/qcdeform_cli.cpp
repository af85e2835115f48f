#include <qcdeform/cli.hpp>

int main(int argc, char** argv) { return qcdeform::cli::run_cli(std::vector<std::string>(argv + 1, argv + argc)); }
