#include "malfox_cli.hpp"

#include <iostream>

int main(int argc, char** argv)
{
    return malfox::cli::run_cli(argc, argv, std::cout, std::cerr);
}
