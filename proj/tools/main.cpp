#include <iostream>

#include "latticeloc/cli.hpp"

int main(int argc, char** argv)
{
    return latticeloc::run_cli(argc, argv, std::cout, std::cerr);
}
