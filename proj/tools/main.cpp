#include "hullgan/cli.hpp"

int main(int argc, char** argv)
{
    return hullgan::cli_main(argc, argv);
}
