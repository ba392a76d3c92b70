#include "medrec/cli.hpp"

int main(int argc, char** argv) {
    return medrec::run_cli(argc, argv);
}
