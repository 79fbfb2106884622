#include <iostream>
#include <string>
#include <vector>

#include "ifedrec/cli.hpp"

namespace {

void print_usage() {
    std::cout <<
        "Usage: ifedrec <generate|train|sweep|eval> [options]\n"
        "\n"
        "Options:\n"
        "  --config <file>      experiment config (sectioned key = value text)\n"
        "  --out <dir>          output directory (overrides config and IFEDREC_OUT)\n"
        "  --workers <n>        client-parallel worker threads (0 = auto)\n"
        "  --checkpoint <file>  checkpoint to re-evaluate (eval only)\n"
        "  --ablation no-iram   freeze the attribute network and drop alignment\n"
        "  --<key> <value>      override any train or dataset config key,\n"
        "                       e.g. --variant ncf --lambda 1.0 --rounds 0\n";
}

}  // namespace

int main(int argc, char** argv) {
    std::vector<std::string> args(argv + 1, argv + argc);
    if (args.empty() || args[0] == "--help" || args[0] == "-h") {
        print_usage();
        return args.empty() ? 1 : 0;
    }
    return ifedrec::run_cli(args);
}
