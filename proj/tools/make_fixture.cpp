// Regenerates the bundled synthetic paired dataset.
#include <iostream>

#include <CLI11.hpp>

#include "duodet/synthetic.hpp"

int main(int argc, char** argv)
{
    CLI::App app{"write the synthetic RGB/TIR toy dataset"};
    std::string out = "data/toy_paired";
    int count = 8;
    int size = 128;
    std::uint64_t seed = 7;
    app.add_option("--out", out);
    app.add_option("--count", count);
    app.add_option("--size", size);
    app.add_option("--seed", seed);
    CLI11_PARSE(app, argc, argv);
    duodet::write_toy_paired(out, count, seed, size);
    std::cout << "wrote " << count << " pairs to " << out << '\n';
    return 0;
}
