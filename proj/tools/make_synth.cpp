// Generates a latent-factor dataset CSV for demos and harness runs.

#include <cstdint>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "odx/dataset.hpp"
#include "odx/synthetic.hpp"

int main(int argc, char** argv) {
    CLI::App app{"odx-synth — write a synthetic latent-factor dataset CSV"};
    long long n = 1000, d = 11, factors = 7;
    double noise = 0.05;
    std::uint64_t seed = 0;
    std::string out = "synth.csv";
    app.add_option("--rows", n, "observations");
    app.add_option("--dims", d, "dimensions");
    app.add_option("--factors", factors, "latent factors");
    app.add_option("--noise", noise, "noise sigma");
    app.add_option("--seed", seed, "seed");
    app.add_option("--out", out, "output CSV path");
    CLI11_PARSE(app, argc, argv);

    try {
        const odx::Dataset data = odx::make_latent_factor_dataset(
            n, d, factors, noise, seed);
        odx::save_csv(data, out);
        std::cout << "wrote " << out << " (" << n << " x " << d << ")\n";
    } catch (const std::exception& e) {
        std::cerr << "odx-synth: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
