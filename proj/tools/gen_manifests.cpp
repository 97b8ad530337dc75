// Regenerates the checked-in model manifests:
//   small.json    trained two-layer autoencoder (usable with infer/bench)
//   nominal.json  four-layer architecture with deterministic initial weights
//                 (performance modeling and simulation inputs)
//   sample_window.csv  one background window for the infer subcommand
// Everything is seeded, so reruns reproduce the files byte for byte.

#include <filesystem>
#include <iostream>

#include "CLI11.hpp"
#include "lstmpipe/anomaly.hpp"
#include "lstmpipe/manifest.hpp"
#include "lstmpipe/reference_models.hpp"

using namespace lstmpipe;

int main(int argc, char** argv) {
    CLI::App app{"regenerate the reference model manifests"};
    std::string out_dir = "manifests";
    int windows = 2000;
    TrainParams params;
    std::uint64_t data_seed = 1;
    app.add_option("--out-dir", out_dir, "destination directory");
    app.add_option("--windows", windows, "training background windows");
    app.add_option("--epochs", params.epochs, "training epochs");
    app.add_option("--data-seed", data_seed, "seed of the training data");
    app.add_option("--init-seed", params.seed, "seed of the weight initialization");
    CLI11_PARSE(app, argc, argv);

    std::filesystem::path dir(out_dir);
    std::filesystem::create_directories(dir);

    ModelSpec small = small_autoencoder();
    auto background = gen_dataset(windows, 0, data_seed);
    std::cout << "training '" << small.name << "' on " << background.size() << " windows, "
              << params.epochs << " epochs..." << std::endl;
    TrainResult trained = train_autoencoder(background, small, params);
    std::cout << "loss " << trained.loss_history.front() << " -> "
              << trained.loss_history.back() << "\n";
    save_manifest((dir / "small.json").string(), trained.model);

    ModelSpec nominal = nominal_autoencoder(params.seed);
    save_manifest((dir / "nominal.json").string(), nominal);

    auto sample = gen_dataset(1, 0, 7, GenParams{small.ts, 8.0, 0.7, 0.15, 0.45});
    std::vector<Vec> rows;
    for (double v : sample.front().samples) rows.push_back(Vec{v});
    write_sequence_csv((dir / "sample_window.csv").string(), rows);

    std::cout << "wrote " << (dir / "small.json").string() << ", "
              << (dir / "nominal.json").string() << ", "
              << (dir / "sample_window.csv").string() << "\n";
    return 0;
}
