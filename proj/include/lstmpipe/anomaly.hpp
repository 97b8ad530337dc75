#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include "lstmpipe/lstm_model.hpp"

namespace lstmpipe {

struct EventWindow {
    std::vector<double> samples;  // ts values, normalized per window
    int label = 0;                // 0 background, 1 signal
};

struct ScoredEvent {
    double loss = 0.0;  // mean squared reconstruction error
    int label = 0;
};

struct GenParams {
    int ts = 8;
    double snr = 8.0;        // RMS ratio of injected chirp to its background
    double ar_alpha = 0.7;   // AR(1) coefficient of the background noise
    double chirp_f0 = 0.15;  // start frequency, cycles per sample
    double chirp_f1 = 0.45;  // end frequency, cycles per sample
};

// Synthetic benchmark data: background windows are AR(1)-filtered Gaussian
// noise; signal windows add a linearly-chirped, Hann-tapered sinusoid scaled
// to the requested SNR and a random phase. Every window is normalized to
// zero mean and unit variance. Backgrounds come first, then signals; byte
// deterministic per seed.
std::vector<EventWindow> gen_dataset(int n_background, int n_signal, std::uint64_t seed,
                                     const GenParams& params = {});

void write_dataset_csv(const std::string& path, const std::vector<EventWindow>& windows);
std::vector<EventWindow> read_dataset_csv(const std::string& path);

// Gradient blocks, same shapes as the model weights.
struct Gradients {
    std::vector<LstmWeights> layers;
    DenseHead dense;
};

// Mean squared reconstruction error over the batch (float numerics).
double batch_loss(const ModelSpec& model, const std::vector<EventWindow>& windows);

// Batch loss plus analytic gradients via backpropagation through time.
std::pair<double, Gradients> loss_and_gradients(const ModelSpec& model,
                                                const std::vector<EventWindow>& windows);

struct TrainParams {
    int epochs = 300;
    double lr = 0.3;
    double clip_norm = 1.0;  // global gradient-norm clip
    std::uint64_t seed = 42;
    int max_halvings = 30;   // backtracking limit per epoch
};

struct TrainResult {
    ModelSpec model;
    // loss_history[e] is the pre-update loss of epoch e, with one trailing
    // entry for the final model; nonincreasing by construction because a
    // step is halved until it does not increase the loss.
    std::vector<double> loss_history;
};

// Full-batch gradient descent on the reconstruction error of background
// windows. The architecture comes from `model`; weights are re-initialized
// deterministically from params.seed. Throws TrainDivergence when the loss
// becomes non-finite.
TrainResult train_autoencoder(const std::vector<EventWindow>& background, ModelSpec model,
                              const TrainParams& params = {});

// Per-event reconstruction error. Events are scored independently; with
// jobs > 1 they are scored in parallel chunks, output order fixed by index.
std::vector<ScoredEvent> score(const std::vector<EventWindow>& events, const ModelSpec& model,
                               Numerics numerics, int jobs = 1);
std::vector<ScoredEvent> score_fixed(const std::vector<EventWindow>& events,
                                     const FixedModel& model, int jobs = 1);

// Smallest threshold whose strictly-above fraction of background losses does
// not exceed target_fpr (upper empirical quantile).
double threshold_from_fpr(const std::vector<double>& background_losses, double target_fpr);

struct RocPoint {
    double threshold;
    double fpr;
    double tpr;
};

struct RocResult {
    double auc = 0.0;
    std::vector<RocPoint> curve;  // from (0,0) at the top threshold to (1,1)
};

// Threshold sweep over all distinct losses; AUC by the trapezoid rule, which
// with this sweep equals the Mann-Whitney pair statistic (ties count half).
RocResult roc_auc(const std::vector<ScoredEvent>& scored);

}  // namespace lstmpipe
