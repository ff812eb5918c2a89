#pragma once

#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "nids/dataset.hpp"
#include "nids/matrix.hpp"
#include "nids/rng.hpp"

namespace nids {

enum class Activation { Relu, Identity };

struct MlpLayer {
    std::size_t in = 0;
    std::size_t out = 0;
    std::vector<double> weights;  // row-major [in][out]
    std::vector<double> biases;   // [out]
    Activation activation = Activation::Relu;
};

// Feedforward softmax classifier whose output layer can grow by whole
// classes. The final layer is identity + row softmax; hidden layers are relu
// with inverted dropout in training mode.
struct MlpModel {
    std::vector<MlpLayer> layers;
    std::vector<ClassLabel> output_classes;
    double dropout_rate = 0.2;
    std::uint64_t rng_seed = 0;

    std::size_t input_dim() const { return layers.empty() ? 0 : layers.front().in; }
    std::size_t n_classes() const { return output_classes.size(); }
    std::size_t parameter_count() const;
    void validate() const;
};

struct TrainConfig {
    double learning_rate = 0.001;
    std::size_t batch_size = 1024;
    std::size_t epochs = 50;
    double adam_beta1 = 0.9;
    double adam_beta2 = 0.999;
    double adam_eps = 1e-8;
    std::uint64_t shuffle_seed = 0;
    void validate() const;
};

struct TrainingOutcome {
    MlpModel final_model;
    std::vector<double> loss_curve;  // per-epoch mean categorical cross-entropy
    double wall_time_s = 0.0;
};

// thrown when a training run produces a non-finite loss
struct TrainingDiverged : std::runtime_error {
    using std::runtime_error::runtime_error;
};

enum class ForwardMode { Train, Infer };

MlpModel init_model(std::size_t input_dim, const std::vector<std::size_t>& hidden_widths,
                    const std::vector<ClassLabel>& classes, std::uint64_t seed,
                    double dropout_rate = 0.2);

// Row-softmax probabilities. Train mode applies inverted dropout using
// dropout_rng (falls back to a model-seeded source when null).
Matrix forward(const MlpModel& m, const Matrix& batch, ForwardMode mode,
               Rng* dropout_rng = nullptr);

// Pre-softmax activations of the output layer, infer mode.
Matrix logits(const MlpModel& m, const Matrix& batch);

// Mean over rows of -log(prob of true class), probabilities floored at 1e-12.
double loss(const Matrix& probs, const std::vector<int>& labels);

TrainingOutcome train(const MlpModel& m, const Matrix& x, const std::vector<int>& y,
                      const TrainConfig& cfg);

// (class id, probability vector); argmax ties resolve to the lowest class id
std::pair<int, std::vector<double>> predict(const MlpModel& m, std::span<const double> x);
std::vector<int> predict_batch(const MlpModel& m, const Matrix& x);

// Copies hidden layers verbatim and appends one zero-initialized output unit
// per new label, leaving old-class logits untouched.
MlpModel extend_classes(const MlpModel& m, const std::vector<ClassLabel>& new_labels);

// Max relative error between analytic and central-difference gradients over a
// random sample of parameters; dropout is disabled.
double gradient_check(const MlpModel& m, const Matrix& batch, const std::vector<int>& labels,
                      std::size_t n_probes = 120, std::uint64_t seed = 1);

std::string mlp_to_json(const MlpModel& m);
MlpModel mlp_from_json(const std::string& text);

}  // namespace nids
