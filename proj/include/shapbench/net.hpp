#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "shapbench/matrix.hpp"
#include "shapbench/rng.hpp"

namespace shapbench {

enum class Activation { kIdentity, kRelu, kSoftmax };

std::string activation_name(Activation a);
Activation activation_from_name(const std::string& name);

// One dense layer: y = x * W + b, then the activation. W is (in x out),
// row-major, so a batch maps through a single matmul.
struct DenseLayer {
    Matrix weights;
    std::vector<double> bias;
    Activation activation = Activation::kIdentity;

    std::size_t input_dim() const { return weights.rows(); }
    std::size_t output_dim() const { return weights.cols(); }
};

// Fixed feed-forward stack. dropout[k] is the drop probability applied to
// layer k's output in training mode (inverted scaling, so inference applies
// nothing). Softmax is only valid as the terminal activation.
struct DenseNet {
    std::vector<DenseLayer> layers;
    std::vector<double> dropout;

    std::size_t input_dim() const;
    std::size_t output_dim() const;
    std::size_t parameter_count() const;
    // Checks dimension chaining, softmax placement and dropout range.
    void validate() const;
};

// Builds a stack of dims[0] -> dims[1] -> ... -> dims.back() with the given
// hidden activation, He-uniform weights and zero biases.
DenseNet make_dense_net(const std::vector<std::size_t>& dims, Activation hidden,
                        Activation terminal, double hidden_dropout, Rng& rng);

enum class ForwardMode { kTrain, kInfer };

// Everything backward needs: the input of each layer after dropout of the
// previous one, pre-activations, post-activations, and dropout multipliers.
struct ForwardCache {
    std::vector<Matrix> layer_inputs;
    std::vector<Matrix> pre_activations;
    std::vector<Matrix> post_activations;
    std::vector<Matrix> dropout_multipliers;  // empty matrix when layer had none
    ForwardMode mode = ForwardMode::kInfer;
    std::uint64_t net_signature = 0;
    std::size_t batch_rows = 0;
};

std::uint64_t net_signature(const DenseNet& net);

Matrix forward(const DenseNet& net, const Matrix& batch, ForwardMode mode, Rng* rng,
               ForwardCache* cache = nullptr);
// Convenience: inference on an immutable net, no cache, no randomness.
Matrix forward_infer(const DenseNet& net, const Matrix& batch);

struct Gradients {
    std::vector<Matrix> weight_grads;
    std::vector<std::vector<double>> bias_grads;
    Matrix input_grad;

    bool all_finite() const;
};

// Reverse-mode pass. loss_grad holds dL/d(output) for the batch the cache was
// produced from; the cache must come from a forward call on the same net.
Gradients backward(const DenseNet& net, const ForwardCache& cache, const Matrix& loss_grad);

struct AdamConfig {
    double learning_rate = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
};

struct AdamState {
    std::vector<Matrix> m_weights, v_weights;
    std::vector<std::vector<double>> m_bias, v_bias;
    std::int64_t step = 0;

    static AdamState zeros_like(const DenseNet& net);
};

// One bias-corrected Adam update. Throws TrainingDiverged on non-finite
// gradients; deterministic given identical inputs and state.
void sgd_adam_step(DenseNet& net, const Gradients& grads, AdamState& state,
                   const AdamConfig& config);

struct GradCheckReport {
    std::vector<double> per_layer_max_rel_error;  // one entry per layer (weights+bias)
    double input_max_rel_error = 0.0;
    double max_rel_error = 0.0;
    bool passed = false;
    double tolerance = 0.0;
};

// Compares analytic gradients of a random linear readout of the outputs with
// central finite differences (epsilon 1e-5). Probe inputs are redrawn until no
// pre-activation sits within 1e-4 of a ReLU kink.
GradCheckReport grad_check(const DenseNet& net, const Matrix& input, double tolerance,
                           Rng& rng);

namespace gradcheck_detail {
// Scalar objective J = sum(coeffs .* forward(net, input)); shared by the
// analytic and finite-difference routes so the comparison is apples-to-apples.
double objective(const DenseNet& net, const Matrix& input, const Matrix& coeffs);
Gradients analytic_gradients(const DenseNet& net, const Matrix& input, const Matrix& coeffs);
Gradients fd_gradients(const DenseNet& net, const Matrix& input, const Matrix& coeffs,
                       double epsilon);
GradCheckReport compare(const Gradients& analytic, const Gradients& fd, double tolerance);
}  // namespace gradcheck_detail

// Value-exact JSON round-trip (17 significant digits, canonical field order).
std::string net_to_json(const DenseNet& net, int indent = 0);
DenseNet net_from_json(const std::string& json_text);

}  // namespace shapbench
