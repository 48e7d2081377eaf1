#include "shapbench/net.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "shapbench/errors.hpp"
#include "shapbench/text_util.hpp"

namespace shapbench {

std::string activation_name(Activation a) {
    switch (a) {
        case Activation::kIdentity: return "identity";
        case Activation::kRelu: return "relu";
        case Activation::kSoftmax: return "softmax";
    }
    return "unknown";
}

Activation activation_from_name(const std::string& name) {
    if (name == "identity") return Activation::kIdentity;
    if (name == "relu") return Activation::kRelu;
    if (name == "softmax") return Activation::kSoftmax;
    throw FormatError("unknown activation '" + name + "'");
}

std::size_t DenseNet::input_dim() const {
    return layers.empty() ? 0 : layers.front().input_dim();
}

std::size_t DenseNet::output_dim() const {
    return layers.empty() ? 0 : layers.back().output_dim();
}

std::size_t DenseNet::parameter_count() const {
    std::size_t n = 0;
    for (const auto& layer : layers) n += layer.weights.size() + layer.bias.size();
    return n;
}

void DenseNet::validate() const {
    if (layers.empty()) throw ShapeError("network has no layers");
    if (dropout.size() != layers.size()) {
        throw ShapeError("dropout list length " + std::to_string(dropout.size()) +
                         " does not match layer count " + std::to_string(layers.size()));
    }
    for (std::size_t k = 0; k < layers.size(); ++k) {
        const auto& layer = layers[k];
        if (layer.bias.size() != layer.output_dim()) {
            throw ShapeError("layer " + std::to_string(k) + " bias length " +
                             std::to_string(layer.bias.size()) + " does not match output dim " +
                             std::to_string(layer.output_dim()));
        }
        if (k + 1 < layers.size() && layer.output_dim() != layers[k + 1].input_dim()) {
            throw ShapeError("layer " + std::to_string(k) + " output dim " +
                             std::to_string(layer.output_dim()) + " does not chain into layer " +
                             std::to_string(k + 1) + " input dim " +
                             std::to_string(layers[k + 1].input_dim()));
        }
        if (layer.activation == Activation::kSoftmax && k + 1 != layers.size()) {
            throw ShapeError("softmax activation only allowed on the terminal layer");
        }
        if (dropout[k] < 0.0 || dropout[k] >= 1.0) {
            throw ConfigError("dropout probability " + format_shortest(dropout[k]) +
                              " outside [0, 1) at layer " + std::to_string(k));
        }
    }
}

DenseNet make_dense_net(const std::vector<std::size_t>& dims, Activation hidden,
                        Activation terminal, double hidden_dropout, Rng& rng) {
    if (dims.size() < 2) throw ConfigError("network needs at least input and output dims");
    DenseNet net;
    for (std::size_t k = 0; k + 1 < dims.size(); ++k) {
        DenseLayer layer;
        layer.weights = Matrix(dims[k], dims[k + 1]);
        // He-uniform: U(-sqrt(6/fan_in), +sqrt(6/fan_in)), zero biases.
        const double limit = std::sqrt(6.0 / static_cast<double>(dims[k]));
        for (double& w : layer.weights.data()) w = (2.0 * rng.next_double() - 1.0) * limit;
        layer.bias.assign(dims[k + 1], 0.0);
        const bool last = (k + 2 == dims.size());
        layer.activation = last ? terminal : hidden;
        net.layers.push_back(std::move(layer));
        net.dropout.push_back(last ? 0.0 : hidden_dropout);
    }
    net.validate();
    return net;
}

std::uint64_t net_signature(const DenseNet& net) {
    std::uint64_t h = fnv1a("densenet");
    for (const auto& layer : net.layers) {
        h = fnv1a(std::to_string(layer.input_dim()) + "x" + std::to_string(layer.output_dim()) +
                      activation_name(layer.activation),
                  h);
    }
    return h;
}

namespace {

void apply_activation(Activation act, const Matrix& pre, Matrix& post) {
    post = pre;
    switch (act) {
        case Activation::kIdentity:
            break;
        case Activation::kRelu:
            for (double& v : post.data()) v = v > 0.0 ? v : 0.0;
            break;
        case Activation::kSoftmax:
            for (std::size_t i = 0; i < post.rows(); ++i) {
                auto r = post.row(i);
                double mx = r[0];
                for (double v : r) mx = std::max(mx, v);
                double sum = 0.0;
                for (double& v : r) {
                    v = std::exp(v - mx);
                    sum += v;
                }
                for (double& v : r) v /= sum;
            }
            break;
    }
}

}  // namespace

Matrix forward(const DenseNet& net, const Matrix& batch, ForwardMode mode, Rng* rng,
               ForwardCache* cache) {
    net.validate();
    if (batch.cols() != net.input_dim()) {
        throw ShapeError("input width " + std::to_string(batch.cols()) +
                         " does not match network input dim " + std::to_string(net.input_dim()));
    }
    if (mode == ForwardMode::kTrain && rng == nullptr) {
        bool needs_rng = std::any_of(net.dropout.begin(), net.dropout.end(),
                                     [](double p) { return p > 0.0; });
        if (needs_rng) throw ConfigError("training-mode forward with dropout requires an rng");
    }
    if (cache) {
        cache->layer_inputs.clear();
        cache->pre_activations.clear();
        cache->post_activations.clear();
        cache->dropout_multipliers.clear();
        cache->mode = mode;
        cache->net_signature = net_signature(net);
        cache->batch_rows = batch.rows();
    }

    Matrix current = batch;
    for (std::size_t k = 0; k < net.layers.size(); ++k) {
        const auto& layer = net.layers[k];
        if (cache) cache->layer_inputs.push_back(current);
        Matrix pre = matmul(current, layer.weights);
        add_row_vector_inplace(pre, layer.bias);
        Matrix post;
        apply_activation(layer.activation, pre, post);
        if (cache) {
            cache->pre_activations.push_back(pre);
            cache->post_activations.push_back(post);
        }
        Matrix multipliers;
        if (mode == ForwardMode::kTrain && net.dropout[k] > 0.0) {
            const double p = net.dropout[k];
            const double keep_scale = 1.0 / (1.0 - p);
            multipliers = Matrix(post.rows(), post.cols());
            for (std::size_t i = 0; i < multipliers.size(); ++i) {
                multipliers.data()[i] = rng->next_double() < p ? 0.0 : keep_scale;
            }
            for (std::size_t i = 0; i < post.size(); ++i) post.data()[i] *= multipliers.data()[i];
        }
        if (cache) cache->dropout_multipliers.push_back(std::move(multipliers));
        current = std::move(post);
    }
    return current;
}

Matrix forward_infer(const DenseNet& net, const Matrix& batch) {
    return forward(net, batch, ForwardMode::kInfer, nullptr, nullptr);
}

bool Gradients::all_finite() const {
    for (const auto& g : weight_grads)
        if (!g.all_finite()) return false;
    for (const auto& g : bias_grads)
        for (double v : g)
            if (!std::isfinite(v)) return false;
    return input_grad.all_finite();
}

Gradients backward(const DenseNet& net, const ForwardCache& cache, const Matrix& loss_grad) {
    const std::size_t n_layers = net.layers.size();
    if (cache.net_signature != net_signature(net) || cache.layer_inputs.size() != n_layers) {
        throw ShapeError("forward cache does not match this network");
    }
    if (loss_grad.rows() != cache.batch_rows || loss_grad.cols() != net.output_dim()) {
        throw ShapeError("loss gradient shape " + std::to_string(loss_grad.rows()) + "x" +
                         std::to_string(loss_grad.cols()) + " does not match outputs " +
                         std::to_string(cache.batch_rows) + "x" +
                         std::to_string(net.output_dim()));
    }

    Gradients grads;
    grads.weight_grads.resize(n_layers);
    grads.bias_grads.resize(n_layers);

    Matrix g = loss_grad;
    for (std::size_t k = n_layers; k-- > 0;) {
        const auto& layer = net.layers[k];
        const Matrix& multipliers = cache.dropout_multipliers[k];
        if (!multipliers.empty()) {
            for (std::size_t i = 0; i < g.size(); ++i) g.data()[i] *= multipliers.data()[i];
        }
        // Gradient through the activation, producing dL/d(pre-activation).
        Matrix gz(g.rows(), g.cols());
        switch (layer.activation) {
            case Activation::kIdentity:
                gz = g;
                break;
            case Activation::kRelu: {
                const Matrix& pre = cache.pre_activations[k];
                for (std::size_t i = 0; i < g.size(); ++i) {
                    gz.data()[i] = pre.data()[i] > 0.0 ? g.data()[i] : 0.0;
                }
                break;
            }
            case Activation::kSoftmax: {
                // dL/dz_i = y_i * (g_i - sum_j g_j y_j), row-wise.
                const Matrix& y = cache.post_activations[k];
                for (std::size_t i = 0; i < g.rows(); ++i) {
                    const auto yr = y.row(i);
                    const auto gr = g.row(i);
                    const double inner = dot(gr, yr);
                    auto zr = gz.row(i);
                    for (std::size_t j = 0; j < yr.size(); ++j) {
                        zr[j] = yr[j] * (gr[j] - inner);
                    }
                }
                break;
            }
        }
        grads.weight_grads[k] = matmul(transpose(cache.layer_inputs[k]), gz);
        grads.bias_grads[k] = column_sums(gz);
        g = matmul(gz, transpose(layer.weights));
    }
    grads.input_grad = std::move(g);
    return grads;
}

AdamState AdamState::zeros_like(const DenseNet& net) {
    AdamState state;
    for (const auto& layer : net.layers) {
        state.m_weights.emplace_back(layer.weights.rows(), layer.weights.cols());
        state.v_weights.emplace_back(layer.weights.rows(), layer.weights.cols());
        state.m_bias.emplace_back(layer.bias.size(), 0.0);
        state.v_bias.emplace_back(layer.bias.size(), 0.0);
    }
    return state;
}

namespace {

void adam_update(std::span<double> params, std::span<const double> grads, std::span<double> m,
                 std::span<double> v, const AdamConfig& cfg, double bc1, double bc2) {
    for (std::size_t i = 0; i < params.size(); ++i) {
        m[i] = cfg.beta1 * m[i] + (1.0 - cfg.beta1) * grads[i];
        v[i] = cfg.beta2 * v[i] + (1.0 - cfg.beta2) * grads[i] * grads[i];
        const double m_hat = m[i] / bc1;
        const double v_hat = v[i] / bc2;
        params[i] -= cfg.learning_rate * m_hat / (std::sqrt(v_hat) + cfg.epsilon);
    }
}

}  // namespace

void sgd_adam_step(DenseNet& net, const Gradients& grads, AdamState& state,
                   const AdamConfig& config) {
    if (config.learning_rate <= 0.0) throw ConfigError("learning rate must be positive");
    if (grads.weight_grads.size() != net.layers.size() ||
        state.m_weights.size() != net.layers.size()) {
        throw ShapeError("gradient/state layer count does not match network");
    }
    if (!grads.all_finite()) {
        throw TrainingDiverged("non-finite gradient encountered; training aborted");
    }
    state.step += 1;
    const double bc1 = 1.0 - std::pow(config.beta1, static_cast<double>(state.step));
    const double bc2 = 1.0 - std::pow(config.beta2, static_cast<double>(state.step));
    for (std::size_t k = 0; k < net.layers.size(); ++k) {
        auto& layer = net.layers[k];
        if (grads.weight_grads[k].rows() != layer.weights.rows() ||
            grads.weight_grads[k].cols() != layer.weights.cols()) {
            throw ShapeError("weight gradient shape mismatch at layer " + std::to_string(k));
        }
        adam_update(layer.weights.data(), grads.weight_grads[k].data(), state.m_weights[k].data(),
                    state.v_weights[k].data(), config, bc1, bc2);
        adam_update(layer.bias, grads.bias_grads[k], state.m_bias[k], state.v_bias[k], config,
                    bc1, bc2);
    }
}

namespace gradcheck_detail {

double objective(const DenseNet& net, const Matrix& input, const Matrix& coeffs) {
    const Matrix out = forward_infer(net, input);
    double j = 0.0;
    for (std::size_t i = 0; i < out.size(); ++i) j += coeffs.data()[i] * out.data()[i];
    return j;
}

Gradients analytic_gradients(const DenseNet& net, const Matrix& input, const Matrix& coeffs) {
    ForwardCache cache;
    forward(net, input, ForwardMode::kInfer, nullptr, &cache);
    return backward(net, cache, coeffs);
}

Gradients fd_gradients(const DenseNet& net, const Matrix& input, const Matrix& coeffs,
                       double epsilon) {
    Gradients grads;
    DenseNet probe = net;
    for (std::size_t k = 0; k < probe.layers.size(); ++k) {
        auto& layer = probe.layers[k];
        Matrix wg(layer.weights.rows(), layer.weights.cols());
        for (std::size_t i = 0; i < layer.weights.size(); ++i) {
            const double saved = layer.weights.data()[i];
            layer.weights.data()[i] = saved + epsilon;
            const double plus = objective(probe, input, coeffs);
            layer.weights.data()[i] = saved - epsilon;
            const double minus = objective(probe, input, coeffs);
            layer.weights.data()[i] = saved;
            wg.data()[i] = (plus - minus) / (2.0 * epsilon);
        }
        grads.weight_grads.push_back(std::move(wg));
        std::vector<double> bg(layer.bias.size(), 0.0);
        for (std::size_t i = 0; i < layer.bias.size(); ++i) {
            const double saved = layer.bias[i];
            layer.bias[i] = saved + epsilon;
            const double plus = objective(probe, input, coeffs);
            layer.bias[i] = saved - epsilon;
            const double minus = objective(probe, input, coeffs);
            layer.bias[i] = saved;
            bg[i] = (plus - minus) / (2.0 * epsilon);
        }
        grads.bias_grads.push_back(std::move(bg));
    }
    Matrix probe_input = input;
    Matrix ig(input.rows(), input.cols());
    for (std::size_t i = 0; i < probe_input.size(); ++i) {
        const double saved = probe_input.data()[i];
        probe_input.data()[i] = saved + epsilon;
        const double plus = objective(net, probe_input, coeffs);
        probe_input.data()[i] = saved - epsilon;
        const double minus = objective(net, probe_input, coeffs);
        probe_input.data()[i] = saved;
        ig.data()[i] = (plus - minus) / (2.0 * epsilon);
    }
    grads.input_grad = std::move(ig);
    return grads;
}

namespace {

// Absolute agreement below 1e-6 counts as exact; FD noise dominates there.
double rel_error(double a, double b) {
    const double scale = std::max(std::abs(a), std::abs(b));
    if (scale < 1e-6) return 0.0;
    return std::abs(a - b) / scale;
}

double max_rel_error(std::span<const double> a, std::span<const double> b) {
    double worst = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) worst = std::max(worst, rel_error(a[i], b[i]));
    return worst;
}

}  // namespace

GradCheckReport compare(const Gradients& analytic, const Gradients& fd, double tolerance) {
    GradCheckReport report;
    report.tolerance = tolerance;
    for (std::size_t k = 0; k < analytic.weight_grads.size(); ++k) {
        double layer_err = max_rel_error(analytic.weight_grads[k].data(), fd.weight_grads[k].data());
        layer_err = std::max(layer_err, max_rel_error(analytic.bias_grads[k], fd.bias_grads[k]));
        report.per_layer_max_rel_error.push_back(layer_err);
        report.max_rel_error = std::max(report.max_rel_error, layer_err);
    }
    report.input_max_rel_error =
        max_rel_error(analytic.input_grad.data(), fd.input_grad.data());
    report.max_rel_error = std::max(report.max_rel_error, report.input_max_rel_error);
    report.passed = report.max_rel_error < tolerance;
    return report;
}

}  // namespace gradcheck_detail

namespace {

// True when some ReLU pre-activation sits close enough to zero that a central
// difference would straddle the kink.
bool near_relu_kink(const DenseNet& net, const Matrix& input, double margin) {
    ForwardCache cache;
    forward(net, input, ForwardMode::kInfer, nullptr, &cache);
    for (std::size_t k = 0; k < net.layers.size(); ++k) {
        if (net.layers[k].activation != Activation::kRelu) continue;
        for (double z : cache.pre_activations[k].data()) {
            if (std::abs(z) < margin) return true;
        }
    }
    return false;
}

}  // namespace

GradCheckReport grad_check(const DenseNet& net, const Matrix& input, double tolerance, Rng& rng) {
    using namespace gradcheck_detail;
    Matrix probe = input;
    for (int attempt = 0; attempt < 64 && near_relu_kink(net, probe, 1e-4); ++attempt) {
        for (std::size_t i = 0; i < probe.size(); ++i) {
            probe.data()[i] = input.data()[i] + 1e-2 * rng.next_gaussian();
        }
    }
    Matrix coeffs(probe.rows(), net.output_dim());
    for (double& c : coeffs.data()) c = 2.0 * rng.next_double() - 1.0;
    const Gradients analytic = analytic_gradients(net, probe, coeffs);
    const Gradients fd = fd_gradients(net, probe, coeffs, 1e-5);
    return gradcheck_detail::compare(analytic, fd, tolerance);
}

}  // namespace shapbench
