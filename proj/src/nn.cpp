#include "ulab/nn.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "ulab/kernels.hpp"
#include "ulab/rng.hpp"

namespace ulab::nn {

namespace {

void check_finite(const Matrix& m, const char* what, std::size_t layer) {
    for (double v : m.flat()) {
        if (!std::isfinite(v)) {
            throw NumericError(std::string("non-finite ") + what + " at layer " + std::to_string(layer));
        }
    }
}

void apply_activation(Activation act, const Matrix& pre, Matrix& post) {
    if (act == Activation::relu) {
        kernels::relu(pre.flat(), post.flat());
    } else {
        const auto src = pre.flat();
        auto dst = post.flat();
        for (std::size_t i = 0; i < src.size(); ++i) {
            dst[i] = std::tanh(src[i]);
        }
    }
}

}  // namespace

Activation activation_from_string(const std::string& name) {
    if (name == "relu") {
        return Activation::relu;
    }
    if (name == "tanh") {
        return Activation::tanh;
    }
    throw ConfigError("unknown activation '" + name + "' (expected relu or tanh)");
}

const char* activation_to_string(Activation act) {
    return act == Activation::relu ? "relu" : "tanh";
}

MlpModel init_params(const std::vector<int>& layer_dims, Activation activation, std::uint64_t seed) {
    if (layer_dims.size() < 2) {
        throw ConfigError("layer_dims needs at least input and output entries");
    }
    for (int d : layer_dims) {
        if (d < 1) {
            throw ConfigError("layer_dims entries must be positive");
        }
    }
    if (layer_dims.back() < 2) {
        throw ConfigError("output layer needs at least 2 classes");
    }

    MlpModel model;
    model.layer_dims = layer_dims;
    model.activation = activation;
    Rng rng(seed);
    for (std::size_t l = 0; l + 1 < layer_dims.size(); ++l) {
        const int fan_in = layer_dims[l];
        const int fan_out = layer_dims[l + 1];
        const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
        Matrix w(static_cast<std::size_t>(fan_out), static_cast<std::size_t>(fan_in));
        for (double& v : w.flat()) {
            v = rng.next_uniform(-bound, bound);
        }
        model.weights.push_back(std::move(w));
        model.biases.emplace_back(static_cast<std::size_t>(fan_out), 0.0);
    }
    return model;
}

Gradient zero_gradient(const MlpModel& model) {
    Gradient g;
    for (std::size_t l = 0; l < model.num_layers(); ++l) {
        g.dw.emplace_back(model.weights[l].rows(), model.weights[l].cols());
        g.db.emplace_back(model.biases[l].size(), 0.0);
    }
    return g;
}

void accumulate(Gradient& into, const Gradient& g, double scale) {
    for (std::size_t l = 0; l < into.dw.size(); ++l) {
        kernels::axpy(scale, g.dw[l].flat(), into.dw[l].flat());
        kernels::axpy(scale, std::span<const double>(g.db[l]), std::span<double>(into.db[l]));
    }
}

std::size_t param_count(const MlpModel& model) {
    std::size_t n = 0;
    for (std::size_t l = 0; l < model.num_layers(); ++l) {
        n += model.weights[l].size() + model.biases[l].size();
    }
    return n;
}

std::vector<double> flatten_params(const MlpModel& model) {
    std::vector<double> flat;
    flat.reserve(param_count(model));
    for (std::size_t l = 0; l < model.num_layers(); ++l) {
        const auto w = model.weights[l].flat();
        flat.insert(flat.end(), w.begin(), w.end());
        flat.insert(flat.end(), model.biases[l].begin(), model.biases[l].end());
    }
    return flat;
}

void set_params(MlpModel& model, std::span<const double> flat) {
    std::size_t pos = 0;
    for (std::size_t l = 0; l < model.num_layers(); ++l) {
        auto w = model.weights[l].flat();
        std::copy_n(flat.begin() + pos, w.size(), w.begin());
        pos += w.size();
        std::copy_n(flat.begin() + pos, model.biases[l].size(), model.biases[l].begin());
        pos += model.biases[l].size();
    }
}

std::vector<double> flatten_gradient(const Gradient& g) {
    std::vector<double> flat;
    for (std::size_t l = 0; l < g.dw.size(); ++l) {
        const auto w = g.dw[l].flat();
        flat.insert(flat.end(), w.begin(), w.end());
        flat.insert(flat.end(), g.db[l].begin(), g.db[l].end());
    }
    return flat;
}

double global_norm(const Gradient& g) {
    double acc = 0.0;
    for (std::size_t l = 0; l < g.dw.size(); ++l) {
        acc += kernels::sumsq(g.dw[l].flat());
        acc += kernels::sumsq(std::span<const double>(g.db[l]));
    }
    return std::sqrt(acc);
}

Matrix forward_cached(const MlpModel& model, const Matrix& inputs, ForwardCache& cache) {
    if (inputs.cols() != static_cast<std::size_t>(model.input_dim())) {
        throw ShapeError("forward: input has " + std::to_string(inputs.cols()) + " columns, model expects " +
                         std::to_string(model.input_dim()));
    }
    cache.pre_activations.clear();
    cache.activations.clear();

    const Matrix* current = &inputs;
    const std::size_t num_layers = model.num_layers();
    Matrix logits;
    for (std::size_t l = 0; l < num_layers; ++l) {
        const Matrix& w = model.weights[l];
        const auto& b = model.biases[l];
        Matrix pre(current->rows(), w.rows());
        for (std::size_t i = 0; i < current->rows(); ++i) {
            const auto x = current->row(i);
            auto out = pre.row(i);
            for (std::size_t j = 0; j < w.rows(); ++j) {
                out[j] = kernels::dot(w.row(j), x) + b[j];
            }
        }
        check_finite(pre, "pre-activation", l);
        if (l + 1 == num_layers) {
            logits = std::move(pre);
        } else {
            Matrix post(pre.rows(), pre.cols());
            apply_activation(model.activation, pre, post);
            cache.pre_activations.push_back(std::move(pre));
            cache.activations.push_back(std::move(post));
            current = &cache.activations.back();
        }
    }
    return logits;
}

Matrix forward_logits(const MlpModel& model, const Matrix& inputs) {
    ForwardCache cache;
    return forward_cached(model, inputs, cache);
}

Matrix softmax_rows(const Matrix& logits) {
    Matrix probs(logits.rows(), logits.cols());
    for (std::size_t i = 0; i < logits.rows(); ++i) {
        const auto z = logits.row(i);
        auto p = probs.row(i);
        double zmax = z[0];
        for (double v : z) {
            zmax = std::max(zmax, v);
        }
        double sum = 0.0;
        for (std::size_t j = 0; j < z.size(); ++j) {
            p[j] = std::exp(z[j] - zmax);
            sum += p[j];
        }
        const double inv = 1.0 / sum;
        for (double& v : p) {
            v *= inv;
        }
    }
    return probs;
}

ForwardResult forward(const MlpModel& model, const Matrix& inputs) {
    ForwardResult out;
    out.logits = forward_logits(model, inputs);
    out.probs = softmax_rows(out.logits);
    return out;
}

int predict_class(const MlpModel& model, std::span<const double> x) {
    Matrix one(1, x.size());
    std::copy(x.begin(), x.end(), one.row(0).begin());
    const Matrix logits = forward_logits(model, one);
    const auto z = logits.row(0);
    int best = 0;
    for (std::size_t j = 1; j < z.size(); ++j) {
        if (z[j] > z[best]) {  // ties resolve to the lowest class index
            best = static_cast<int>(j);
        }
    }
    return best;
}

double cross_entropy(const Matrix& probs, std::span<const int> labels) {
    if (probs.rows() != labels.size()) {
        throw ShapeError("cross_entropy: probability rows do not match label count");
    }
    double total = 0.0;
    for (std::size_t i = 0; i < labels.size(); ++i) {
        const int y = labels[i];
        if (y < 0 || static_cast<std::size_t>(y) >= probs.cols()) {
            throw ShapeError("cross_entropy: label " + std::to_string(y) + " out of range");
        }
        total += -std::log(std::max(probs(i, static_cast<std::size_t>(y)), kProbFloor));
    }
    return total / static_cast<double>(labels.size());
}

Matrix cross_entropy_delta(const Matrix& probs, std::span<const int> labels) {
    Matrix delta = probs;
    const double inv_m = 1.0 / static_cast<double>(labels.size());
    for (std::size_t i = 0; i < labels.size(); ++i) {
        delta(i, static_cast<std::size_t>(labels[i])) -= 1.0;
        kernels::scale(inv_m, delta.row(i));
    }
    return delta;
}

Gradient backward_from_logit_delta(const MlpModel& model, const ForwardCache& cache, const Matrix& inputs,
                                   const Matrix& delta, Matrix* input_grad) {
    Gradient grad = zero_gradient(model);
    const std::size_t num_layers = model.num_layers();
    const std::size_t m = inputs.rows();

    Matrix upstream = delta;  // d(loss)/d(pre-activation) of the current layer
    for (std::size_t li = num_layers; li-- > 0;) {
        const Matrix& w = model.weights[li];
        const Matrix& layer_input = li == 0 ? inputs : cache.activations[li - 1];

        Matrix& dw = grad.dw[li];
        auto& db = grad.db[li];
        for (std::size_t i = 0; i < m; ++i) {
            const auto d = upstream.row(i);
            const auto x = layer_input.row(i);
            for (std::size_t j = 0; j < w.rows(); ++j) {
                if (d[j] != 0.0) {
                    kernels::axpy(d[j], x, dw.row(j));
                }
                db[j] += d[j];
            }
        }

        const bool need_downstream = li > 0 || input_grad != nullptr;
        if (!need_downstream) {
            break;
        }
        Matrix down(m, w.cols());
        for (std::size_t i = 0; i < m; ++i) {
            const auto d = upstream.row(i);
            auto dx = down.row(i);
            for (std::size_t j = 0; j < w.rows(); ++j) {
                if (d[j] != 0.0) {
                    kernels::axpy(d[j], w.row(j), dx);
                }
            }
        }
        if (li == 0) {
            *input_grad = std::move(down);
            break;
        }
        // chain through the activation of the layer below
        const Matrix& pre = cache.pre_activations[li - 1];
        if (model.activation == Activation::relu) {
            kernels::relu_grad_mask(pre.flat(), down.flat());
        } else {
            const auto post = cache.activations[li - 1].flat();
            auto d = down.flat();
            for (std::size_t i = 0; i < d.size(); ++i) {
                d[i] *= 1.0 - post[i] * post[i];
            }
        }
        upstream = std::move(down);
    }
    return grad;
}

std::pair<double, Gradient> grad_params(const MlpModel& model, const Batch& batch) {
    ForwardCache cache;
    const Matrix logits = forward_cached(model, batch.inputs, cache);
    const Matrix probs = softmax_rows(logits);
    const double loss = cross_entropy(probs, batch.labels);
    const Matrix delta = cross_entropy_delta(probs, batch.labels);
    Gradient grad = backward_from_logit_delta(model, cache, batch.inputs, delta);
    return {loss, std::move(grad)};
}

std::vector<double> grad_input(const MlpModel& model, std::span<const double> x, int label) {
    Batch batch;
    batch.inputs = Matrix(1, x.size());
    std::copy(x.begin(), x.end(), batch.inputs.row(0).begin());
    batch.labels = {label};

    ForwardCache cache;
    const Matrix logits = forward_cached(model, batch.inputs, cache);
    const Matrix probs = softmax_rows(logits);
    const Matrix delta = cross_entropy_delta(probs, batch.labels);
    Matrix input_grad;
    backward_from_logit_delta(model, cache, batch.inputs, delta, &input_grad);
    return {input_grad.row(0).begin(), input_grad.row(0).end()};
}

Matrix hidden_features(const MlpModel& model, const Matrix& inputs) {
    if (model.num_layers() == 1) {
        return inputs;
    }
    ForwardCache cache;
    forward_cached(model, inputs, cache);
    return cache.activations.back();
}

namespace {

void write_values(std::ofstream& out, std::span<const double> values) {
    char buf[64];
    for (std::size_t i = 0; i < values.size(); ++i) {
        std::snprintf(buf, sizeof(buf), "%.17g", values[i]);
        out << buf << (i + 1 == values.size() ? '\n' : ' ');
    }
    if (values.empty()) {
        out << '\n';
    }
}

std::vector<double> read_values(std::istream& in, std::size_t count, const std::string& field) {
    std::vector<double> values(count);
    for (std::size_t i = 0; i < count; ++i) {
        if (!(in >> values[i])) {
            throw ParseError("checkpoint: truncated or non-numeric data in field '" + field + "'");
        }
    }
    return values;
}

std::string expect_token(std::istream& in, const std::string& field) {
    std::string token;
    if (!(in >> token)) {
        throw ParseError("checkpoint: missing field '" + field + "'");
    }
    return token;
}

}  // namespace

void checkpoint_save(const MlpModel& model, const std::string& path) {
    std::ofstream out(path);
    if (!out) {
        throw ParseError("checkpoint: cannot open '" + path + "' for writing");
    }
    out << "unlearn-lab-checkpoint\n";
    out << "version 1\n";
    out << "layer_dims";
    for (int d : model.layer_dims) {
        out << ' ' << d;
    }
    out << '\n';
    out << "activation " << activation_to_string(model.activation) << '\n';
    for (std::size_t l = 0; l < model.num_layers(); ++l) {
        out << "weights " << l << ' ' << model.weights[l].rows() << ' ' << model.weights[l].cols() << '\n';
        write_values(out, model.weights[l].flat());
        out << "biases " << l << ' ' << model.biases[l].size() << '\n';
        write_values(out, model.biases[l]);
    }
    if (!out) {
        throw ParseError("checkpoint: write to '" + path + "' failed");
    }
}

MlpModel checkpoint_load(const std::string& path) {
    std::ifstream in(path);
    if (!in) {
        throw ParseError("checkpoint: cannot open '" + path + "'");
    }
    std::string magic;
    std::getline(in, magic);
    if (magic != "unlearn-lab-checkpoint") {
        throw ParseError("checkpoint: bad magic line in field 'magic'");
    }
    if (expect_token(in, "version") != "version") {
        throw ParseError("checkpoint: expected field 'version'");
    }
    int version = 0;
    if (!(in >> version)) {
        throw ParseError("checkpoint: non-integer value in field 'version'");
    }
    if (version != 1) {
        throw VersionError("checkpoint: unsupported version " + std::to_string(version));
    }
    if (expect_token(in, "layer_dims") != "layer_dims") {
        throw ParseError("checkpoint: expected field 'layer_dims'");
    }
    std::string dims_line;
    std::getline(in, dims_line);
    std::istringstream dims_in(dims_line);
    std::vector<int> dims;
    int d;
    while (dims_in >> d) {
        dims.push_back(d);
    }
    if (dims.size() < 2) {
        throw ParseError("checkpoint: field 'layer_dims' needs at least two entries");
    }
    if (expect_token(in, "activation") != "activation") {
        throw ParseError("checkpoint: expected field 'activation'");
    }
    std::string act_name;
    if (!(in >> act_name)) {
        throw ParseError("checkpoint: missing value in field 'activation'");
    }

    MlpModel model;
    model.layer_dims = dims;
    model.activation = activation_from_string(act_name);
    for (std::size_t l = 0; l + 1 < dims.size(); ++l) {
        if (expect_token(in, "weights") != "weights") {
            throw ParseError("checkpoint: expected field 'weights' for layer " + std::to_string(l));
        }
        std::size_t idx, rows, cols;
        if (!(in >> idx >> rows >> cols) || idx != l) {
            throw ParseError("checkpoint: bad header in field 'weights' for layer " + std::to_string(l));
        }
        if (rows != static_cast<std::size_t>(dims[l + 1]) || cols != static_cast<std::size_t>(dims[l])) {
            throw ParseError("checkpoint: shape mismatch in field 'weights' for layer " + std::to_string(l));
        }
        Matrix w(rows, cols);
        const auto values = read_values(in, rows * cols, "weights[" + std::to_string(l) + "]");
        std::copy(values.begin(), values.end(), w.flat().begin());
        model.weights.push_back(std::move(w));

        if (expect_token(in, "biases") != "biases") {
            throw ParseError("checkpoint: expected field 'biases' for layer " + std::to_string(l));
        }
        std::size_t bidx, blen;
        if (!(in >> bidx >> blen) || bidx != l || blen != rows) {
            throw ParseError("checkpoint: bad header in field 'biases' for layer " + std::to_string(l));
        }
        model.biases.push_back(read_values(in, blen, "biases[" + std::to_string(l) + "]"));
    }
    for (std::size_t l = 0; l < model.num_layers(); ++l) {
        for (double v : model.weights[l].flat()) {
            if (!std::isfinite(v)) {
                throw ParseError("checkpoint: non-finite value in field 'weights[" + std::to_string(l) + "]'");
            }
        }
    }
    return model;
}

}  // namespace ulab::nn
