#include "nids/mlp.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>

#include <nlohmann/json.hpp>

namespace nids {

namespace {

constexpr double kProbFloor = 1e-12;

// z = a * W + b
Matrix affine(const Matrix& a, const MlpLayer& layer) {
    Matrix z(a.rows, layer.out);
    for (std::size_t r = 0; r < a.rows; ++r) {
        double* zr = z.data.data() + r * layer.out;
        for (std::size_t j = 0; j < layer.out; ++j) zr[j] = layer.biases[j];
        const double* ar = a.data.data() + r * layer.in;
        for (std::size_t i = 0; i < layer.in; ++i) {
            double av = ar[i];
            if (av == 0.0) continue;
            const double* wrow = layer.weights.data() + i * layer.out;
            for (std::size_t j = 0; j < layer.out; ++j) zr[j] += av * wrow[j];
        }
    }
    return z;
}

void softmax_rows(Matrix& z) {
    for (std::size_t r = 0; r < z.rows; ++r) {
        auto row = z.row(r);
        double mx = *std::max_element(row.begin(), row.end());
        double sum = 0.0;
        for (double& v : row) {
            v = std::exp(v - mx);
            sum += v;
        }
        for (double& v : row) v /= sum;
    }
}

struct ForwardCache {
    std::vector<Matrix> inputs;  // what each layer consumed (post-dropout)
    std::vector<Matrix> pre;     // affine outputs per layer
    std::vector<std::vector<double>> drop_scale;  // per hidden layer, per element
};

Matrix forward_internal(const MlpModel& m, const Matrix& batch, ForwardMode mode,
                        Rng* dropout_rng, ForwardCache* cache) {
    Matrix a = batch;
    for (std::size_t l = 0; l < m.layers.size(); ++l) {
        const MlpLayer& layer = m.layers[l];
        if (a.cols != layer.in) throw std::invalid_argument("mlp: dimension mismatch in forward");
        if (cache) cache->inputs.push_back(a);
        Matrix z = affine(a, layer);
        if (cache) cache->pre.push_back(z);
        if (layer.activation == Activation::Relu)
            for (double& v : z.data) v = v > 0.0 ? v : 0.0;
        bool hidden = l + 1 < m.layers.size();
        if (hidden && mode == ForwardMode::Train && m.dropout_rate > 0.0) {
            double keep = 1.0 - m.dropout_rate;
            std::vector<double> scale(z.data.size());
            for (std::size_t i = 0; i < z.data.size(); ++i) {
                scale[i] = dropout_rng->uniform() < keep ? 1.0 / keep : 0.0;
                z.data[i] *= scale[i];
            }
            if (cache) cache->drop_scale.push_back(std::move(scale));
        } else if (cache && hidden) {
            cache->drop_scale.emplace_back();  // no dropout applied
        }
        a = std::move(z);
    }
    softmax_rows(a);
    return a;
}

struct Gradients {
    std::vector<std::vector<double>> weights;
    std::vector<std::vector<double>> biases;
};

// probs is consumed as the delta buffer
Gradients backward(const MlpModel& m, const ForwardCache& cache, Matrix probs,
                   const std::vector<int>& labels) {
    std::size_t batch = probs.rows;
    Gradients g;
    g.weights.resize(m.layers.size());
    g.biases.resize(m.layers.size());

    // d(loss)/d(logits) for softmax + categorical cross-entropy
    Matrix delta = std::move(probs);
    double inv_b = 1.0 / static_cast<double>(batch);
    for (std::size_t r = 0; r < batch; ++r) {
        delta.at(r, static_cast<std::size_t>(labels[r])) -= 1.0;
        for (std::size_t c = 0; c < delta.cols; ++c) delta.at(r, c) *= inv_b;
    }

    for (std::size_t li = m.layers.size(); li-- > 0;) {
        const MlpLayer& layer = m.layers[li];
        const Matrix& input = cache.inputs[li];
        g.weights[li].assign(layer.weights.size(), 0.0);
        g.biases[li].assign(layer.out, 0.0);

        for (std::size_t r = 0; r < batch; ++r) {
            const double* dr = delta.data.data() + r * layer.out;
            const double* ir = input.data.data() + r * layer.in;
            for (std::size_t j = 0; j < layer.out; ++j) g.biases[li][j] += dr[j];
            for (std::size_t i = 0; i < layer.in; ++i) {
                double iv = ir[i];
                if (iv == 0.0) continue;
                double* gw = g.weights[li].data() + i * layer.out;
                for (std::size_t j = 0; j < layer.out; ++j) gw[j] += iv * dr[j];
            }
        }
        if (li == 0) break;

        // propagate to the previous layer's output
        Matrix prev(batch, layer.in);
        for (std::size_t r = 0; r < batch; ++r) {
            const double* dr = delta.data.data() + r * layer.out;
            double* pr = prev.data.data() + r * layer.in;
            for (std::size_t i = 0; i < layer.in; ++i) {
                const double* wrow = layer.weights.data() + i * layer.out;
                double s = 0.0;
                for (std::size_t j = 0; j < layer.out; ++j) s += wrow[j] * dr[j];
                pr[i] = s;
            }
        }
        // through the previous layer's dropout and relu
        const std::vector<double>& scale = cache.drop_scale[li - 1];
        const Matrix& pre = cache.pre[li - 1];
        for (std::size_t i = 0; i < prev.data.size(); ++i) {
            double s = scale.empty() ? 1.0 : scale[i];
            prev.data[i] *= s;
            if (m.layers[li - 1].activation == Activation::Relu && pre.data[i] <= 0.0)
                prev.data[i] = 0.0;
        }
        delta = std::move(prev);
    }
    return g;
}

}  // namespace

std::size_t MlpModel::parameter_count() const {
    std::size_t n = 0;
    for (const auto& l : layers) n += l.weights.size() + l.biases.size();
    return n;
}

void MlpModel::validate() const {
    if (layers.empty()) throw std::invalid_argument("mlp: no layers");
    for (std::size_t l = 0; l < layers.size(); ++l) {
        if (layers[l].weights.size() != layers[l].in * layers[l].out ||
            layers[l].biases.size() != layers[l].out)
            throw std::invalid_argument("mlp: layer parameter shapes inconsistent");
        if (l > 0 && layers[l].in != layers[l - 1].out)
            throw std::invalid_argument("mlp: layer widths do not chain");
        for (double v : layers[l].weights)
            if (!std::isfinite(v)) throw std::invalid_argument("mlp: non-finite weight");
        for (double v : layers[l].biases)
            if (!std::isfinite(v)) throw std::invalid_argument("mlp: non-finite bias");
    }
    if (layers.back().out != output_classes.size())
        throw std::invalid_argument("mlp: output width != class count");
    if (!(dropout_rate >= 0.0 && dropout_rate < 1.0))
        throw std::invalid_argument("mlp: dropout_rate must lie in [0,1)");
}

void TrainConfig::validate() const {
    if (!(learning_rate >= 0.0)) throw std::invalid_argument("train: negative learning rate");
    if (batch_size < 1) throw std::invalid_argument("train: batch_size must be >= 1");
    if (epochs < 1) throw std::invalid_argument("train: epochs must be >= 1");
}

MlpModel init_model(std::size_t input_dim, const std::vector<std::size_t>& hidden_widths,
                    const std::vector<ClassLabel>& classes, std::uint64_t seed,
                    double dropout_rate) {
    if (input_dim == 0 || classes.empty())
        throw std::invalid_argument("mlp: input_dim and class count must be positive");
    MlpModel m;
    m.dropout_rate = dropout_rate;
    m.rng_seed = seed;
    m.output_classes = classes;

    Rng rng(derive_seed(seed, 0x6d6c70696e6974ULL));
    std::size_t prev = input_dim;
    auto add_layer = [&](std::size_t width, Activation act) {
        MlpLayer layer;
        layer.in = prev;
        layer.out = width;
        layer.activation = act;
        layer.weights.resize(prev * width);
        layer.biases.assign(width, 0.0);
        double bound = 1.0 / std::sqrt(static_cast<double>(prev));
        for (double& w : layer.weights) w = (rng.uniform() * 2.0 - 1.0) * bound;
        m.layers.push_back(std::move(layer));
        prev = width;
    };
    for (std::size_t w : hidden_widths) {
        if (w == 0) throw std::invalid_argument("mlp: zero hidden width");
        add_layer(w, Activation::Relu);
    }
    add_layer(classes.size(), Activation::Identity);
    m.validate();
    return m;
}

Matrix forward(const MlpModel& m, const Matrix& batch, ForwardMode mode, Rng* dropout_rng) {
    Rng fallback(derive_seed(m.rng_seed, 0x64726f70ULL));
    if (mode == ForwardMode::Train && dropout_rng == nullptr) dropout_rng = &fallback;
    return forward_internal(m, batch, mode, dropout_rng, nullptr);
}

Matrix logits(const MlpModel& m, const Matrix& batch) {
    Matrix a = batch;
    for (const auto& layer : m.layers) {
        if (a.cols != layer.in) throw std::invalid_argument("mlp: dimension mismatch in logits");
        Matrix z = affine(a, layer);
        if (layer.activation == Activation::Relu)
            for (double& v : z.data) v = v > 0.0 ? v : 0.0;
        a = std::move(z);
    }
    return a;
}

double loss(const Matrix& probs, const std::vector<int>& labels) {
    if (probs.rows != labels.size()) throw std::invalid_argument("loss: shape mismatch");
    if (probs.rows == 0) throw std::invalid_argument("loss: empty batch");
    double total = 0.0;
    for (std::size_t r = 0; r < probs.rows; ++r) {
        double p = probs.at(r, static_cast<std::size_t>(labels[r]));
        total += -std::log(std::max(p, kProbFloor));
    }
    return total / static_cast<double>(probs.rows);
}

TrainingOutcome train(const MlpModel& m, const Matrix& x, const std::vector<int>& y,
                      const TrainConfig& cfg) {
    cfg.validate();
    m.validate();
    if (x.rows != y.size()) throw std::invalid_argument("train: row/label count mismatch");
    if (x.rows == 0) throw std::invalid_argument("train: empty dataset");
    for (int label : y)
        if (label < 0 || static_cast<std::size_t>(label) >= m.n_classes())
            throw std::invalid_argument("train: label outside the model class map");

    auto t0 = std::chrono::steady_clock::now();
    TrainingOutcome outcome;
    outcome.final_model = m;
    MlpModel& model = outcome.final_model;

    // Adam state, one slot per parameter tensor
    std::vector<std::vector<double>> mw(model.layers.size()), vw(model.layers.size());
    std::vector<std::vector<double>> mb(model.layers.size()), vb(model.layers.size());
    for (std::size_t l = 0; l < model.layers.size(); ++l) {
        mw[l].assign(model.layers[l].weights.size(), 0.0);
        vw[l].assign(model.layers[l].weights.size(), 0.0);
        mb[l].assign(model.layers[l].biases.size(), 0.0);
        vb[l].assign(model.layers[l].biases.size(), 0.0);
    }

    Rng shuffle_rng(derive_seed(cfg.shuffle_seed, 0x7368756666ULL));
    Rng dropout_rng(derive_seed(m.rng_seed ^ cfg.shuffle_seed, 0x64726f70ULL));
    std::vector<std::size_t> order(x.rows);
    std::iota(order.begin(), order.end(), 0);

    std::size_t step = 0;
    double beta1_pow = 1.0, beta2_pow = 1.0;
    for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
        shuffle_rng.shuffle(order);
        double epoch_loss = 0.0;
        for (std::size_t start = 0; start < x.rows; start += cfg.batch_size) {
            std::size_t end = std::min(start + cfg.batch_size, x.rows);
            std::size_t bn = end - start;
            Matrix batch(bn, x.cols);
            std::vector<int> labels(bn);
            for (std::size_t r = 0; r < bn; ++r) {
                auto src = x.row(order[start + r]);
                std::copy(src.begin(), src.end(),
                          batch.data.begin() + static_cast<std::ptrdiff_t>(r * x.cols));
                labels[r] = y[order[start + r]];
            }

            ForwardCache cache;
            Matrix probs = forward_internal(model, batch, ForwardMode::Train, &dropout_rng, &cache);
            double batch_loss = loss(probs, labels);
            if (!std::isfinite(batch_loss))
                throw TrainingDiverged("training diverged: non-finite loss at epoch " +
                                       std::to_string(epoch));
            epoch_loss += batch_loss * static_cast<double>(bn);

            Gradients g = backward(model, cache, std::move(probs), labels);

            ++step;
            beta1_pow *= cfg.adam_beta1;
            beta2_pow *= cfg.adam_beta2;
            double corr1 = 1.0 - beta1_pow;
            double corr2 = 1.0 - beta2_pow;
            for (std::size_t l = 0; l < model.layers.size(); ++l) {
                auto adam_update = [&](std::vector<double>& param, std::vector<double>& mom,
                                       std::vector<double>& var, const std::vector<double>& grad) {
                    for (std::size_t i = 0; i < param.size(); ++i) {
                        mom[i] = cfg.adam_beta1 * mom[i] + (1.0 - cfg.adam_beta1) * grad[i];
                        var[i] = cfg.adam_beta2 * var[i] + (1.0 - cfg.adam_beta2) * grad[i] * grad[i];
                        double mhat = mom[i] / corr1;
                        double vhat = var[i] / corr2;
                        param[i] -= cfg.learning_rate * mhat / (std::sqrt(vhat) + cfg.adam_eps);
                    }
                };
                adam_update(model.layers[l].weights, mw[l], vw[l], g.weights[l]);
                adam_update(model.layers[l].biases, mb[l], vb[l], g.biases[l]);
            }
        }
        outcome.loss_curve.push_back(epoch_loss / static_cast<double>(x.rows));
    }
    outcome.wall_time_s =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return outcome;
}

std::pair<int, std::vector<double>> predict(const MlpModel& m, std::span<const double> x) {
    Matrix batch(1, x.size());
    std::copy(x.begin(), x.end(), batch.data.begin());
    Matrix probs = forward(m, batch, ForwardMode::Infer);
    auto row = probs.row(0);
    int best = 0;
    for (std::size_t c = 1; c < row.size(); ++c)
        if (row[c] > row[best]) best = static_cast<int>(c);
    return {best, std::vector<double>(row.begin(), row.end())};
}

std::vector<int> predict_batch(const MlpModel& m, const Matrix& x) {
    Matrix probs = forward(m, x, ForwardMode::Infer);
    std::vector<int> out(x.rows);
    for (std::size_t r = 0; r < x.rows; ++r) {
        auto row = probs.row(r);
        int best = 0;
        for (std::size_t c = 1; c < row.size(); ++c)
            if (row[c] > row[best]) best = static_cast<int>(c);
        out[r] = best;
    }
    return out;
}

MlpModel extend_classes(const MlpModel& m, const std::vector<ClassLabel>& new_labels) {
    for (const auto& nl : new_labels) {
        for (const auto& existing : m.output_classes)
            if (existing.name == nl.name)
                throw std::invalid_argument("extend_classes: duplicate label '" + nl.name + "'");
        for (const auto& other : new_labels)
            if (&other != &nl && other.name == nl.name)
                throw std::invalid_argument("extend_classes: duplicate label '" + nl.name + "'");
    }
    if (new_labels.empty()) return m;

    MlpModel out = m;
    MlpLayer& last = out.layers.back();
    std::size_t old_out = last.out;
    std::size_t new_out = old_out + new_labels.size();
    std::vector<double> weights(last.in * new_out, 0.0);
    for (std::size_t i = 0; i < last.in; ++i)
        std::copy(last.weights.begin() + static_cast<std::ptrdiff_t>(i * old_out),
                  last.weights.begin() + static_cast<std::ptrdiff_t>((i + 1) * old_out),
                  weights.begin() + static_cast<std::ptrdiff_t>(i * new_out));
    last.weights = std::move(weights);
    last.biases.resize(new_out, 0.0);
    last.out = new_out;
    for (const auto& nl : new_labels) {
        ClassLabel added = nl;
        added.id = static_cast<int>(out.output_classes.size());
        out.output_classes.push_back(added);
    }
    out.validate();
    return out;
}

double gradient_check(const MlpModel& m, const Matrix& batch, const std::vector<int>& labels,
                      std::size_t n_probes, std::uint64_t seed) {
    MlpModel probe = m;
    probe.dropout_rate = 0.0;

    ForwardCache cache;
    Matrix probs = forward_internal(probe, batch, ForwardMode::Infer, nullptr, &cache);
    Gradients analytic = backward(probe, cache, std::move(probs), labels);

    auto loss_at = [&](const MlpModel& model) {
        return loss(forward_internal(model, batch, ForwardMode::Infer, nullptr, nullptr), labels);
    };

    // flatten addressing: (layer, weights-or-biases, index)
    struct Coord {
        std::size_t layer;
        bool bias;
        std::size_t index;
    };
    std::vector<Coord> coords;
    for (std::size_t l = 0; l < probe.layers.size(); ++l) {
        for (std::size_t i = 0; i < probe.layers[l].weights.size(); ++i)
            coords.push_back({l, false, i});
        for (std::size_t i = 0; i < probe.layers[l].biases.size(); ++i)
            coords.push_back({l, true, i});
    }
    Rng rng(derive_seed(seed, 0x67726164ULL));
    std::vector<std::size_t> picks =
        n_probes >= coords.size()
            ? [&] {
                  std::vector<std::size_t> all(coords.size());
                  std::iota(all.begin(), all.end(), 0);
                  return all;
              }()
            : rng.sample_without_replacement(coords.size(), n_probes);

    const double h = 1e-5;
    double max_rel = 0.0;
    for (std::size_t p : picks) {
        const Coord& c = coords[p];
        auto& param = c.bias ? probe.layers[c.layer].biases : probe.layers[c.layer].weights;
        double original = param[c.index];
        param[c.index] = original + h;
        double up = loss_at(probe);
        param[c.index] = original - h;
        double down = loss_at(probe);
        param[c.index] = original;
        double numeric = (up - down) / (2.0 * h);
        double analytic_g =
            c.bias ? analytic.biases[c.layer][c.index] : analytic.weights[c.layer][c.index];
        double denom = std::max(std::abs(numeric), std::abs(analytic_g));
        if (denom < 1e-8) continue;  // both effectively zero
        max_rel = std::max(max_rel, std::abs(numeric - analytic_g) / denom);
    }
    return max_rel;
}

std::string mlp_to_json(const MlpModel& m) {
    nlohmann::json j;
    j["format_version"] = 1;
    j["dropout_rate"] = m.dropout_rate;
    j["rng_seed"] = m.rng_seed;
    nlohmann::json classes = nlohmann::json::array();
    for (const auto& c : m.output_classes)
        classes.push_back({{"name", c.name},
                           {"id", c.id},
                           {"kind", c.kind == LabelKind::Benign ? "benign" : "attack"}});
    j["classes"] = std::move(classes);
    nlohmann::json layers = nlohmann::json::array();
    for (const auto& l : m.layers) {
        layers.push_back({{"in", l.in},
                          {"out", l.out},
                          {"activation", l.activation == Activation::Relu ? "relu" : "identity"},
                          {"weights", l.weights},
                          {"biases", l.biases}});
    }
    j["layers"] = std::move(layers);
    return j.dump();
}

MlpModel mlp_from_json(const std::string& text) {
    auto j = nlohmann::json::parse(text);
    if (j.at("format_version").get<int>() != 1)
        throw std::invalid_argument("mlp: unsupported serialization version");
    MlpModel m;
    m.dropout_rate = j.at("dropout_rate").get<double>();
    m.rng_seed = j.at("rng_seed").get<std::uint64_t>();
    for (const auto& e : j.at("classes")) {
        ClassLabel c;
        c.name = e.at("name").get<std::string>();
        c.id = e.at("id").get<int>();
        c.kind = e.at("kind") == "benign" ? LabelKind::Benign : LabelKind::Attack;
        m.output_classes.push_back(std::move(c));
    }
    for (const auto& e : j.at("layers")) {
        MlpLayer l;
        l.in = e.at("in").get<std::size_t>();
        l.out = e.at("out").get<std::size_t>();
        l.activation = e.at("activation") == "relu" ? Activation::Relu : Activation::Identity;
        l.weights = e.at("weights").get<std::vector<double>>();
        l.biases = e.at("biases").get<std::vector<double>>();
        m.layers.push_back(std::move(l));
    }
    m.validate();
    return m;
}

}  // namespace nids
