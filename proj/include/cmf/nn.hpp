#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "cmf/error.hpp"
#include "cmf/random.hpp"
#include "cmf/text.hpp"

// Small from-scratch regressors: a plain MLP on one time step, the same MLP fed a
// flattened window (MLPw), and a 1D CNN with global average pooling.
//
// Inputs are feature-major matrices x[d * T + t] with T the window length. For the
// MLPs the same buffer is read as a flat vector of D*T values, so an MLPw with
// T == 1 is the plain MLP.
namespace cmf::nn {

enum class ModelKind { mlp, mlpw, cnn };

inline std::string to_string(ModelKind k) {
    switch (k) {
        case ModelKind::mlp: return "mlp";
        case ModelKind::mlpw: return "mlpw";
        case ModelKind::cnn: return "cnn";
    }
    return "?";
}

inline ModelKind parse_model_kind(std::string_view s) {
    s = text::trim(s);
    if (s == "mlp") return ModelKind::mlp;
    if (s == "mlpw") return ModelKind::mlpw;
    if (s == "cnn") return ModelKind::cnn;
    throw ParameterError("model must be one of mlp|mlpw|cnn, got '" + std::string(s) + "'");
}

struct ModelSpec {
    ModelKind kind = ModelKind::mlp;
    std::size_t input_features = 5;
    std::size_t window_len = 1;
    std::vector<std::size_t> hidden{8};           // dense hidden sizes (the CNN head for kind == cnn)
    std::vector<std::size_t> conv_channels;       // cnn only
    std::size_t kernel = 3;
    std::uint64_t seed = 0;

    bool operator==(const ModelSpec&) const = default;

    static ModelSpec mlp(std::size_t hidden = 8) { return {ModelKind::mlp, 5, 1, {hidden}, {}, 3, 0}; }
    static ModelSpec mlpw(std::size_t window, std::size_t hidden = 16) {
        return {ModelKind::mlpw, 5, window, {hidden}, {}, 3, 0};
    }
    // Conv(5->16) ReLU, Conv(16->8) ReLU, global average pool, Dense(8->16) ReLU, Dense(16->1).
    static ModelSpec cnn(std::size_t window) { return {ModelKind::cnn, 5, window, {16}, {16, 8}, 3, 0}; }

    static ModelSpec for_kind(ModelKind k, std::size_t window) {
        switch (k) {
            case ModelKind::mlp: return mlp();
            case ModelKind::mlpw: return mlpw(window);
            case ModelKind::cnn: return cnn(window);
        }
        return mlp();
    }

    std::size_t input_size() const noexcept { return input_features * window_len; }

    void validate() const {
        if (input_features < 1) throw ParameterError("input_features must be >= 1");
        if (window_len < 1) throw ParameterError("window_len must be >= 1");
        if (kind == ModelKind::mlp && window_len != 1) throw ParameterError("mlp takes a single time step (window_len 1)");
        for (auto h : hidden)
            if (h < 1) throw ParameterError("hidden sizes must be >= 1");
        if (kind == ModelKind::cnn) {
            if (conv_channels.empty()) throw ParameterError("cnn needs at least one conv layer");
            for (auto c : conv_channels)
                if (c < 1) throw ParameterError("conv channel counts must be >= 1");
            if (kernel % 2 == 0) throw ParameterError("kernel size must be odd");
        }
    }
};

// ---------------------------------------------------------------------------
// Layers. Each works on slices of a flat parameter vector.

struct Dense {
    std::size_t in = 0, out = 0;
    bool relu = true;
    std::size_t weight_offset = 0;  // out x in, row-major
    std::size_t bias_offset = 0;

    std::size_t parameter_count() const noexcept { return in * out + out; }
    std::size_t multiplies() const noexcept { return in * out; }

    void forward(std::span<const double> p, std::span<const double> x, std::span<double> y) const {
        const double* w = p.data() + weight_offset;
        const double* b = p.data() + bias_offset;
        for (std::size_t j = 0; j < out; ++j) {
            double acc = b[j];
            const double* row = w + j * in;
            for (std::size_t i = 0; i < in; ++i) acc += row[i] * x[i];
            y[j] = relu ? std::max(acc, 0.0) : acc;
        }
    }

    // gy is dL/dy on entry and is overwritten with dL/d(pre-activation).
    // Accumulates into grad and writes dL/dx to gx (when non-empty).
    void backward(std::span<const double> p, std::span<const double> x, std::span<const double> y,
                  std::span<double> gy, std::span<double> grad, std::span<double> gx) const {
        const double* w = p.data() + weight_offset;
        double* gw = grad.data() + weight_offset;
        double* gb = grad.data() + bias_offset;
        if (relu)
            for (std::size_t j = 0; j < out; ++j)
                if (y[j] <= 0.0) gy[j] = 0.0;
        if (!gx.empty()) std::fill(gx.begin(), gx.end(), 0.0);
        for (std::size_t j = 0; j < out; ++j) {
            const double g = gy[j];
            if (g == 0.0) continue;
            gb[j] += g;
            double* grow = gw + j * in;
            const double* row = w + j * in;
            for (std::size_t i = 0; i < in; ++i) grow[i] += g * x[i];
            if (!gx.empty())
                for (std::size_t i = 0; i < in; ++i) gx[i] += g * row[i];
        }
    }
};

// Same-length 1D convolution (cross-correlation) over time, zero padded.
struct Conv1D {
    std::size_t in_channels = 0, out_channels = 0, kernel = 3, length = 1;
    bool relu = true;
    std::size_t weight_offset = 0;  // out x in x kernel
    std::size_t bias_offset = 0;

    std::size_t padding() const noexcept { return (kernel - 1) / 2; }
    std::size_t parameter_count() const noexcept { return out_channels * in_channels * kernel + out_channels; }
    // Counted per output position, padded taps included.
    std::size_t multiplies() const noexcept { return out_channels * in_channels * kernel * length; }

    void forward(std::span<const double> p, std::span<const double> x, std::span<double> y) const {
        const double* w = p.data() + weight_offset;
        const double* b = p.data() + bias_offset;
        const auto T = static_cast<std::ptrdiff_t>(length);
        const auto pad = static_cast<std::ptrdiff_t>(padding());
        for (std::size_t o = 0; o < out_channels; ++o) {
            for (std::ptrdiff_t t = 0; t < T; ++t) {
                double acc = b[o];
                for (std::size_t c = 0; c < in_channels; ++c) {
                    const double* wk = w + (o * in_channels + c) * kernel;
                    const double* xc = x.data() + c * length;
                    for (std::size_t k = 0; k < kernel; ++k) {
                        const std::ptrdiff_t s = t + static_cast<std::ptrdiff_t>(k) - pad;
                        if (s >= 0 && s < T) acc += wk[k] * xc[s];
                    }
                }
                y[o * length + static_cast<std::size_t>(t)] = relu ? std::max(acc, 0.0) : acc;
            }
        }
    }

    void backward(std::span<const double> p, std::span<const double> x, std::span<const double> y,
                  std::span<double> gy, std::span<double> grad, std::span<double> gx) const {
        const double* w = p.data() + weight_offset;
        double* gw = grad.data() + weight_offset;
        double* gb = grad.data() + bias_offset;
        const auto T = static_cast<std::ptrdiff_t>(length);
        const auto pad = static_cast<std::ptrdiff_t>(padding());
        if (relu)
            for (std::size_t i = 0; i < out_channels * length; ++i)
                if (y[i] <= 0.0) gy[i] = 0.0;
        if (!gx.empty()) std::fill(gx.begin(), gx.end(), 0.0);
        for (std::size_t o = 0; o < out_channels; ++o) {
            for (std::ptrdiff_t t = 0; t < T; ++t) {
                const double g = gy[o * length + static_cast<std::size_t>(t)];
                if (g == 0.0) continue;
                gb[o] += g;
                for (std::size_t c = 0; c < in_channels; ++c) {
                    const std::size_t base = (o * in_channels + c) * kernel;
                    const double* xc = x.data() + c * length;
                    for (std::size_t k = 0; k < kernel; ++k) {
                        const std::ptrdiff_t s = t + static_cast<std::ptrdiff_t>(k) - pad;
                        if (s < 0 || s >= T) continue;
                        gw[base + k] += g * xc[s];
                        if (!gx.empty()) gx[c * length + static_cast<std::size_t>(s)] += g * w[base + k];
                    }
                }
            }
        }
    }
};

// Mean over time per channel: (C x T) -> C.
struct GlobalAvgPool {
    std::size_t channels = 0, length = 1;

    std::size_t parameter_count() const noexcept { return 0; }
    std::size_t multiplies() const noexcept { return 0; }

    void forward(std::span<const double>, std::span<const double> x, std::span<double> y) const {
        for (std::size_t c = 0; c < channels; ++c) {
            double acc = 0.0;
            for (std::size_t t = 0; t < length; ++t) acc += x[c * length + t];
            y[c] = acc / static_cast<double>(length);
        }
    }

    void backward(std::span<const double>, std::span<const double>, std::span<const double>,
                  std::span<double> gy, std::span<double>, std::span<double> gx) const {
        if (gx.empty()) return;
        const double inv = 1.0 / static_cast<double>(length);
        for (std::size_t c = 0; c < channels; ++c)
            for (std::size_t t = 0; t < length; ++t) gx[c * length + t] = gy[c] * inv;
    }
};

using Layer = std::variant<Dense, Conv1D, GlobalAvgPool>;

inline std::size_t output_size(const Layer& l) {
    return std::visit(
        [](const auto& v) -> std::size_t {
            using T = std::decay_t<decltype(v)>;
            if constexpr (std::is_same_v<T, Dense>) return v.out;
            else if constexpr (std::is_same_v<T, Conv1D>) return v.out_channels * v.length;
            else return v.channels;
        },
        l);
}

// Scratch buffers for one forward/backward pass.
struct Workspace {
    std::vector<std::vector<double>> act;   // act[i] = output of layer i
    std::vector<std::vector<double>> grad;  // grad[i] = dL/d act[i]
    std::vector<double> input_grad;
};

class Network {
public:
    explicit Network(ModelSpec spec) : spec_(std::move(spec)) {
        spec_.validate();
        std::size_t off = 0;
        auto dense = [&](std::size_t in, std::size_t out, bool relu) {
            Dense d{in, out, relu, off, off + in * out};
            off += d.parameter_count();
            layers_.emplace_back(d);
        };
        if (spec_.kind == ModelKind::cnn) {
            std::size_t ch = spec_.input_features;
            for (auto oc : spec_.conv_channels) {
                Conv1D c{ch, oc, spec_.kernel, spec_.window_len, true, off, off + oc * ch * spec_.kernel};
                off += c.parameter_count();
                layers_.emplace_back(c);
                ch = oc;
            }
            layers_.emplace_back(GlobalAvgPool{ch, spec_.window_len});
            std::size_t in = ch;
            for (auto h : spec_.hidden) {
                dense(in, h, true);
                in = h;
            }
            dense(in, 1, false);
        } else {
            std::size_t in = spec_.input_size();
            for (auto h : spec_.hidden) {
                dense(in, h, true);
                in = h;
            }
            dense(in, 1, false);
        }
        parameter_count_ = off;
    }

    const ModelSpec& spec() const noexcept { return spec_; }
    const std::vector<Layer>& layers() const noexcept { return layers_; }
    std::size_t parameter_count() const noexcept { return parameter_count_; }
    std::size_t input_size() const noexcept { return spec_.input_size(); }

    Workspace make_workspace() const {
        Workspace ws;
        for (const auto& l : layers_) {
            ws.act.emplace_back(output_size(l), 0.0);
            ws.grad.emplace_back(output_size(l), 0.0);
        }
        ws.input_grad.assign(input_size(), 0.0);
        return ws;
    }

    void check_input(std::span<const double> x) const {
        if (x.size() != input_size())
            throw ShapeError("expected input of " + std::to_string(spec_.input_features) + "x" +
                             std::to_string(spec_.window_len) + " = " + std::to_string(input_size()) +
                             " values, got " + std::to_string(x.size()));
    }

    void check_params(std::span<const double> p) const {
        if (p.size() != parameter_count_)
            throw ShapeError("expected " + std::to_string(parameter_count_) + " parameters, got " +
                             std::to_string(p.size()));
    }

    double forward(std::span<const double> p, std::span<const double> x, Workspace& ws) const {
        check_input(x);
        std::span<const double> in = x;
        for (std::size_t i = 0; i < layers_.size(); ++i) {
            std::visit([&](const auto& l) { l.forward(p, in, ws.act[i]); }, layers_[i]);
            in = ws.act[i];
        }
        return ws.act.back()[0];
    }

    double forward(std::span<const double> p, std::span<const double> x) const {
        auto ws = make_workspace();
        return forward(p, x, ws);
    }

    // Accumulates d(output)/d(params) * dy into grad, using activations left in ws
    // by the preceding forward() on the same input.
    void backward(std::span<const double> p, std::span<const double> x, double dy, Workspace& ws,
                  std::span<double> grad, bool want_input_grad = false) const {
        const std::size_t n = layers_.size();
        ws.grad[n - 1][0] = dy;
        for (std::size_t i = n; i-- > 0;) {
            std::span<const double> in = i == 0 ? x : std::span<const double>(ws.act[i - 1]);
            std::span<double> gx;
            if (i > 0) gx = ws.grad[i - 1];
            else if (want_input_grad) gx = ws.input_grad;
            std::visit([&](const auto& l) { l.backward(p, in, ws.act[i], ws.grad[i], grad, gx); }, layers_[i]);
        }
    }

    std::size_t multiplies() const {
        std::size_t m = 0;
        for (const auto& l : layers_) m += std::visit([](const auto& v) { return v.multiplies(); }, l);
        return m;
    }

private:
    ModelSpec spec_;
    std::vector<Layer> layers_;
    std::size_t parameter_count_ = 0;
};

struct ModelParams {
    ModelSpec spec;
    std::vector<double> values;

    bool operator==(const ModelParams&) const = default;
};

// Kaiming-uniform weights (bound sqrt(6 / fan_in)), zero biases.
inline ModelParams init_model(const ModelSpec& spec) {
    Network net(spec);
    ModelParams mp{spec, std::vector<double>(net.parameter_count(), 0.0)};
    Rng rng(Rng::splitmix(spec.seed ^ 0x6e6e696e6974ULL));
    for (const auto& layer : net.layers()) {
        std::visit(
            [&](const auto& l) {
                using T = std::decay_t<decltype(l)>;
                std::size_t fan_in = 0, count = 0;
                if constexpr (std::is_same_v<T, Dense>) {
                    fan_in = l.in;
                    count = l.in * l.out;
                } else if constexpr (std::is_same_v<T, Conv1D>) {
                    fan_in = l.in_channels * l.kernel;
                    count = l.out_channels * l.in_channels * l.kernel;
                }
                if constexpr (!std::is_same_v<T, GlobalAvgPool>) {
                    const double bound = std::sqrt(6.0 / static_cast<double>(fan_in));
                    for (std::size_t i = 0; i < count; ++i)
                        mp.values[l.weight_offset + i] = rng.uniform(-bound, bound);
                }
            },
            layer);
    }
    return mp;
}

// Kaiming bound of the layer that owns parameter index i, or 0 for biases.
inline double init_bound(const Network& net, std::size_t i) {
    for (const auto& layer : net.layers()) {
        double b = -1.0;
        std::visit(
            [&](const auto& l) {
                using T = std::decay_t<decltype(l)>;
                if constexpr (std::is_same_v<T, Dense>) {
                    if (i >= l.weight_offset && i < l.bias_offset) b = std::sqrt(6.0 / static_cast<double>(l.in));
                    else if (i >= l.bias_offset && i < l.bias_offset + l.out) b = 0.0;
                } else if constexpr (std::is_same_v<T, Conv1D>) {
                    if (i >= l.weight_offset && i < l.bias_offset)
                        b = std::sqrt(6.0 / static_cast<double>(l.in_channels * l.kernel));
                    else if (i >= l.bias_offset && i < l.bias_offset + l.out_channels) b = 0.0;
                }
            },
            layer);
        if (b >= 0.0) return b;
    }
    throw ParameterError("parameter index out of range");
}

inline double forward(const ModelParams& mp, std::span<const double> x) {
    Network net(mp.spec);
    net.check_params(mp.values);
    return net.forward(mp.values, x);
}

// Mean squared error over a batch and its gradient (overwrites grad).
struct BatchItem {
    std::span<const double> x;
    double y;
};

inline double mse_gradient(const Network& net, std::span<const double> p, std::span<const BatchItem> batch,
                           Workspace& ws, std::span<double> grad) {
    if (batch.empty()) throw ParameterError("batch is empty");
    std::fill(grad.begin(), grad.end(), 0.0);
    const double inv = 1.0 / static_cast<double>(batch.size());
    double loss = 0.0;
    for (const auto& item : batch) {
        const double r = net.forward(p, item.x, ws) - item.y;
        loss += r * r;
        net.backward(p, item.x, 2.0 * r * inv, ws, grad);
    }
    loss *= inv;
    if (!std::isfinite(loss)) throw NumericError("non-finite loss");
    return loss;
}

inline std::vector<double> backward(const ModelParams& mp, std::span<const BatchItem> batch) {
    Network net(mp.spec);
    auto ws = net.make_workspace();
    std::vector<double> grad(net.parameter_count(), 0.0);
    mse_gradient(net, mp.values, batch, ws, grad);
    return grad;
}

// ---------------------------------------------------------------------------
// Complexity

struct LatencyStats {
    double mean_us = 0.0;
    double stdev_us = 0.0;
    std::size_t trials = 0;
};

struct ComplexityReport {
    std::size_t parameter_count = 0;
    std::size_t macs_per_example = 0;  // one multiply-accumulate counted as 2 operations
    std::optional<LatencyStats> latency;
};

inline ComplexityReport count_complexity(const ModelSpec& spec) {
    Network net(spec);
    return {net.parameter_count(), 2 * net.multiplies(), std::nullopt};
}

// Batch-size-1 forward latency. Each trial times `per_trial` back-to-back calls
// so timer granularity does not dominate the small models.
inline LatencyStats measure_latency(const ModelParams& mp, std::size_t n_trials, std::size_t warmup = 200,
                                    std::size_t per_trial = 32) {
    if (n_trials < 2) throw ParameterError("need at least 2 latency trials");
    Network net(mp.spec);
    net.check_params(mp.values);
    auto ws = net.make_workspace();
    Rng rng(7);
    std::vector<double> x(net.input_size());
    for (double& v : x) v = rng.uniform();
    volatile double sink = 0.0;
    for (std::size_t i = 0; i < warmup; ++i) sink = sink + net.forward(mp.values, x, ws);
    std::vector<double> samples;
    samples.reserve(n_trials);
    for (std::size_t t = 0; t < n_trials; ++t) {
        const auto start = std::chrono::steady_clock::now();
        for (std::size_t r = 0; r < per_trial; ++r) {
            x[r % x.size()] += 1e-12;
            sink = sink + net.forward(mp.values, x, ws);
        }
        const auto stop = std::chrono::steady_clock::now();
        samples.push_back(std::chrono::duration<double, std::micro>(stop - start).count() /
                          static_cast<double>(per_trial));
    }
    double mean = 0.0;
    for (double s : samples) mean += s;
    mean /= static_cast<double>(samples.size());
    double var = 0.0;
    for (double s : samples) var += (s - mean) * (s - mean);
    var /= static_cast<double>(samples.size() - 1);
    return {mean, std::sqrt(var), n_trials};
}

// ---------------------------------------------------------------------------
// Checkpoints: text, spec header followed by one parameter per line.

inline std::string checkpoint_to_text(const ModelParams& mp) {
    std::string s = "cmf-checkpoint\t1\n";
    s += "kind\t" + to_string(mp.spec.kind) + '\n';
    s += "features\t" + std::to_string(mp.spec.input_features) + '\n';
    s += "window\t" + std::to_string(mp.spec.window_len) + '\n';
    s += "hidden\t" + text::join(mp.spec.hidden, " ") + '\n';
    s += "conv\t" + text::join(mp.spec.conv_channels, " ") + '\n';
    s += "kernel\t" + std::to_string(mp.spec.kernel) + '\n';
    s += "seed\t" + std::to_string(mp.spec.seed) + '\n';
    s += "params\t" + std::to_string(mp.values.size()) + '\n';
    for (double v : mp.values) s += text::format_double(v) + '\n';
    return s;
}

inline ModelParams checkpoint_from_text(std::string_view content) {
    auto lines = text::split(content, '\n');
    std::size_t li = 0;
    auto field = [&](std::string_view key) -> std::string_view {
        if (li >= lines.size()) throw ParseError("checkpoint truncated before '" + std::string(key) + "'");
        auto parts = text::split(lines[li++], '\t');
        if (parts.empty() || text::trim(parts[0]) != key)
            throw ParseError("checkpoint line " + std::to_string(li) + ": expected '" + std::string(key) + "'");
        return parts.size() > 1 ? parts[1] : std::string_view{};
    };
    auto sizes = [](std::string_view v) {
        std::vector<std::size_t> out;
        for (auto tok : text::split(text::trim(v), ' ')) {
            if (text::trim(tok).empty()) continue;
            auto n = text::parse_int<std::size_t>(tok);
            if (!n) throw ParseError("bad size '" + std::string(tok) + "' in checkpoint");
            out.push_back(*n);
        }
        return out;
    };
    auto one = [](std::string_view v, const char* what) {
        auto n = text::parse_int<std::uint64_t>(v);
        if (!n) throw ParseError(std::string("bad ") + what + " in checkpoint");
        return *n;
    };
    if (text::trim(field("cmf-checkpoint")) != "1") throw ParseError("unsupported checkpoint version");
    ModelParams mp;
    mp.spec.kind = parse_model_kind(field("kind"));
    mp.spec.input_features = one(field("features"), "features");
    mp.spec.window_len = one(field("window"), "window");
    mp.spec.hidden = sizes(field("hidden"));
    mp.spec.conv_channels = sizes(field("conv"));
    mp.spec.kernel = one(field("kernel"), "kernel");
    mp.spec.seed = one(field("seed"), "seed");
    const auto count = one(field("params"), "parameter count");
    Network net(mp.spec);
    if (count != net.parameter_count()) throw ParseError("checkpoint parameter count does not match its spec");
    mp.values.reserve(count);
    for (std::size_t i = 0; i < count; ++i) {
        if (li >= lines.size()) throw ParseError("checkpoint truncated in parameter block");
        auto v = text::parse_double(lines[li++]);
        if (!v) throw ParseError("bad parameter value at index " + std::to_string(i));
        mp.values.push_back(*v);
    }
    return mp;
}

}  // namespace cmf::nn
