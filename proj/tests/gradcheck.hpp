#pragma once

#include <optional>
#include <random>
#include <vector>

#include "cmf/nn.hpp"
#include "oracles.hpp"

// Analytic-vs-finite-difference checks shared by the unit and acceptance tests.
namespace gradcheck {

inline constexpr double kStep = 1e-5;

struct Result {
    double worst = 0.0;  // largest max-relative error over all instances
    std::size_t instances = 0;
    std::size_t redrawn = 0;  // draws rejected because a ReLU kink lay within the FD step
};

inline std::vector<double> randn(std::mt19937_64& g, std::size_t n, double scale = 1.0) {
    std::normal_distribution<double> d(0.0, scale);
    std::vector<double> v(n);
    for (double& x : v) x = d(g);
    return v;
}

inline std::size_t pick(std::mt19937_64& g, std::size_t lo, std::size_t hi) {
    return std::uniform_int_distribution<std::size_t>(lo, hi)(g);
}

// L = sum_k c_k y_k(p, x); compares dL/dp and dL/dx. Empty when the draw
// puts a ReLU kink inside the finite-difference step.
template <class LayerT>
std::optional<double> check_layer(const LayerT& layer, std::size_t n_params, std::size_t n_in, std::size_t n_out,
                   std::mt19937_64& g) {
    auto p = randn(g, n_params);
    auto x = randn(g, n_in);
    const auto c = randn(g, n_out);
    std::vector<double> y(n_out), gy = c, grad(n_params, 0.0), gx(n_in, 0.0);
    layer.forward(p, x, y);
    layer.backward(p, x, y, gy, grad, gx);

    auto loss_p = [&](const std::vector<double>& pp) {
        std::vector<double> yy(n_out);
        layer.forward(pp, x, yy);
        double s = 0.0;
        for (std::size_t k = 0; k < n_out; ++k) s += c[k] * yy[k];
        return s;
    };
    auto loss_x = [&](const std::vector<double>& xx) {
        std::vector<double> yy(n_out);
        layer.forward(p, xx, yy);
        double s = 0.0;
        for (std::size_t k = 0; k < n_out; ++k) s += c[k] * yy[k];
        return s;
    };
    if (oracle::nonsmooth_at(loss_x, x, kStep) || (n_params > 0 && oracle::nonsmooth_at(loss_p, p, kStep)))
        return std::nullopt;
    double worst = oracle::max_relative_error(gx, oracle::fd_gradient(loss_x, x, kStep));
    if (n_params > 0) worst = std::max(worst, oracle::max_relative_error(grad, oracle::fd_gradient(loss_p, p, kStep)));
    return worst;
}

inline void record(Result& r, const std::optional<double>& worst) {
    if (!worst) {
        ++r.redrawn;
        return;
    }
    r.worst = std::max(r.worst, *worst);
    ++r.instances;
}

inline Result dense(std::size_t instances, std::uint64_t seed) {
    std::mt19937_64 g(seed);
    Result r;
    while (r.instances < instances) {
        cmf::nn::Dense d;
        d.in = pick(g, 1, 12);
        d.out = pick(g, 1, 10);
        d.relu = pick(g, 0, 1) == 1;
        d.weight_offset = 0;
        d.bias_offset = d.in * d.out;
        record(r, check_layer(d, d.parameter_count(), d.in, d.out, g));
    }
    return r;
}

inline Result conv(std::size_t instances, std::uint64_t seed) {
    std::mt19937_64 g(seed);
    Result r;
    while (r.instances < instances) {
        cmf::nn::Conv1D c;
        c.in_channels = pick(g, 1, 6);
        c.out_channels = pick(g, 1, 8);
        c.kernel = 2 * pick(g, 0, 2) + 1;
        c.length = pick(g, 1, 8);
        c.relu = pick(g, 0, 1) == 1;
        c.weight_offset = 0;
        c.bias_offset = c.out_channels * c.in_channels * c.kernel;
        record(r, check_layer(c, c.parameter_count(), c.in_channels * c.length, c.out_channels * c.length, g));
    }
    return r;
}

inline Result gap(std::size_t instances, std::uint64_t seed) {
    std::mt19937_64 g(seed);
    Result r;
    while (r.instances < instances) {
        cmf::nn::GlobalAvgPool p{pick(g, 1, 10), pick(g, 1, 9)};
        record(r, check_layer(p, 0, p.channels * p.length, p.channels, g));
    }
    return r;
}

// Full model: batch-of-two MSE gradient w.r.t. parameters, and output gradient w.r.t. the input.
inline Result model(cmf::nn::ModelKind kind, std::size_t instances, std::uint64_t seed) {
    std::mt19937_64 g(seed);
    Result r;
    while (r.instances < instances) {
        const std::size_t window = kind == cmf::nn::ModelKind::mlp ? 1 : pick(g, 1, 6);
        auto spec = cmf::nn::ModelSpec::for_kind(kind, window);
        spec.seed = g();
        cmf::nn::Network net(spec);
        auto params = cmf::nn::init_model(spec).values;
        const auto noise = randn(g, params.size(), 0.1);
        for (std::size_t k = 0; k < params.size(); ++k) params[k] += noise[k];
        const auto x1 = randn(g, net.input_size()), x2 = randn(g, net.input_size());
        const auto t = randn(g, 2);
        std::vector<cmf::nn::BatchItem> batch{{x1, t[0]}, {x2, t[1]}};

        auto ws = net.make_workspace();
        std::vector<double> grad(params.size());
        cmf::nn::mse_gradient(net, params, batch, ws, grad);
        auto loss = [&](const std::vector<double>& pp) {
            const double r1 = net.forward(pp, x1) - t[0], r2 = net.forward(pp, x2) - t[1];
            return 0.5 * (r1 * r1 + r2 * r2);
        };
        auto out = [&](const std::vector<double>& xx) { return net.forward(params, xx); };
        if (oracle::nonsmooth_at(loss, params, kStep) || oracle::nonsmooth_at(out, x1, kStep)) {
            record(r, std::nullopt);
            continue;
        }
        double worst = oracle::max_relative_error(grad, oracle::fd_gradient(loss, params, kStep));

        std::vector<double> gdummy(params.size(), 0.0);
        net.forward(params, x1, ws);
        net.backward(params, x1, 1.0, ws, gdummy, true);
        worst = std::max(worst, oracle::max_relative_error(ws.input_grad, oracle::fd_gradient(out, x1, kStep)));
        record(r, worst);
    }
    return r;
}

}  // namespace gradcheck
