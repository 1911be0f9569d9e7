#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "foldkit/nn/ops.hpp"
#include "foldkit/rng.hpp"
#include "foldkit/tensor.hpp"

namespace foldkit::nn {

// Network shape. Encoder of `depth` conv+relu+maxpool stages with channel
// doubling, a residual bottleneck, and a decoder of bilinear-upsample +
// concat-skip + conv stages back to full resolution, ending in a 1-channel
// sigmoid head.
struct ModelSpec {
    int64_t input_channels = 3;
    int64_t base_channels = 16;
    int depth = 3;
    int bottleneck_blocks = 2;
    int64_t output_channels = 1;
    int64_t kernel = 3;
    // Initial logit of the sigmoid head. Heatmap targets are sparse
    // (roughly 1% positive pixels); starting the head at the prior keeps
    // the early optimizer steps from slamming the output toward zero,
    // which blows up decoder activations until float32 sigmoid saturates
    // and the clamped BCE gradient dies.
    double head_bias = -4.0;

    int64_t level_channels(int level) const { return base_channels << level; }
    int64_t spatial_divisor() const { return int64_t(1) << depth; }

    bool operator==(const ModelSpec&) const = default;
};

// Intermediate activations kept for the backward pass.
template <typename T>
struct ForwardTrace {
    Tensor<T> input;
    std::vector<Tensor<T>> enc_in, enc_pre, skips;
    std::vector<Pool2Result<T>> pools;
    std::vector<Tensor<T>> bn_in, bn_pre1, bn_mid, bn_pre_out;
    std::vector<Tensor<T>> dec_cat, dec_pre;                 // indexed by level
    std::vector<std::vector<int64_t>> dec_up_in_shape;       // indexed by level
    Tensor<T> head_in;
    Tensor<T> pred;
};

template <typename T>
struct ModelGrads {
    std::vector<Tensor<T>> params;  // aligned with KeypointNet::param_tensors()
    Tensor<T> input;

    void accumulate(const ModelGrads& other) {
        for (size_t i = 0; i < params.size(); ++i) {
            Tensor<T>& a = params[i];
            const Tensor<T>& b = other.params[i];
            for (int64_t j = 0; j < a.numel(); ++j) a[j] += b[j];
        }
    }

    void scale(T s) {
        for (auto& t : params)
            for (int64_t j = 0; j < t.numel(); ++j) t[j] *= s;
    }
};

template <typename T>
class KeypointNet {
  public:
    explicit KeypointNet(const ModelSpec& spec) : spec_(spec) {
        if (spec.depth < 1 || spec.base_channels < 1 || spec.bottleneck_blocks < 0)
            throw ConfigError("model: depth/base_channels/bottleneck_blocks out of range");
        const int64_t k = spec.kernel;
        for (int i = 0; i < spec.depth; ++i) {
            const int64_t cin = i == 0 ? spec.input_channels : spec.level_channels(i - 1);
            enc_.push_back(make_layer(spec.level_channels(i), cin, k));
        }
        const int64_t cb = spec.level_channels(spec.depth - 1);
        for (int b = 0; b < spec.bottleneck_blocks; ++b) {
            bottleneck_.push_back(make_layer(cb, cb, k));
            bottleneck_.push_back(make_layer(cb, cb, k));
        }
        dec_.resize(static_cast<size_t>(spec.depth));
        for (int i = spec.depth - 1; i >= 0; --i) {
            const int64_t c_up = i == spec.depth - 1 ? cb : spec.level_channels(i + 1);
            const int64_t cin = c_up + spec.level_channels(i);
            dec_[static_cast<size_t>(i)] = make_layer(spec.level_channels(i), cin, k);
        }
        head_ = make_layer(spec.output_channels, spec.base_channels, k);
    }

    // Kaiming fan-in normal kernels; zero bias everywhere except the head,
    // which starts at the positive-prior logit (see ModelSpec::head_bias).
    // Draw order is the parameter listing order, so a given seed always
    // produces the same network.
    void init_params(RandomStream& rng) {
        const double head_bias = spec_.head_bias;
        for_each_param([&rng, head_bias](const std::string& name, Tensor<T>& t) {
            if (t.rank() == 4) {
                const double fan_in =
                    static_cast<double>(t.dim(1) * t.dim(2) * t.dim(3));
                const double stddev = std::sqrt(2.0 / fan_in);
                for (int64_t i = 0; i < t.numel(); ++i)
                    t[i] = static_cast<T>(rng.normal(0.0, stddev));
            } else {
                t.fill(name == "head.bias" ? static_cast<T>(head_bias) : T(0));
            }
        });
    }

    const ModelSpec& spec() const { return spec_; }

    void for_each_param(const std::function<void(const std::string&, Tensor<T>&)>& fn) {
        auto visit = [&fn](const std::string& name, ConvParams<T>& layer) {
            fn(name + ".kernels", layer.kernels);
            fn(name + ".bias", layer.bias);
        };
        for (size_t i = 0; i < enc_.size(); ++i) visit("enc" + std::to_string(i), enc_[i]);
        for (size_t i = 0; i < bottleneck_.size(); ++i)
            visit("bottleneck" + std::to_string(i / 2) + (i % 2 ? "b" : "a"),
                  bottleneck_[i]);
        for (size_t i = dec_.size(); i-- > 0;) visit("dec" + std::to_string(i), dec_[i]);
        visit("head", head_);
    }

    std::vector<Tensor<T>*> param_tensors() {
        std::vector<Tensor<T>*> out;
        for_each_param([&out](const std::string&, Tensor<T>& t) { out.push_back(&t); });
        return out;
    }

    int64_t param_count() {
        int64_t n = 0;
        for (Tensor<T>* t : param_tensors()) n += t->numel();
        return n;
    }

    ModelGrads<T> zero_grads() {
        ModelGrads<T> g;
        for (Tensor<T>* t : param_tensors()) g.params.emplace_back(t->shape());
        return g;
    }

    // Full forward pass; returns the sigmoid heatmap (N,1,H,W).
    Tensor<T> forward(const Tensor<T>& x, ForwardTrace<T>& tr, Workspace<T>& ws) const {
        if (x.rank() != 4 || x.dim(1) != spec_.input_channels)
            throw ShapeError("model: expected (N," + std::to_string(spec_.input_channels) +
                             ",H,W) input, got " + x.shape_str());
        if (x.dim(2) % spec_.spatial_divisor() != 0 || x.dim(3) % spec_.spatial_divisor() != 0)
            throw ShapeError("model: spatial size of " + x.shape_str() +
                             " not divisible by " + std::to_string(spec_.spatial_divisor()));
        const int64_t pad = spec_.kernel / 2;
        const auto depth = static_cast<size_t>(spec_.depth);
        tr = ForwardTrace<T>{};
        tr.input = x;
        tr.enc_in.resize(depth);
        tr.enc_pre.resize(depth);
        tr.skips.resize(depth);
        tr.pools.resize(depth);
        tr.dec_cat.resize(depth);
        tr.dec_pre.resize(depth);
        tr.dec_up_in_shape.resize(depth);

        Tensor<T> h = x;
        for (size_t i = 0; i < depth; ++i) {
            tr.enc_in[i] = h;
            tr.enc_pre[i] = conv2d(h, enc_[i], 1, pad, ws);
            tr.skips[i] = relu(tr.enc_pre[i]);
            tr.pools[i] = maxpool2(tr.skips[i]);
            h = tr.pools[i].out;
        }
        for (size_t b = 0; b < bottleneck_.size() / 2; ++b) {
            tr.bn_in.push_back(h);
            Tensor<T> t1 = conv2d(h, bottleneck_[2 * b], 1, pad, ws);
            tr.bn_pre1.push_back(t1);
            Tensor<T> t1r = relu(t1);
            tr.bn_mid.push_back(t1r);
            Tensor<T> t2 = conv2d(t1r, bottleneck_[2 * b + 1], 1, pad, ws);
            Tensor<T> s = residual_add(h, t2);
            tr.bn_pre_out.push_back(s);
            h = relu(s);
        }
        for (size_t ii = depth; ii-- > 0;) {
            tr.dec_up_in_shape[ii] = h.shape();
            Tensor<T> u = bilinear_upsample2(h);
            tr.dec_cat[ii] = concat_channels(u, tr.skips[ii]);
            tr.dec_pre[ii] = conv2d(tr.dec_cat[ii], dec_[ii], 1, pad, ws);
            h = relu(tr.dec_pre[ii]);
        }
        tr.head_in = h;
        Tensor<T> logits = conv2d(h, head_, 1, pad, ws);
        tr.pred = sigmoid(logits);
        return tr.pred;
    }

    Tensor<T> forward(const Tensor<T>& x) const {
        ForwardTrace<T> tr;
        Workspace<T> ws;
        return forward(x, tr, ws);
    }

    // Backward from d(loss)/d(pred), where pred is the sigmoid output.
    ModelGrads<T> backward(const ForwardTrace<T>& tr, const Tensor<T>& grad_pred,
                           Workspace<T>& ws) const {
        const int64_t pad = spec_.kernel / 2;
        const auto depth = static_cast<size_t>(spec_.depth);
        std::vector<Tensor<T>> g_enc_k(depth), g_enc_b(depth), g_dec_k(depth),
            g_dec_b(depth);
        std::vector<Tensor<T>> g_bn_k(bottleneck_.size()), g_bn_b(bottleneck_.size());
        std::vector<Tensor<T>> g_skip(depth);

        Tensor<T> g = sigmoid_backward(tr.pred, grad_pred);
        ConvGrads<T> cg = conv2d_backward(tr.head_in, head_, g, 1, pad, ws);
        Tensor<T> g_head_k = std::move(cg.kernels);
        Tensor<T> g_head_b = std::move(cg.bias);
        g = std::move(cg.input);

        for (size_t i = 0; i < depth; ++i) {
            g = relu_backward(tr.dec_pre[i], g);
            cg = conv2d_backward(tr.dec_cat[i], dec_[i], g, 1, pad, ws);
            g_dec_k[i] = std::move(cg.kernels);
            g_dec_b[i] = std::move(cg.bias);
            const int64_t c_up = tr.dec_up_in_shape[i][1];
            auto [gu, gs] = concat_channels_backward(cg.input, c_up);
            g_skip[i] = std::move(gs);
            g = bilinear_upsample2_backward(gu, tr.dec_up_in_shape[i]);
        }
        for (size_t b = bottleneck_.size() / 2; b-- > 0;) {
            g = relu_backward(tr.bn_pre_out[b], g);
            cg = conv2d_backward(tr.bn_mid[b], bottleneck_[2 * b + 1], g, 1, pad, ws);
            g_bn_k[2 * b + 1] = std::move(cg.kernels);
            g_bn_b[2 * b + 1] = std::move(cg.bias);
            Tensor<T> gmid = relu_backward(tr.bn_pre1[b], cg.input);
            cg = conv2d_backward(tr.bn_in[b], bottleneck_[2 * b], gmid, 1, pad, ws);
            g_bn_k[2 * b] = std::move(cg.kernels);
            g_bn_b[2 * b] = std::move(cg.bias);
            // Residual: the identity path adds straight through.
            for (int64_t j = 0; j < g.numel(); ++j) g[j] += cg.input[j];
        }
        for (size_t i = depth; i-- > 0;) {
            g = maxpool2_backward(tr.pools[i], g, tr.skips[i].shape());
            for (int64_t j = 0; j < g.numel(); ++j) g[j] += g_skip[i][j];
            g = relu_backward(tr.enc_pre[i], g);
            cg = conv2d_backward(tr.enc_in[i], enc_[i], g, 1, pad, ws);
            g_enc_k[i] = std::move(cg.kernels);
            g_enc_b[i] = std::move(cg.bias);
            g = std::move(cg.input);
        }

        // Same order as for_each_param.
        ModelGrads<T> out;
        for (size_t i = 0; i < depth; ++i) {
            out.params.push_back(std::move(g_enc_k[i]));
            out.params.push_back(std::move(g_enc_b[i]));
        }
        for (size_t i = 0; i < bottleneck_.size(); ++i) {
            out.params.push_back(std::move(g_bn_k[i]));
            out.params.push_back(std::move(g_bn_b[i]));
        }
        for (size_t i = depth; i-- > 0;) {
            out.params.push_back(std::move(g_dec_k[i]));
            out.params.push_back(std::move(g_dec_b[i]));
        }
        out.params.push_back(std::move(g_head_k));
        out.params.push_back(std::move(g_head_b));
        out.input = std::move(g);
        return out;
    }

  private:
    static ConvParams<T> make_layer(int64_t out_ch, int64_t in_ch, int64_t k) {
        return ConvParams<T>{Tensor<T>({out_ch, in_ch, k, k}), Tensor<T>({out_ch})};
    }

    ModelSpec spec_;
    std::vector<ConvParams<T>> enc_;
    std::vector<ConvParams<T>> bottleneck_;  // conv pairs per block
    std::vector<ConvParams<T>> dec_;         // indexed by level
    ConvParams<T> head_;
};

}  // namespace foldkit::nn
