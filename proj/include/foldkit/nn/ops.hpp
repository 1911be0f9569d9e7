#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <vector>

#include "foldkit/nn/gemm.hpp"
#include "foldkit/tensor.hpp"

namespace foldkit::nn {

// Clamp applied inside the binary cross entropy; keeps the loss finite for
// saturated sigmoid outputs.
inline constexpr double kBceEps = 1e-7;

template <typename T>
struct ConvParams {
    Tensor<T> kernels;  // (out_ch, in_ch, kh, kw)
    Tensor<T> bias;     // (out_ch)
};

template <typename T>
struct ConvGrads {
    Tensor<T> input;
    Tensor<T> kernels;
    Tensor<T> bias;
};

// Scratch buffers reused across convolution calls. One per thread.
template <typename T>
struct Workspace {
    std::vector<T> cols;
    std::vector<T> kernels_t;
};

namespace detail {

inline int64_t conv_out_dim(int64_t in, int64_t k, int64_t stride, int64_t pad) {
    return (in + 2 * pad - k) / stride + 1;
}

// Expand one image (C,H,W) into the (C*kh*kw, Ho*Wo) patch matrix.
template <typename T>
void im2col(const T* x, int64_t C, int64_t H, int64_t W, int64_t kh, int64_t kw,
            int64_t stride, int64_t pad, int64_t Ho, int64_t Wo, T* cols) {
    for (int64_t c = 0; c < C; ++c) {
        for (int64_t i = 0; i < kh; ++i) {
            for (int64_t j = 0; j < kw; ++j) {
                T* row = cols + ((c * kh + i) * kw + j) * (Ho * Wo);
                const T* src_plane = x + c * H * W;
                for (int64_t oy = 0; oy < Ho; ++oy) {
                    const int64_t iy = oy * stride + i - pad;
                    T* dst = row + oy * Wo;
                    if (iy < 0 || iy >= H) {
                        std::fill(dst, dst + Wo, T(0));
                        continue;
                    }
                    const T* src = src_plane + iy * W;
                    if (stride == 1) {
                        const int64_t ix0 = j - pad;
                        const int64_t lo = std::max<int64_t>(0, -ix0);
                        const int64_t hi = std::min<int64_t>(Wo, W - ix0);
                        if (lo > 0) std::fill(dst, dst + lo, T(0));
                        if (hi > lo)
                            std::memcpy(dst + lo, src + ix0 + lo,
                                        static_cast<size_t>(hi - lo) * sizeof(T));
                        if (hi < Wo) std::fill(dst + std::max(hi, lo), dst + Wo, T(0));
                    } else {
                        for (int64_t ox = 0; ox < Wo; ++ox) {
                            const int64_t ix = ox * stride + j - pad;
                            dst[ox] = (ix >= 0 && ix < W) ? src[ix] : T(0);
                        }
                    }
                }
            }
        }
    }
}

// Scatter-add inverse of im2col.
template <typename T>
void col2im(const T* cols, int64_t C, int64_t H, int64_t W, int64_t kh, int64_t kw,
            int64_t stride, int64_t pad, int64_t Ho, int64_t Wo, T* x) {
    for (int64_t c = 0; c < C; ++c) {
        for (int64_t i = 0; i < kh; ++i) {
            for (int64_t j = 0; j < kw; ++j) {
                const T* row = cols + ((c * kh + i) * kw + j) * (Ho * Wo);
                T* dst_plane = x + c * H * W;
                for (int64_t oy = 0; oy < Ho; ++oy) {
                    const int64_t iy = oy * stride + i - pad;
                    if (iy < 0 || iy >= H) continue;
                    const T* src = row + oy * Wo;
                    T* dst = dst_plane + iy * W;
                    for (int64_t ox = 0; ox < Wo; ++ox) {
                        const int64_t ix = ox * stride + j - pad;
                        if (ix >= 0 && ix < W) dst[ix] += src[ox];
                    }
                }
            }
        }
    }
}

}  // namespace detail

// Cross-correlation of x (N,C,H,W) with kernels (O,C,kh,kw) plus bias.
template <typename T>
Tensor<T> conv2d(const Tensor<T>& x, const ConvParams<T>& p, int64_t stride,
                 int64_t pad, Workspace<T>& ws) {
    if (x.rank() != 4 || p.kernels.rank() != 4)
        throw ShapeError("conv2d: expected rank-4 input and kernels, got " +
                         x.shape_str() + " and " + p.kernels.shape_str());
    if (x.dim(1) != p.kernels.dim(1))
        throw ShapeError("conv2d: input channels mismatch " + x.shape_str() + " vs " +
                         p.kernels.shape_str());
    if (p.bias.numel() != p.kernels.dim(0))
        throw ShapeError("conv2d: bias shape " + p.bias.shape_str() +
                         " does not match kernels " + p.kernels.shape_str());
    const int64_t N = x.dim(0), C = x.dim(1), H = x.dim(2), W = x.dim(3);
    const int64_t O = p.kernels.dim(0), kh = p.kernels.dim(2), kw = p.kernels.dim(3);
    const int64_t Ho = detail::conv_out_dim(H, kh, stride, pad);
    const int64_t Wo = detail::conv_out_dim(W, kw, stride, pad);
    if (Ho <= 0 || Wo <= 0)
        throw ShapeError("conv2d: kernel " + p.kernels.shape_str() +
                         " larger than padded input " + x.shape_str());
    const int64_t K = C * kh * kw;
    Tensor<T> y({N, O, Ho, Wo});
    ws.cols.resize(static_cast<size_t>(K * Ho * Wo));
    for (int64_t n = 0; n < N; ++n) {
        detail::im2col(x.data() + n * C * H * W, C, H, W, kh, kw, stride, pad, Ho, Wo,
                       ws.cols.data());
        T* out = y.data() + n * O * Ho * Wo;
        gemm_nn<T>(O, Ho * Wo, K, p.kernels.data(), K, ws.cols.data(), Ho * Wo, out,
                   Ho * Wo, false);
        for (int64_t o = 0; o < O; ++o) {
            const T b = p.bias[o];
            T* row = out + o * Ho * Wo;
            for (int64_t s = 0; s < Ho * Wo; ++s) row[s] += b;
        }
    }
    return y;
}

template <typename T>
Tensor<T> conv2d(const Tensor<T>& x, const ConvParams<T>& p, int64_t stride = 1,
                 int64_t pad = 0) {
    Workspace<T> ws;
    return conv2d(x, p, stride, pad, ws);
}

// Gradients w.r.t. input, kernels and bias given d(loss)/d(output).
template <typename T>
ConvGrads<T> conv2d_backward(const Tensor<T>& x, const ConvParams<T>& p,
                             const Tensor<T>& grad_out, int64_t stride, int64_t pad,
                             Workspace<T>& ws) {
    const int64_t N = x.dim(0), C = x.dim(1), H = x.dim(2), W = x.dim(3);
    const int64_t O = p.kernels.dim(0), kh = p.kernels.dim(2), kw = p.kernels.dim(3);
    const int64_t Ho = detail::conv_out_dim(H, kh, stride, pad);
    const int64_t Wo = detail::conv_out_dim(W, kw, stride, pad);
    if (grad_out.rank() != 4 || grad_out.dim(0) != N || grad_out.dim(1) != O ||
        grad_out.dim(2) != Ho || grad_out.dim(3) != Wo)
        throw ShapeError("conv2d_backward: grad shape " + grad_out.shape_str() +
                         " does not match output (" + std::to_string(N) + "," +
                         std::to_string(O) + "," + std::to_string(Ho) + "," +
                         std::to_string(Wo) + ")");
    const int64_t K = C * kh * kw;
    ConvGrads<T> g;
    g.input = Tensor<T>(x.shape());
    g.kernels = Tensor<T>(p.kernels.shape());
    g.bias = Tensor<T>(p.bias.shape());

    ws.cols.resize(static_cast<size_t>(K * Ho * Wo));
    ws.kernels_t.resize(static_cast<size_t>(K * O));
    // kernels^T: (K, O) from (O, K).
    for (int64_t o = 0; o < O; ++o)
        for (int64_t k = 0; k < K; ++k)
            ws.kernels_t[static_cast<size_t>(k * O + o)] = p.kernels[o * K + k];

    std::vector<T> grad_cols(static_cast<size_t>(K * Ho * Wo));
    for (int64_t n = 0; n < N; ++n) {
        const T* gy = grad_out.data() + n * O * Ho * Wo;
        for (int64_t o = 0; o < O; ++o) {
            T sum = T(0);
            const T* row = gy + o * Ho * Wo;
            for (int64_t s = 0; s < Ho * Wo; ++s) sum += row[s];
            g.bias[o] += sum;
        }
        detail::im2col(x.data() + n * C * H * W, C, H, W, kh, kw, stride, pad, Ho, Wo,
                       ws.cols.data());
        gemm_nt<T>(O, K, Ho * Wo, gy, Ho * Wo, ws.cols.data(), Ho * Wo,
                   g.kernels.data(), K, true);
        gemm_nn<T>(K, Ho * Wo, O, ws.kernels_t.data(), O, gy, Ho * Wo,
                   grad_cols.data(), Ho * Wo, false);
        detail::col2im(grad_cols.data(), C, H, W, kh, kw, stride, pad, Ho, Wo,
                       g.input.data() + n * C * H * W);
    }
    return g;
}

template <typename T>
ConvGrads<T> conv2d_backward(const Tensor<T>& x, const ConvParams<T>& p,
                             const Tensor<T>& grad_out, int64_t stride = 1,
                             int64_t pad = 0) {
    Workspace<T> ws;
    return conv2d_backward(x, p, grad_out, stride, pad, ws);
}

template <typename T>
Tensor<T> relu(const Tensor<T>& x) {
    Tensor<T> y(x.shape());
    for (int64_t i = 0; i < x.numel(); ++i) y[i] = x[i] > T(0) ? x[i] : T(0);
    return y;
}

template <typename T>
Tensor<T> relu_backward(const Tensor<T>& x, const Tensor<T>& grad_out) {
    require_same_shape(x, grad_out, "relu_backward");
    Tensor<T> g(x.shape());
    for (int64_t i = 0; i < x.numel(); ++i) g[i] = x[i] > T(0) ? grad_out[i] : T(0);
    return g;
}

template <typename T>
Tensor<T> sigmoid(const Tensor<T>& x) {
    Tensor<T> y(x.shape());
    for (int64_t i = 0; i < x.numel(); ++i) {
        const T v = x[i];
        if (v >= T(0)) {
            y[i] = T(1) / (T(1) + std::exp(-v));
        } else {
            const T e = std::exp(v);
            y[i] = e / (T(1) + e);
        }
    }
    return y;
}

// Takes the forward output, not the input.
template <typename T>
Tensor<T> sigmoid_backward(const Tensor<T>& y, const Tensor<T>& grad_out) {
    require_same_shape(y, grad_out, "sigmoid_backward");
    Tensor<T> g(y.shape());
    for (int64_t i = 0; i < y.numel(); ++i) g[i] = grad_out[i] * y[i] * (T(1) - y[i]);
    return g;
}

template <typename T>
struct Pool2Result {
    Tensor<T> out;
    std::vector<int32_t> argmax;  // offset within the 2x2 window: 0..3
};

// 2x2 max pooling, stride 2. Ties pick the first element in row-major
// window order so backward routing is reproducible.
template <typename T>
Pool2Result<T> maxpool2(const Tensor<T>& x) {
    if (x.rank() != 4 || x.dim(2) % 2 != 0 || x.dim(3) % 2 != 0)
        throw ShapeError("maxpool2: spatial dims must be even, got " + x.shape_str());
    const int64_t N = x.dim(0), C = x.dim(1), H = x.dim(2), W = x.dim(3);
    const int64_t Ho = H / 2, Wo = W / 2;
    Pool2Result<T> r{Tensor<T>({N, C, Ho, Wo}), {}};
    r.argmax.assign(static_cast<size_t>(N * C * Ho * Wo), 0);
    for (int64_t nc = 0; nc < N * C; ++nc) {
        const T* in = x.data() + nc * H * W;
        T* out = r.out.data() + nc * Ho * Wo;
        int32_t* am = r.argmax.data() + nc * Ho * Wo;
        for (int64_t oy = 0; oy < Ho; ++oy) {
            for (int64_t ox = 0; ox < Wo; ++ox) {
                const int64_t base = (2 * oy) * W + 2 * ox;
                const T v[4] = {in[base], in[base + 1], in[base + W], in[base + W + 1]};
                int best = 0;
                for (int k = 1; k < 4; ++k)
                    if (v[k] > v[best]) best = k;
                out[oy * Wo + ox] = v[best];
                am[oy * Wo + ox] = best;
            }
        }
    }
    return r;
}

template <typename T>
Tensor<T> maxpool2_backward(const Pool2Result<T>& fwd, const Tensor<T>& grad_out,
                            const std::vector<int64_t>& input_shape) {
    require_same_shape(fwd.out, grad_out, "maxpool2_backward");
    const int64_t N = input_shape[0], C = input_shape[1], H = input_shape[2],
                  W = input_shape[3];
    const int64_t Ho = H / 2, Wo = W / 2;
    Tensor<T> g(input_shape);
    for (int64_t nc = 0; nc < N * C; ++nc) {
        T* gin = g.data() + nc * H * W;
        const T* gout = grad_out.data() + nc * Ho * Wo;
        const int32_t* am = fwd.argmax.data() + nc * Ho * Wo;
        for (int64_t oy = 0; oy < Ho; ++oy) {
            for (int64_t ox = 0; ox < Wo; ++ox) {
                const int32_t k = am[oy * Wo + ox];
                const int64_t base = (2 * oy) * W + 2 * ox;
                const int64_t off = (k & 1) + (k >> 1) * W;
                gin[base + off] += gout[oy * Wo + ox];
            }
        }
    }
    return g;
}

namespace detail {

struct UpsampleTap {
    int64_t i0, i1;
    double w1;  // weight on i1; i0 gets 1 - w1
};

// align_corners=false sampling: src = (dst + 0.5) / 2 - 0.5, indices clamped.
inline UpsampleTap upsample_tap(int64_t dst, int64_t src_size) {
    const double src = (static_cast<double>(dst) + 0.5) / 2.0 - 0.5;
    const double f = std::floor(src);
    auto i0 = static_cast<int64_t>(f);
    const double w1 = src - f;
    int64_t i1 = i0 + 1;
    i0 = std::clamp<int64_t>(i0, 0, src_size - 1);
    i1 = std::clamp<int64_t>(i1, 0, src_size - 1);
    return {i0, i1, w1};
}

}  // namespace detail

// Doubles H and W with bilinear interpolation (align_corners=false).
template <typename T>
Tensor<T> bilinear_upsample2(const Tensor<T>& x) {
    if (x.rank() != 4)
        throw ShapeError("bilinear_upsample2: expected rank-4 input, got " + x.shape_str());
    const int64_t N = x.dim(0), C = x.dim(1), H = x.dim(2), W = x.dim(3);
    const int64_t Ho = 2 * H, Wo = 2 * W;
    Tensor<T> y({N, C, Ho, Wo});
    std::vector<detail::UpsampleTap> ty(static_cast<size_t>(Ho)), tx(static_cast<size_t>(Wo));
    for (int64_t i = 0; i < Ho; ++i) ty[static_cast<size_t>(i)] = detail::upsample_tap(i, H);
    for (int64_t i = 0; i < Wo; ++i) tx[static_cast<size_t>(i)] = detail::upsample_tap(i, W);
    for (int64_t nc = 0; nc < N * C; ++nc) {
        const T* in = x.data() + nc * H * W;
        T* out = y.data() + nc * Ho * Wo;
        for (int64_t oy = 0; oy < Ho; ++oy) {
            const auto& sy = ty[static_cast<size_t>(oy)];
            const T* r0 = in + sy.i0 * W;
            const T* r1 = in + sy.i1 * W;
            const T wy1 = static_cast<T>(sy.w1), wy0 = T(1) - wy1;
            for (int64_t ox = 0; ox < Wo; ++ox) {
                const auto& sx = tx[static_cast<size_t>(ox)];
                const T wx1 = static_cast<T>(sx.w1), wx0 = T(1) - wx1;
                out[oy * Wo + ox] = wy0 * (wx0 * r0[sx.i0] + wx1 * r0[sx.i1]) +
                                    wy1 * (wx0 * r1[sx.i0] + wx1 * r1[sx.i1]);
            }
        }
    }
    return y;
}

template <typename T>
Tensor<T> bilinear_upsample2_backward(const Tensor<T>& grad_out,
                                      const std::vector<int64_t>& input_shape) {
    const int64_t N = input_shape[0], C = input_shape[1], H = input_shape[2],
                  W = input_shape[3];
    const int64_t Ho = 2 * H, Wo = 2 * W;
    if (grad_out.dim(2) != Ho || grad_out.dim(3) != Wo || grad_out.dim(0) != N ||
        grad_out.dim(1) != C)
        throw ShapeError("bilinear_upsample2_backward: grad shape " +
                         grad_out.shape_str() + " does not match upsampled input");
    Tensor<T> g(input_shape);
    std::vector<detail::UpsampleTap> ty(static_cast<size_t>(Ho)), tx(static_cast<size_t>(Wo));
    for (int64_t i = 0; i < Ho; ++i) ty[static_cast<size_t>(i)] = detail::upsample_tap(i, H);
    for (int64_t i = 0; i < Wo; ++i) tx[static_cast<size_t>(i)] = detail::upsample_tap(i, W);
    for (int64_t nc = 0; nc < N * C; ++nc) {
        const T* gout = grad_out.data() + nc * Ho * Wo;
        T* gin = g.data() + nc * H * W;
        for (int64_t oy = 0; oy < Ho; ++oy) {
            const auto& sy = ty[static_cast<size_t>(oy)];
            const T wy1 = static_cast<T>(sy.w1), wy0 = T(1) - wy1;
            for (int64_t ox = 0; ox < Wo; ++ox) {
                const auto& sx = tx[static_cast<size_t>(ox)];
                const T wx1 = static_cast<T>(sx.w1), wx0 = T(1) - wx1;
                const T gv = gout[oy * Wo + ox];
                gin[sy.i0 * W + sx.i0] += wy0 * wx0 * gv;
                gin[sy.i0 * W + sx.i1] += wy0 * wx1 * gv;
                gin[sy.i1 * W + sx.i0] += wy1 * wx0 * gv;
                gin[sy.i1 * W + sx.i1] += wy1 * wx1 * gv;
            }
        }
    }
    return g;
}

template <typename T>
Tensor<T> residual_add(const Tensor<T>& x, const Tensor<T>& y) {
    require_same_shape(x, y, "residual_add");
    Tensor<T> out(x.shape());
    for (int64_t i = 0; i < x.numel(); ++i) out[i] = x[i] + y[i];
    return out;
}

// Concatenate along the channel axis; the U-net skip connections use this.
template <typename T>
Tensor<T> concat_channels(const Tensor<T>& a, const Tensor<T>& b) {
    if (a.rank() != 4 || b.rank() != 4 || a.dim(0) != b.dim(0) || a.dim(2) != b.dim(2) ||
        a.dim(3) != b.dim(3))
        throw ShapeError("concat_channels: incompatible shapes " + a.shape_str() +
                         " vs " + b.shape_str());
    const int64_t N = a.dim(0), Ca = a.dim(1), Cb = b.dim(1), H = a.dim(2), W = a.dim(3);
    Tensor<T> out({N, Ca + Cb, H, W});
    const int64_t plane = H * W;
    for (int64_t n = 0; n < N; ++n) {
        std::memcpy(out.data() + n * (Ca + Cb) * plane, a.data() + n * Ca * plane,
                    static_cast<size_t>(Ca * plane) * sizeof(T));
        std::memcpy(out.data() + (n * (Ca + Cb) + Ca) * plane, b.data() + n * Cb * plane,
                    static_cast<size_t>(Cb * plane) * sizeof(T));
    }
    return out;
}

template <typename T>
std::pair<Tensor<T>, Tensor<T>> concat_channels_backward(const Tensor<T>& grad_out,
                                                         int64_t channels_a) {
    const int64_t N = grad_out.dim(0), C = grad_out.dim(1), H = grad_out.dim(2),
                  W = grad_out.dim(3);
    const int64_t Cb = C - channels_a;
    Tensor<T> ga({N, channels_a, H, W});
    Tensor<T> gb({N, Cb, H, W});
    const int64_t plane = H * W;
    for (int64_t n = 0; n < N; ++n) {
        std::memcpy(ga.data() + n * channels_a * plane, grad_out.data() + n * C * plane,
                    static_cast<size_t>(channels_a * plane) * sizeof(T));
        std::memcpy(gb.data() + n * Cb * plane,
                    grad_out.data() + (n * C + channels_a) * plane,
                    static_cast<size_t>(Cb * plane) * sizeof(T));
    }
    return {std::move(ga), std::move(gb)};
}

// Mean pixel-wise binary cross entropy with the prediction clamped to
// [kBceEps, 1 - kBceEps]. Accumulated in double regardless of T.
template <typename T>
double bce_loss(const Tensor<T>& pred, const Tensor<T>& target) {
    require_same_shape(pred, target, "bce_loss");
    double sum = 0.0;
    for (int64_t i = 0; i < pred.numel(); ++i) {
        const double p = std::clamp(static_cast<double>(pred[i]), kBceEps, 1.0 - kBceEps);
        const double t = static_cast<double>(target[i]);
        sum -= t * std::log(p) + (1.0 - t) * std::log(1.0 - p);
    }
    return sum / static_cast<double>(pred.numel());
}

// d(mean BCE)/d(pred); zero where the clamp is active.
template <typename T>
Tensor<T> bce_loss_backward(const Tensor<T>& pred, const Tensor<T>& target) {
    require_same_shape(pred, target, "bce_loss_backward");
    Tensor<T> g(pred.shape());
    const double inv_n = 1.0 / static_cast<double>(pred.numel());
    for (int64_t i = 0; i < pred.numel(); ++i) {
        const double p = static_cast<double>(pred[i]);
        if (p <= kBceEps || p >= 1.0 - kBceEps) {
            g[i] = T(0);
            continue;
        }
        const double t = static_cast<double>(target[i]);
        g[i] = static_cast<T>((-t / p + (1.0 - t) / (1.0 - p)) * inv_n);
    }
    return g;
}

}  // namespace foldkit::nn
