#include "dcan/ops.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

namespace dcan {

namespace {

void check_conv_spec(const ConvSpec& spec) {
    if (spec.stride < 1)
        throw std::invalid_argument("conv: stride must be >= 1, got " + std::to_string(spec.stride));
    if (spec.padding < 0)
        throw std::invalid_argument("conv: padding must be >= 0, got " + std::to_string(spec.padding));
    if (spec.kernel.n < 1 || spec.kernel.c < 1 || spec.kernel.h < 1 || spec.kernel.w < 1)
        throw std::invalid_argument("conv: kernel shape " + spec.kernel.shape_str() + " has empty dimension");
}

int conv_out_size(int in, int k, int stride, int pad) {
    return (in + 2 * pad - k) / stride + 1;
}

// Range of output positions o in [0, out) whose input index o*stride - pad + k
// stays inside [0, in): keeps the hot loops branch-free.
void valid_range(int out, int in, int stride, int pad, int k, int& lo, int& hi) {
    const int a = pad - k;  // need o*stride >= a
    lo = a > 0 ? (a + stride - 1) / stride : 0;
    const int b = in - 1 + pad - k;  // need o*stride <= b
    hi = b < 0 ? -1 : std::min(out - 1, b / stride);
}

}  // namespace

Tensor conv2d_forward(const Tensor& input, const ConvSpec& spec) {
    check_conv_spec(spec);
    const Tensor& k = spec.kernel;
    const int out_c = k.n, in_c = k.c, kh = k.h, kw = k.w;
    if (input.c != in_c)
        throw std::invalid_argument("conv2d: input channels " + std::to_string(input.c) +
                                    " != kernel inC " + std::to_string(in_c));
    if (static_cast<int>(spec.bias.size()) != out_c)
        throw std::invalid_argument("conv2d: bias length " + std::to_string(spec.bias.size()) +
                                    " != outC " + std::to_string(out_c));
    const int s = spec.stride, p = spec.padding;
    const int oh = conv_out_size(input.h, kh, s, p);
    const int ow = conv_out_size(input.w, kw, s, p);
    if (oh < 1 || ow < 1)
        throw std::invalid_argument("conv2d: output size " + std::to_string(oh) + "x" +
                                    std::to_string(ow) + " for input " + input.shape_str());

    Tensor out(input.n, out_c, oh, ow);
    for (int n = 0; n < input.n; ++n) {
        for (int oc = 0; oc < out_c; ++oc) {
            double* out_plane = &out.data[out.index(n, oc, 0, 0)];
            const double b = spec.bias[oc];
            for (int i = 0; i < oh * ow; ++i) out_plane[i] = b;
            for (int ic = 0; ic < in_c; ++ic) {
                const double* in_plane = &input.data[input.index(n, ic, 0, 0)];
                for (int ky = 0; ky < kh; ++ky) {
                    int oy_lo, oy_hi;
                    valid_range(oh, input.h, s, p, ky, oy_lo, oy_hi);
                    for (int kx = 0; kx < kw; ++kx) {
                        const double wv = k.at(oc, ic, ky, kx);
                        if (wv == 0.0) continue;
                        int ox_lo, ox_hi;
                        valid_range(ow, input.w, s, p, kx, ox_lo, ox_hi);
                        const int shift = kx - p;
                        for (int oy = oy_lo; oy <= oy_hi; ++oy) {
                            const int iy = oy * s - p + ky;
                            const double* in_row = in_plane + static_cast<std::size_t>(iy) * input.w;
                            double* out_row = out_plane + static_cast<std::size_t>(oy) * ow;
                            if (s == 1) {
                                for (int ox = ox_lo; ox <= ox_hi; ++ox)
                                    out_row[ox] += wv * in_row[ox + shift];
                            } else {
                                for (int ox = ox_lo; ox <= ox_hi; ++ox)
                                    out_row[ox] += wv * in_row[ox * s + shift];
                            }
                        }
                    }
                }
            }
        }
    }
    return out;
}

ConvGrads conv2d_backward(const Tensor& input, const ConvSpec& spec, const Tensor& grad_out) {
    check_conv_spec(spec);
    const Tensor& k = spec.kernel;
    const int out_c = k.n, in_c = k.c, kh = k.h, kw = k.w;
    if (input.c != in_c)
        throw std::invalid_argument("conv2d_backward: input channels " + std::to_string(input.c) +
                                    " != kernel inC " + std::to_string(in_c));
    const int s = spec.stride, p = spec.padding;
    const int oh = conv_out_size(input.h, kh, s, p);
    const int ow = conv_out_size(input.w, kw, s, p);
    require_shape(grad_out, input.n, out_c, oh, ow, "conv2d_backward grad_out");

    ConvGrads g;
    g.grad_input = Tensor(input.n, input.c, input.h, input.w);
    g.grad_kernel = Tensor(k.n, k.c, k.h, k.w);
    g.grad_bias.assign(out_c, 0.0);

    for (int n = 0; n < input.n; ++n) {
        for (int oc = 0; oc < out_c; ++oc) {
            const double* go_plane = &grad_out.data[grad_out.index(n, oc, 0, 0)];
            double bsum = 0.0;
            for (int i = 0; i < oh * ow; ++i) bsum += go_plane[i];
            g.grad_bias[oc] += bsum;
            for (int ic = 0; ic < in_c; ++ic) {
                const double* in_plane = &input.data[input.index(n, ic, 0, 0)];
                double* gi_plane = &g.grad_input.data[g.grad_input.index(n, ic, 0, 0)];
                for (int ky = 0; ky < kh; ++ky) {
                    int oy_lo, oy_hi;
                    valid_range(oh, input.h, s, p, ky, oy_lo, oy_hi);
                    for (int kx = 0; kx < kw; ++kx) {
                        const double wv = k.at(oc, ic, ky, kx);
                        int ox_lo, ox_hi;
                        valid_range(ow, input.w, s, p, kx, ox_lo, ox_hi);
                        const int shift = kx - p;
                        double wsum = 0.0;
                        for (int oy = oy_lo; oy <= oy_hi; ++oy) {
                            const int iy = oy * s - p + ky;
                            const double* in_row = in_plane + static_cast<std::size_t>(iy) * input.w;
                            double* gi_row = gi_plane + static_cast<std::size_t>(iy) * input.w;
                            const double* go_row = go_plane + static_cast<std::size_t>(oy) * ow;
                            if (s == 1) {
                                for (int ox = ox_lo; ox <= ox_hi; ++ox)
                                    wsum += in_row[ox + shift] * go_row[ox];
                                for (int ox = ox_lo; ox <= ox_hi; ++ox)
                                    gi_row[ox + shift] += wv * go_row[ox];
                            } else {
                                for (int ox = ox_lo; ox <= ox_hi; ++ox) {
                                    wsum += in_row[ox * s + shift] * go_row[ox];
                                    gi_row[ox * s + shift] += wv * go_row[ox];
                                }
                            }
                        }
                        g.grad_kernel.at(oc, ic, ky, kx) += wsum;
                    }
                }
            }
        }
    }
    return g;
}

namespace {

int deconv_out_size(int in, int k, int stride, int pad) {
    return (in - 1) * stride + k - 2 * pad;
}

}  // namespace

Tensor deconv2d_forward(const Tensor& input, const ConvSpec& spec) {
    check_conv_spec(spec);
    const Tensor& k = spec.kernel;
    const int in_c = k.n, out_c = k.c, kh = k.h, kw = k.w;
    if (input.c != in_c)
        throw std::invalid_argument("deconv2d: input channels " + std::to_string(input.c) +
                                    " != kernel dim0 " + std::to_string(in_c));
    if (static_cast<int>(spec.bias.size()) != out_c)
        throw std::invalid_argument("deconv2d: bias length " + std::to_string(spec.bias.size()) +
                                    " != outC " + std::to_string(out_c));
    const int s = spec.stride, p = spec.padding;
    const int oh = deconv_out_size(input.h, kh, s, p);
    const int ow = deconv_out_size(input.w, kw, s, p);
    if (oh < 1 || ow < 1)
        throw std::invalid_argument("deconv2d: output size " + std::to_string(oh) + "x" +
                                    std::to_string(ow) + " for input " + input.shape_str());

    Tensor out(input.n, out_c, oh, ow);
    // input-centric scatter: each input pixel adds a scaled kernel row per
    // output row, keeping both the kernel reads and output writes contiguous
    for (int n = 0; n < input.n; ++n) {
        for (int oc = 0; oc < out_c; ++oc) {
            double* out_plane = &out.data[out.index(n, oc, 0, 0)];
            const double b = spec.bias[oc];
            for (int i = 0; i < oh * ow; ++i) out_plane[i] = b;
        }
        for (int ic = 0; ic < in_c; ++ic) {
            const double* in_plane = &input.data[input.index(n, ic, 0, 0)];
            for (int iy = 0; iy < input.h; ++iy) {
                const int ky_lo = std::max(0, p - iy * s);
                const int ky_hi = std::min(kh - 1, oh - 1 + p - iy * s);
                for (int ix = 0; ix < input.w; ++ix) {
                    const double v = in_plane[static_cast<std::size_t>(iy) * input.w + ix];
                    if (v == 0.0) continue;
                    const int kx_lo = std::max(0, p - ix * s);
                    const int kx_hi = std::min(kw - 1, ow - 1 + p - ix * s);
                    if (kx_lo > kx_hi) continue;
                    const int ox0 = ix * s - p;
                    for (int oc = 0; oc < out_c; ++oc) {
                        double* out_plane = &out.data[out.index(n, oc, 0, 0)];
                        for (int ky = ky_lo; ky <= ky_hi; ++ky) {
                            const int oy = iy * s - p + ky;
                            double* out_row =
                                out_plane + static_cast<std::size_t>(oy) * ow + ox0;
                            const double* k_row = &k.data[k.index(ic, oc, ky, 0)];
                            for (int kx = kx_lo; kx <= kx_hi; ++kx)
                                out_row[kx] += v * k_row[kx];
                        }
                    }
                }
            }
        }
    }
    return out;
}

ConvGrads deconv2d_backward(const Tensor& input, const ConvSpec& spec, const Tensor& grad_out) {
    check_conv_spec(spec);
    const Tensor& k = spec.kernel;
    const int in_c = k.n, out_c = k.c, kh = k.h, kw = k.w;
    if (input.c != in_c)
        throw std::invalid_argument("deconv2d_backward: input channels " + std::to_string(input.c) +
                                    " != kernel dim0 " + std::to_string(in_c));
    const int s = spec.stride, p = spec.padding;
    const int oh = deconv_out_size(input.h, kh, s, p);
    const int ow = deconv_out_size(input.w, kw, s, p);
    require_shape(grad_out, input.n, out_c, oh, ow, "deconv2d_backward grad_out");

    ConvGrads g;
    g.grad_input = Tensor(input.n, input.c, input.h, input.w);
    g.grad_kernel = Tensor(k.n, k.c, k.h, k.w);
    g.grad_bias.assign(out_c, 0.0);

    for (int n = 0; n < input.n; ++n) {
        for (int oc = 0; oc < out_c; ++oc) {
            const double* go_plane = &grad_out.data[grad_out.index(n, oc, 0, 0)];
            double bsum = 0.0;
            for (int i = 0; i < oh * ow; ++i) bsum += go_plane[i];
            g.grad_bias[oc] += bsum;
        }
        // per input pixel: the kernel-row dot with grad_out accumulates
        // grad_input, the input-scaled grad_out row accumulates grad_kernel
        for (int ic = 0; ic < in_c; ++ic) {
            const double* in_plane = &input.data[input.index(n, ic, 0, 0)];
            double* gi_plane = &g.grad_input.data[g.grad_input.index(n, ic, 0, 0)];
            for (int iy = 0; iy < input.h; ++iy) {
                const int ky_lo = std::max(0, p - iy * s);
                const int ky_hi = std::min(kh - 1, oh - 1 + p - iy * s);
                for (int ix = 0; ix < input.w; ++ix) {
                    const double v = in_plane[static_cast<std::size_t>(iy) * input.w + ix];
                    const int kx_lo = std::max(0, p - ix * s);
                    const int kx_hi = std::min(kw - 1, ow - 1 + p - ix * s);
                    if (kx_lo > kx_hi || ky_lo > ky_hi) continue;
                    const int ox0 = ix * s - p;
                    double gi_acc = 0.0;
                    for (int oc = 0; oc < out_c; ++oc) {
                        const double* go_plane = &grad_out.data[grad_out.index(n, oc, 0, 0)];
                        for (int ky = ky_lo; ky <= ky_hi; ++ky) {
                            const int oy = iy * s - p + ky;
                            const double* go_row =
                                go_plane + static_cast<std::size_t>(oy) * ow + ox0;
                            const double* k_row = &k.data[k.index(ic, oc, ky, 0)];
                            double* gk_row = &g.grad_kernel.data[g.grad_kernel.index(ic, oc, ky, 0)];
                            for (int kx = kx_lo; kx <= kx_hi; ++kx) {
                                gi_acc += k_row[kx] * go_row[kx];
                                gk_row[kx] += v * go_row[kx];
                            }
                        }
                    }
                    gi_plane[static_cast<std::size_t>(iy) * input.w + ix] += gi_acc;
                }
            }
        }
    }
    return g;
}

PoolResult maxpool_forward(const Tensor& input, int window, int stride) {
    if (window < 1 || stride < 1)
        throw std::invalid_argument("maxpool: window and stride must be >= 1");
    if (window > input.h || window > input.w)
        throw std::invalid_argument("maxpool: window " + std::to_string(window) +
                                    " exceeds input " + input.shape_str());
    const int oh = (input.h - window) / stride + 1;
    const int ow = (input.w - window) / stride + 1;

    PoolResult r;
    r.output = Tensor(input.n, input.c, oh, ow);
    r.argmax.assign(r.output.size(), 0);
    std::size_t oi = 0;
    for (int n = 0; n < input.n; ++n) {
        for (int c = 0; c < input.c; ++c) {
            for (int oy = 0; oy < oh; ++oy) {
                for (int ox = 0; ox < ow; ++ox, ++oi) {
                    double best = -std::numeric_limits<double>::infinity();
                    std::size_t best_idx = 0;
                    for (int ky = 0; ky < window; ++ky) {
                        for (int kx = 0; kx < window; ++kx) {
                            const std::size_t idx =
                                input.index(n, c, oy * stride + ky, ox * stride + kx);
                            if (input.data[idx] > best) {
                                best = input.data[idx];
                                best_idx = idx;
                            }
                        }
                    }
                    r.output.data[oi] = best;
                    r.argmax[oi] = best_idx;
                }
            }
        }
    }
    return r;
}

Tensor maxpool_backward(const Tensor& input, int window, int stride,
                        const std::vector<std::size_t>& argmax, const Tensor& grad_out) {
    const int oh = (input.h - window) / stride + 1;
    const int ow = (input.w - window) / stride + 1;
    require_shape(grad_out, input.n, input.c, oh, ow, "maxpool_backward grad_out");
    if (argmax.size() != grad_out.size())
        throw std::invalid_argument("maxpool_backward: argmax size mismatch");
    Tensor g(input.n, input.c, input.h, input.w);
    for (std::size_t i = 0; i < argmax.size(); ++i) g.data[argmax[i]] += grad_out.data[i];
    return g;
}

Tensor relu(const Tensor& input) {
    Tensor out = input;
    for (double& v : out.data)
        if (v < 0.0) v = 0.0;
    return out;
}

Tensor relu_backward(const Tensor& input, const Tensor& grad_out) {
    if (!input.same_shape(grad_out))
        throw std::invalid_argument("relu_backward: shape mismatch " + input.shape_str() +
                                    " vs " + grad_out.shape_str());
    Tensor g = grad_out;
    for (std::size_t i = 0; i < g.data.size(); ++i)
        if (input.data[i] <= 0.0) g.data[i] = 0.0;
    return g;
}

Tensor dropout(const Tensor& input, double rate, bool train_mode, Rng& rng,
               std::vector<double>* mask_out) {
    if (rate < 0.0 || rate >= 1.0)
        throw std::invalid_argument("dropout: rate must be in [0,1), got " + std::to_string(rate));
    if (!train_mode || rate == 0.0) {
        if (mask_out) mask_out->assign(input.size(), 1.0);
        return input;
    }
    const double keep_scale = 1.0 / (1.0 - rate);
    Tensor out = input;
    if (mask_out) mask_out->assign(input.size(), 0.0);
    for (std::size_t i = 0; i < out.data.size(); ++i) {
        if (rng.uniform() < rate) {
            out.data[i] = 0.0;
        } else {
            out.data[i] *= keep_scale;
            if (mask_out) (*mask_out)[i] = keep_scale;
        }
    }
    return out;
}

XentResult softmax_xent(const Tensor& logits, const std::vector<int>& labels) {
    if (logits.c != 2)
        throw std::invalid_argument("softmax_xent: expected 2 channels, got " +
                                    std::to_string(logits.c));
    const std::size_t plane = static_cast<std::size_t>(logits.h) * logits.w;
    if (labels.size() != plane * logits.n)
        throw std::invalid_argument("softmax_xent: label count " + std::to_string(labels.size()) +
                                    " != pixel count " + std::to_string(plane * logits.n));

    XentResult r;
    r.grad_logits = Tensor(logits.n, 2, logits.h, logits.w);
    r.prob_fg = Tensor(logits.n, 1, logits.h, logits.w);
    std::size_t li = 0;
    for (int n = 0; n < logits.n; ++n) {
        const double* z0 = &logits.data[logits.index(n, 0, 0, 0)];
        const double* z1 = &logits.data[logits.index(n, 1, 0, 0)];
        double* g0 = &r.grad_logits.data[r.grad_logits.index(n, 0, 0, 0)];
        double* g1 = &r.grad_logits.data[r.grad_logits.index(n, 1, 0, 0)];
        double* pf = &r.prob_fg.data[r.prob_fg.index(n, 0, 0, 0)];
        for (std::size_t i = 0; i < plane; ++i, ++li) {
            const int label = labels[li];
            if (label != 0 && label != 1)
                throw std::invalid_argument("softmax_xent: label " + std::to_string(label) +
                                            " outside {0,1} at pixel " + std::to_string(li));
            const double m = std::max(z0[i], z1[i]);
            const double e0 = std::exp(z0[i] - m);
            const double e1 = std::exp(z1[i] - m);
            const double sum = e0 + e1;
            const double p0 = e0 / sum;
            const double p1 = e1 / sum;
            pf[i] = p1;
            // -log p_label, written against the stabilized form
            const double zl = label == 1 ? z1[i] : z0[i];
            r.loss += -(zl - m - std::log(sum));
            g0[i] = p0 - (label == 0 ? 1.0 : 0.0);
            g1[i] = p1 - (label == 1 ? 1.0 : 0.0);
        }
    }
    return r;
}

void sgd_step(std::span<double> params, std::span<const double> grads, double lr,
              double weight_decay) {
    if (params.size() != grads.size())
        throw std::invalid_argument("sgd_step: params/grads size mismatch");
    for (std::size_t i = 0; i < params.size(); ++i)
        params[i] -= lr * (grads[i] + weight_decay * params[i]);
}

}  // namespace dcan
