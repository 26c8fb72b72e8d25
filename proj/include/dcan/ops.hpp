#pragma once

#include <span>
#include <utility>
#include <vector>

#include "dcan/rng.hpp"
#include "dcan/tensor.hpp"

namespace dcan {

// Convolution parameters. `kernel` has shape (outC, inC, kH, kW) for the
// forward convolution. For the transposed convolution the same record is
// read with dim 0 as its input channels and dim 1 as its output channels,
// so deconv2d_forward(., spec) is the exact adjoint of the linear part of
// conv2d_forward(., spec).
struct ConvSpec {
    Tensor kernel;
    std::vector<double> bias;
    int stride = 1;
    int padding = 0;
};

struct ConvGrads {
    Tensor grad_input;
    Tensor grad_kernel;
    std::vector<double> grad_bias;
};

// Cross-correlation with symmetric zero padding plus per-output-channel bias.
Tensor conv2d_forward(const Tensor& input, const ConvSpec& spec);
ConvGrads conv2d_backward(const Tensor& input, const ConvSpec& spec, const Tensor& grad_out);

// Backwards strided convolution. Output spatial size (H-1)*stride + kH - 2*padding.
// Bias length must equal kernel dim 1 (the deconvolution's output channels).
Tensor deconv2d_forward(const Tensor& input, const ConvSpec& spec);
ConvGrads deconv2d_backward(const Tensor& input, const ConvSpec& spec, const Tensor& grad_out);

struct PoolResult {
    Tensor output;
    std::vector<std::size_t> argmax;  // flat index into input.data per output element
};

// Max pooling; ties resolve to the smallest flat index so the backward
// gradient routing is deterministic.
PoolResult maxpool_forward(const Tensor& input, int window, int stride);
Tensor maxpool_backward(const Tensor& input, int window, int stride,
                        const std::vector<std::size_t>& argmax, const Tensor& grad_out);

Tensor relu(const Tensor& input);
Tensor relu_backward(const Tensor& input, const Tensor& grad_out);

// Inverted dropout: survivors are scaled by 1/(1-rate) at train time so
// inference is the identity. `mask_out`, when non-null, receives the
// applied per-element scale factors (0 or 1/(1-rate)) for the backward pass.
Tensor dropout(const Tensor& input, double rate, bool train_mode, Rng& rng,
               std::vector<double>* mask_out = nullptr);

struct XentResult {
    double loss = 0.0;          // summed over every pixel of the batch
    Tensor grad_logits;
    Tensor prob_fg;             // softmax probability of channel 1, shape (N,1,H,W)
};

// Per-pixel 2-way softmax followed by negative log-likelihood, summed over
// pixels. Labels are one plane per batch item with values in {0,1}.
XentResult softmax_xent(const Tensor& logits, const std::vector<int>& labels);

// Plain SGD with L2 weight decay: w <- w - lr*(g + decay*w). Callers pass
// decay = 0 for biases.
void sgd_step(std::span<double> params, std::span<const double> grads, double lr, double weight_decay);

}  // namespace dcan
