#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "dcan/augment.hpp"
#include "dcan/image.hpp"
#include "dcan/mask.hpp"
#include "dcan/ops.hpp"
#include "dcan/rng.hpp"
#include "dcan/tensor.hpp"

namespace dcan {

// Learning-rate and auxiliary discount-weight schedules. Both are
// non-increasing step functions bounded below by their floors. The discount
// weight decays on a fixed iteration interval; the learning rate drops when
// the windowed mean loss stops improving.
struct TrainSchedule {
    double lr0 = 2e-5;
    double lr_drop_factor = 10.0;
    double lr_floor = 1e-7;
    int lr_patience = 200;              // iterations per plateau window
    double lr_min_rel_improve = 0.001;  // required relative improvement per window
    double wa0 = 1.0;
    double wa_drop_factor = 10.0;
    int wa_interval = 10000;
    double wa_floor = 1e-3;
    long max_iters = 2000;

    double wa_at(long iter) const;
    void validate() const;
};

struct DcanConfig {
    int input_size = 64;
    int input_channels = 3;
    int num_pool_stages = 3;
    std::vector<int> channels_per_stage = {16, 32, 64};
    int convs_per_stage = 2;
    std::vector<int> branch_taps = {2, 3};  // 1-based stage indices, ascending
    int upsample_channels = 16;
    double dropout_rate = 0.5;
    double lambda = 5e-4;
    TrainSchedule schedule;

    void validate() const;
};

struct ConvParam {
    Tensor kernel;
    std::vector<double> bias;
    int stride = 1;
    int padding = 0;

    ConvSpec spec() const { return ConvSpec{kernel, bias, stride, padding}; }
};

// One multi-level prediction head: a single transposed convolution restoring
// full resolution followed by a 1x1 two-way classifier (the auxiliary
// classifier attached to this tap).
struct TapHead {
    int stage = 0;  // trunk stage whose pooled features feed this head
    ConvParam deconv;
    ConvParam score;
};

// Parameters partition into the shared downsampling path and the two
// branch-specific upsampling paths; a training step updates the shared part
// from both branches and each branch part from its own loss terms only.
struct DcanModel {
    DcanConfig config;
    std::vector<std::vector<ConvParam>> stages;  // shared downsampling path
    std::vector<TapHead> object_taps;
    std::vector<TapHead> contour_taps;
};

// Flat view over every parameter array in canonical (checkpoint) order.
struct ParamEntry {
    std::string name;
    double* data;
    std::size_t count;
    std::array<int, 4> shape;
    bool is_weight;  // weight decay applies (biases excluded)
};
std::vector<ParamEntry> enumerate_params(DcanModel& model);

struct LabelPair {
    BinaryMask object_labels;
    BinaryMask contour_labels;
};

// Object plane = any positive label; contour plane = instance boundaries
// dilated by disk(radius).
LabelPair make_label_pair(const InstanceMask& instances, int contour_radius = 3);

// Activations retained by a forward pass for back-propagation.
struct StageCache {
    std::vector<Tensor> conv_in;
    std::vector<Tensor> conv_pre;  // pre-activation
    Tensor pool_in;
    std::vector<std::size_t> pool_argmax;
    Tensor stage_out;  // pooled
};

struct TapCache {
    Tensor deconv_pre;
    std::vector<double> drop_mask;
    Tensor score_in;  // after activation and dropout
    Tensor score;     // (1,2,S,S)
};

struct ForwardCache {
    Tensor input;
    std::vector<StageCache> stages;
    std::vector<TapCache> object_taps;
    std::vector<TapCache> contour_taps;
    Tensor fused_object;   // summed tap scores
    Tensor fused_contour;
};

struct LossBreakdown {
    double total = 0.0;
    double regularizer = 0.0;
    double fused_object = 0.0;   // summed cross-entropy over pixels
    double fused_contour = 0.0;
    std::vector<double> aux_object;   // per tap, unweighted
    std::vector<double> aux_contour;
    double w_a = 0.0;
    long pixels = 0;

    double per_pixel_object() const { return fused_object / pixels; }
    double per_pixel_contour() const { return fused_contour / pixels; }
};

// All weights Gaussian(0, sqrt(2/fan_in)), biases zero; same seed gives
// bit-identical parameters.
DcanModel build_model(const DcanConfig& config, Rng& rng);

long parameter_count(const DcanConfig& config);

ForwardCache forward_cached(const DcanModel& model, const Tensor& image, bool train_mode, Rng& rng);

// Softmax maps of the fused scores plus each tap's own (auxiliary) map.
ProbabilityMaps maps_from_cache(const ForwardCache& cache);
ProbabilityMaps forward(const DcanModel& model, const Tensor& image, bool train_mode, Rng& rng);

LossBreakdown total_loss(const DcanModel& model, const ForwardCache& cache,
                         const LabelPair& labels, double w_a);

// Gradient of the loss for every parameter, laid out like the model
// (enumerate_params on the result aligns with the model's entries). When
// `with_reg_grad` is set the regularizer gradient lambda*w is folded into the
// weight gradients, giving the exact gradient of LossBreakdown::total; the
// training loop instead leaves it to sgd_step's weight-decay term. The branch
// weights scale each branch's data terms (used by the partition tests).
struct LossAndGrads {
    LossBreakdown loss;
    DcanModel grads;
};
LossAndGrads loss_and_gradients(const DcanModel& model, const ForwardCache& cache,
                                const LabelPair& labels, double w_a,
                                bool with_reg_grad = false,
                                double branch_weight_object = 1.0,
                                double branch_weight_contour = 1.0);

struct TrainOptions {
    int contour_radius = 3;
    bool augment_enabled = false;
    AugmentSpec augment_spec;
    std::function<void(long, double, double, double)> on_progress;  // iter, loss, lr, wa
    long progress_every = 0;
    // Periodic access to the evolving model (evaluation snapshots).
    std::function<void(long, const DcanModel&)> on_snapshot;
    long snapshot_every = 0;
};

struct TrainResult {
    std::vector<double> loss_curve;             // total loss per iteration
    std::vector<double> object_xent_per_pixel;  // fused object branch
    std::vector<double> contour_xent_per_pixel;
    std::vector<double> lr_curve;
    std::vector<double> wa_curve;
};

// One crop per iteration: sample -> crop -> optional augmentation -> forward
// -> loss -> backward -> SGD with the current schedules. Aborts on a
// non-finite loss, naming the iteration.
TrainResult train(DcanModel& model, const std::vector<Sample>& dataset,
                  const TrainSchedule& schedule, Rng& rng, const TrainOptions& opts = {});

// Overlap-tile inference: tiles of config.input_size at the given stride,
// edge tiles shifted in-bounds, probabilities averaged over covering tiles.
// Images smaller than the tile are reflect-padded and cropped back.
ProbabilityMaps predict_tiled(const DcanModel& model, const ImageRgb& image, int tile, int stride);

// Checkpoint: magic line `DCAN-CKPT v1`, then per-parameter records
// `name n c h w` followed by little-endian doubles. Byte-exact round-trip.
void save_checkpoint(const std::string& path, DcanModel& model);
DcanModel load_checkpoint(const std::string& path, int input_size);

}  // namespace dcan
