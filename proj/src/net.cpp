#include "dcan/net.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <stdexcept>

#include "dcan/image_io.hpp"
#include "dcan/morphology.hpp"

namespace dcan {

void TrainSchedule::validate() const {
    if (lr0 < 0 || lr_floor < 0 || lr0 < lr_floor)
        throw std::invalid_argument("schedule: need lr0 >= lr_floor >= 0");
    if (lr_drop_factor <= 1.0 || wa_drop_factor <= 1.0)
        throw std::invalid_argument("schedule: drop factors must be > 1");
    if (lr_patience < 1) throw std::invalid_argument("schedule: lr_patience must be >= 1");
    if (wa0 < wa_floor || wa_floor < 0)
        throw std::invalid_argument("schedule: need wa0 >= wa_floor >= 0");
    if (wa_interval < 1) throw std::invalid_argument("schedule: wa_interval must be >= 1");
    if (max_iters < 0) throw std::invalid_argument("schedule: max_iters must be >= 0");
}

double TrainSchedule::wa_at(long iter) const {
    const long steps = iter / wa_interval;
    double w = wa0;
    for (long i = 0; i < steps; ++i) {
        w /= wa_drop_factor;
        if (w <= wa_floor) return wa_floor;
    }
    return std::max(w, wa_floor);
}

void DcanConfig::validate() const {
    if (input_size < 4) throw std::invalid_argument("config: input_size too small");
    if (input_channels < 1) throw std::invalid_argument("config: input_channels must be >= 1");
    if (num_pool_stages < 1) throw std::invalid_argument("config: num_pool_stages must be >= 1");
    if (static_cast<int>(channels_per_stage.size()) != num_pool_stages)
        throw std::invalid_argument("config: channels_per_stage must list one width per stage");
    for (int c : channels_per_stage)
        if (c < 1) throw std::invalid_argument("config: channel widths must be >= 1");
    if (convs_per_stage < 1) throw std::invalid_argument("config: convs_per_stage must be >= 1");
    if (branch_taps.empty()) throw std::invalid_argument("config: need at least one branch tap");
    int prev = 0;
    for (int t : branch_taps) {
        if (t < 1 || t > num_pool_stages)
            throw std::invalid_argument("config: tap " + std::to_string(t) +
                                        " outside stages 1.." + std::to_string(num_pool_stages));
        if (t <= prev) throw std::invalid_argument("config: branch_taps must be strictly ascending");
        prev = t;
    }
    if (input_size % (1 << num_pool_stages) != 0)
        throw std::invalid_argument("config: input_size " + std::to_string(input_size) +
                                    " not divisible by 2^" + std::to_string(num_pool_stages));
    if (upsample_channels < 1) throw std::invalid_argument("config: upsample_channels must be >= 1");
    if (dropout_rate < 0.0 || dropout_rate >= 1.0)
        throw std::invalid_argument("config: dropout_rate must be in [0,1)");
    if (lambda < 0.0) throw std::invalid_argument("config: lambda must be >= 0");
    schedule.validate();
}

namespace {

int stage_in_channels(const DcanConfig& cfg, int stage_idx, int conv_idx) {
    if (conv_idx > 0) return cfg.channels_per_stage[stage_idx];
    return stage_idx == 0 ? cfg.input_channels : cfg.channels_per_stage[stage_idx - 1];
}

// Deconvolution geometry for a tap at stage t (1-based): stride 2^t,
// kernel 2*stride, padding stride/2, which restores full resolution exactly.
void tap_geometry(int stage, int& stride, int& kernel, int& padding) {
    stride = 1 << stage;
    kernel = 2 * stride;
    padding = stride / 2;
}

DcanModel make_skeleton(const DcanConfig& cfg) {
    cfg.validate();
    DcanModel m;
    m.config = cfg;
    m.stages.resize(cfg.num_pool_stages);
    for (int s = 0; s < cfg.num_pool_stages; ++s) {
        for (int j = 0; j < cfg.convs_per_stage; ++j) {
            ConvParam p;
            p.kernel = Tensor(cfg.channels_per_stage[s], stage_in_channels(cfg, s, j), 3, 3);
            p.bias.assign(cfg.channels_per_stage[s], 0.0);
            p.stride = 1;
            p.padding = 1;
            m.stages[s].push_back(std::move(p));
        }
    }
    auto make_taps = [&](std::vector<TapHead>& taps) {
        for (int t : cfg.branch_taps) {
            TapHead head;
            head.stage = t;
            int stride, kernel, padding;
            tap_geometry(t, stride, kernel, padding);
            head.deconv.kernel = Tensor(cfg.channels_per_stage[t - 1], cfg.upsample_channels,
                                        kernel, kernel);
            head.deconv.bias.assign(cfg.upsample_channels, 0.0);
            head.deconv.stride = stride;
            head.deconv.padding = padding;
            head.score.kernel = Tensor(2, cfg.upsample_channels, 1, 1);
            head.score.bias.assign(2, 0.0);
            head.score.stride = 1;
            head.score.padding = 0;
            taps.push_back(std::move(head));
        }
    };
    make_taps(m.object_taps);
    make_taps(m.contour_taps);
    return m;
}

DcanModel zeros_like(const DcanModel& model) {
    DcanModel g = model;
    auto clear = [](ConvParam& p) {
        std::fill(p.kernel.data.begin(), p.kernel.data.end(), 0.0);
        std::fill(p.bias.begin(), p.bias.end(), 0.0);
    };
    for (auto& st : g.stages)
        for (auto& p : st) clear(p);
    for (auto& t : g.object_taps) {
        clear(t.deconv);
        clear(t.score);
    }
    for (auto& t : g.contour_taps) {
        clear(t.deconv);
        clear(t.score);
    }
    return g;
}

}  // namespace

std::vector<ParamEntry> enumerate_params(DcanModel& model) {
    std::vector<ParamEntry> out;
    auto add = [&out](const std::string& name, ConvParam& p) {
        out.push_back({name + ".kernel", p.kernel.data.data(), p.kernel.size(),
                       {p.kernel.n, p.kernel.c, p.kernel.h, p.kernel.w}, true});
        out.push_back({name + ".bias", p.bias.data(), p.bias.size(),
                       {1, 1, 1, static_cast<int>(p.bias.size())}, false});
    };
    for (std::size_t s = 0; s < model.stages.size(); ++s)
        for (std::size_t j = 0; j < model.stages[s].size(); ++j)
            add("stage" + std::to_string(s + 1) + ".conv" + std::to_string(j + 1),
                model.stages[s][j]);
    auto add_branch = [&](const char* branch, std::vector<TapHead>& taps) {
        for (auto& t : taps) {
            const std::string base = std::string(branch) + ".tap" + std::to_string(t.stage);
            add(base + ".deconv", t.deconv);
            add(base + ".score", t.score);
        }
    };
    add_branch("object", model.object_taps);
    add_branch("contour", model.contour_taps);
    return out;
}

long parameter_count(const DcanConfig& cfg) {
    cfg.validate();
    long n = 0;
    for (int s = 0; s < cfg.num_pool_stages; ++s)
        for (int j = 0; j < cfg.convs_per_stage; ++j)
            n += static_cast<long>(cfg.channels_per_stage[s]) * stage_in_channels(cfg, s, j) * 9 +
                 cfg.channels_per_stage[s];
    for (int t : cfg.branch_taps) {
        int stride, kernel, padding;
        tap_geometry(t, stride, kernel, padding);
        const long deconv = static_cast<long>(cfg.channels_per_stage[t - 1]) *
                                cfg.upsample_channels * kernel * kernel +
                            cfg.upsample_channels;
        const long score = static_cast<long>(cfg.upsample_channels) * 2 + 2;
        n += 2 * (deconv + score);  // both branches
    }
    return n;
}

DcanModel build_model(const DcanConfig& config, Rng& rng) {
    DcanModel m = make_skeleton(config);
    // fan_in per layer: inC*kH*kW for convolutions; for the strided
    // deconvolutions each output element sees inC*(k/stride)^2 inputs.
    auto init = [&rng](ConvParam& p, bool deconv) {
        const double taps_per_out =
            deconv ? static_cast<double>(p.kernel.h / p.stride) * (p.kernel.w / p.stride)
                   : static_cast<double>(p.kernel.h) * p.kernel.w;
        const double fan_in = (deconv ? p.kernel.n : p.kernel.c) * taps_per_out;
        const double sigma = std::sqrt(2.0 / fan_in);
        for (double& v : p.kernel.data) v = rng.gaussian(0.0, sigma);
    };
    for (auto& st : m.stages)
        for (auto& p : st) init(p, false);
    for (auto* taps : {&m.object_taps, &m.contour_taps})
        for (auto& t : *taps) {
            init(t.deconv, true);
            init(t.score, false);
        }
    return m;
}

LabelPair make_label_pair(const InstanceMask& instances, int contour_radius) {
    LabelPair lp;
    lp.object_labels = instances.foreground();
    lp.contour_labels = extract_contour_labels(instances, contour_radius);
    return lp;
}

namespace {

std::vector<int> mask_to_labels(const BinaryMask& m) {
    std::vector<int> v(m.bits.size());
    for (std::size_t i = 0; i < v.size(); ++i) v[i] = m.bits[i];
    return v;
}

// Tap head forward: deconv -> relu -> dropout -> 1x1 score.
TapCache run_tap(const TapHead& head, const Tensor& features, double dropout_rate,
                 bool train_mode, Rng& rng) {
    TapCache c;
    c.deconv_pre = deconv2d_forward(features, head.deconv.spec());
    Tensor activated = relu(c.deconv_pre);
    c.score_in = dropout(activated, dropout_rate, train_mode, rng, &c.drop_mask);
    c.score = conv2d_forward(c.score_in, head.score.spec());
    return c;
}

void accumulate(Tensor& into, const Tensor& v) {
    for (std::size_t i = 0; i < into.data.size(); ++i) into.data[i] += v.data[i];
}

std::vector<double> softmax_fg(const Tensor& score) {
    const std::size_t plane = static_cast<std::size_t>(score.h) * score.w;
    std::vector<double> p(plane);
    const double* z0 = &score.data[0];
    const double* z1 = &score.data[plane];
    for (std::size_t i = 0; i < plane; ++i) {
        const double m = std::max(z0[i], z1[i]);
        const double e0 = std::exp(z0[i] - m);
        const double e1 = std::exp(z1[i] - m);
        p[i] = e1 / (e0 + e1);
    }
    return p;
}

}  // namespace

ForwardCache forward_cached(const DcanModel& model, const Tensor& image, bool train_mode,
                            Rng& rng) {
    const DcanConfig& cfg = model.config;
    require_shape(image, 1, cfg.input_channels, cfg.input_size, cfg.input_size, "forward input");

    ForwardCache cache;
    cache.input = image;
    Tensor cur = image;
    for (int s = 0; s < cfg.num_pool_stages; ++s) {
        StageCache sc;
        for (int j = 0; j < cfg.convs_per_stage; ++j) {
            sc.conv_in.push_back(cur);
            Tensor pre = conv2d_forward(cur, model.stages[s][j].spec());
            cur = relu(pre);
            sc.conv_pre.push_back(std::move(pre));
        }
        sc.pool_in = cur;
        PoolResult pr = maxpool_forward(cur, 2, 2);
        sc.pool_argmax = std::move(pr.argmax);
        sc.stage_out = std::move(pr.output);
        cur = sc.stage_out;
        cache.stages.push_back(std::move(sc));
    }

    auto run_branch = [&](const std::vector<TapHead>& taps, std::vector<TapCache>& out,
                          Tensor& fused) {
        fused = Tensor(1, 2, cfg.input_size, cfg.input_size);
        for (const TapHead& head : taps) {
            TapCache tc = run_tap(head, cache.stages[head.stage - 1].stage_out, cfg.dropout_rate,
                                  train_mode, rng);
            accumulate(fused, tc.score);
            out.push_back(std::move(tc));
        }
    };
    run_branch(model.object_taps, cache.object_taps, cache.fused_object);
    run_branch(model.contour_taps, cache.contour_taps, cache.fused_contour);
    return cache;
}

ProbabilityMaps maps_from_cache(const ForwardCache& cache) {
    ProbabilityMaps maps(cache.fused_object.w, cache.fused_object.h);
    maps.p_object = softmax_fg(cache.fused_object);
    maps.p_contour = softmax_fg(cache.fused_contour);
    for (const TapCache& t : cache.object_taps) maps.aux_object.push_back(softmax_fg(t.score));
    for (const TapCache& t : cache.contour_taps) maps.aux_contour.push_back(softmax_fg(t.score));
    return maps;
}

ProbabilityMaps forward(const DcanModel& model, const Tensor& image, bool train_mode, Rng& rng) {
    return maps_from_cache(forward_cached(model, image, train_mode, rng));
}

namespace {

double weight_norm_sq(const DcanModel& model) {
    double acc = 0.0;
    auto add = [&acc](const ConvParam& p) {
        for (double v : p.kernel.data) acc += v * v;
    };
    for (const auto& st : model.stages)
        for (const auto& p : st) add(p);
    for (const auto& t : model.object_taps) {
        add(t.deconv);
        add(t.score);
    }
    for (const auto& t : model.contour_taps) {
        add(t.deconv);
        add(t.score);
    }
    return acc;
}

}  // namespace

LossAndGrads loss_and_gradients(const DcanModel& model, const ForwardCache& cache,
                                const LabelPair& labels, double w_a, bool with_reg_grad,
                                double branch_weight_object, double branch_weight_contour) {
    const DcanConfig& cfg = model.config;
    if (labels.object_labels.width != cfg.input_size ||
        labels.object_labels.height != cfg.input_size ||
        labels.contour_labels.width != cfg.input_size ||
        labels.contour_labels.height != cfg.input_size)
        throw std::invalid_argument("loss: label planes must match the input crop");

    LossAndGrads out;
    out.grads = zeros_like(model);
    out.loss.w_a = w_a;
    out.loss.pixels = static_cast<long>(cfg.input_size) * cfg.input_size;
    out.loss.regularizer = 0.5 * cfg.lambda * weight_norm_sq(model);

    // Gradients w.r.t. each stage's pooled output, accumulated across taps
    // of both branches before the trunk sweep.
    std::vector<Tensor> trunk_grad(cfg.num_pool_stages);
    for (int s = 0; s < cfg.num_pool_stages; ++s) {
        const Tensor& so = cache.stages[s].stage_out;
        trunk_grad[s] = Tensor(so.n, so.c, so.h, so.w);
    }

    struct BranchRefs {
        const std::vector<TapHead>* heads;
        const std::vector<TapCache>* caches;
        const Tensor* fused;
        const BinaryMask* labels;
        double weight;
        std::vector<TapHead>* grad_heads;
        double* fused_loss;
        std::vector<double>* aux_losses;
    };
    BranchRefs branches[2] = {
        {&model.object_taps, &cache.object_taps, &cache.fused_object, &labels.object_labels,
         branch_weight_object, &out.grads.object_taps, &out.loss.fused_object,
         &out.loss.aux_object},
        {&model.contour_taps, &cache.contour_taps, &cache.fused_contour, &labels.contour_labels,
         branch_weight_contour, &out.grads.contour_taps, &out.loss.fused_contour,
         &out.loss.aux_contour},
    };

    double data_total = 0.0;
    for (BranchRefs& br : branches) {
        const std::vector<int> label_vec = mask_to_labels(*br.labels);
        const XentResult fused_xent = softmax_xent(*br.fused, label_vec);
        *br.fused_loss = fused_xent.loss;
        data_total += br.weight * fused_xent.loss;
        for (std::size_t i = 0; i < br.heads->size(); ++i) {
            const TapHead& head = (*br.heads)[i];
            const TapCache& tc = (*br.caches)[i];
            const XentResult aux_xent = softmax_xent(tc.score, label_vec);
            br.aux_losses->push_back(aux_xent.loss);
            data_total += br.weight * w_a * aux_xent.loss;

            // The fused map is a plain sum of tap scores, so its gradient
            // reaches every tap unchanged; the auxiliary term adds w_a of
            // this tap's own softmax gradient.
            Tensor g_score = fused_xent.grad_logits;
            for (std::size_t k = 0; k < g_score.data.size(); ++k)
                g_score.data[k] =
                    br.weight * (g_score.data[k] + w_a * aux_xent.grad_logits.data[k]);

            const ConvGrads sg = conv2d_backward(tc.score_in, head.score.spec(), g_score);
            TapHead& gh = (*br.grad_heads)[i];
            gh.score.kernel = sg.grad_kernel;
            gh.score.bias = sg.grad_bias;

            Tensor g = sg.grad_input;
            if (!tc.drop_mask.empty())
                for (std::size_t k = 0; k < g.data.size(); ++k) g.data[k] *= tc.drop_mask[k];
            g = relu_backward(tc.deconv_pre, g);

            const Tensor& features = cache.stages[head.stage - 1].stage_out;
            const ConvGrads dg = deconv2d_backward(features, head.deconv.spec(), g);
            gh.deconv.kernel = dg.grad_kernel;
            gh.deconv.bias = dg.grad_bias;
            accumulate(trunk_grad[head.stage - 1], dg.grad_input);
        }
    }

    // Trunk sweep, deepest stage first.
    Tensor g_down;
    for (int s = cfg.num_pool_stages - 1; s >= 0; --s) {
        Tensor g = std::move(trunk_grad[s]);
        if (s < cfg.num_pool_stages - 1) accumulate(g, g_down);
        const StageCache& sc = cache.stages[s];
        g = maxpool_backward(sc.pool_in, 2, 2, sc.pool_argmax, g);
        for (int j = cfg.convs_per_stage - 1; j >= 0; --j) {
            g = relu_backward(sc.conv_pre[j], g);
            const ConvGrads cg = conv2d_backward(sc.conv_in[j], model.stages[s][j].spec(), g);
            out.grads.stages[s][j].kernel = cg.grad_kernel;
            out.grads.stages[s][j].bias = cg.grad_bias;
            g = cg.grad_input;
        }
        g_down = std::move(g);
    }

    out.loss.total = out.loss.regularizer + data_total;

    if (with_reg_grad) {
        DcanModel& gm = out.grads;
        auto add_decay = [&](ConvParam& gp, const ConvParam& mp) {
            for (std::size_t i = 0; i < gp.kernel.data.size(); ++i)
                gp.kernel.data[i] += cfg.lambda * mp.kernel.data[i];
        };
        for (std::size_t s = 0; s < gm.stages.size(); ++s)
            for (std::size_t j = 0; j < gm.stages[s].size(); ++j)
                add_decay(gm.stages[s][j], model.stages[s][j]);
        for (std::size_t i = 0; i < gm.object_taps.size(); ++i) {
            add_decay(gm.object_taps[i].deconv, model.object_taps[i].deconv);
            add_decay(gm.object_taps[i].score, model.object_taps[i].score);
        }
        for (std::size_t i = 0; i < gm.contour_taps.size(); ++i) {
            add_decay(gm.contour_taps[i].deconv, model.contour_taps[i].deconv);
            add_decay(gm.contour_taps[i].score, model.contour_taps[i].score);
        }
    }
    return out;
}

LossBreakdown total_loss(const DcanModel& model, const ForwardCache& cache,
                         const LabelPair& labels, double w_a) {
    return loss_and_gradients(model, cache, labels, w_a).loss;
}

TrainResult train(DcanModel& model, const std::vector<Sample>& dataset,
                  const TrainSchedule& schedule, Rng& rng, const TrainOptions& opts) {
    schedule.validate();
    model.config.validate();
    if (dataset.empty()) throw std::invalid_argument("train: dataset is empty");

    TrainResult result;
    double lr = schedule.lr0;
    double window_sum = 0.0;
    long window_n = 0;
    double prev_window_avg = 0.0;
    bool have_prev_window = false;

    for (long iter = 0; iter < schedule.max_iters; ++iter) {
        const double wa = schedule.wa_at(iter);
        const std::size_t idx =
            static_cast<std::size_t>(rng.uniform_int(0, static_cast<std::int64_t>(dataset.size()) - 1));
        Sample crop = random_crop(dataset[idx], model.config.input_size, rng);
        if (opts.augment_enabled) crop = augment(crop, opts.augment_spec, rng);
        const LabelPair labels = make_label_pair(crop.instances, opts.contour_radius);

        const ForwardCache cache = forward_cached(model, crop.image.to_tensor(), true, rng);
        LossAndGrads lg = loss_and_gradients(model, cache, labels, wa);
        if (!std::isfinite(lg.loss.total))
            throw std::runtime_error("train: non-finite loss at iteration " + std::to_string(iter));

        const auto mp = enumerate_params(model);
        const auto gp = enumerate_params(lg.grads);
        for (std::size_t i = 0; i < mp.size(); ++i)
            sgd_step(std::span<double>(mp[i].data, mp[i].count),
                     std::span<const double>(gp[i].data, gp[i].count), lr,
                     mp[i].is_weight ? model.config.lambda : 0.0);

        result.loss_curve.push_back(lg.loss.total);
        result.object_xent_per_pixel.push_back(lg.loss.per_pixel_object());
        result.contour_xent_per_pixel.push_back(lg.loss.per_pixel_contour());
        result.lr_curve.push_back(lr);
        result.wa_curve.push_back(wa);

        window_sum += lg.loss.total;
        if (++window_n == schedule.lr_patience) {
            const double avg = window_sum / window_n;
            if (have_prev_window && avg > prev_window_avg * (1.0 - schedule.lr_min_rel_improve))
                lr = std::max(lr / schedule.lr_drop_factor, schedule.lr_floor);
            prev_window_avg = avg;
            have_prev_window = true;
            window_sum = 0.0;
            window_n = 0;
        }

        if (opts.on_progress && opts.progress_every > 0 &&
            (iter + 1) % opts.progress_every == 0)
            opts.on_progress(iter + 1, lg.loss.total, lr, wa);
        if (opts.on_snapshot && opts.snapshot_every > 0 &&
            (iter + 1) % opts.snapshot_every == 0)
            opts.on_snapshot(iter + 1, model);
    }
    return result;
}

ProbabilityMaps predict_tiled(const DcanModel& model, const ImageRgb& image, int tile,
                              int stride) {
    if (tile != model.config.input_size)
        throw std::invalid_argument("predict_tiled: tile " + std::to_string(tile) +
                                    " must equal the model input size " +
                                    std::to_string(model.config.input_size));
    if (stride < 1 || stride > tile)
        throw std::invalid_argument("predict_tiled: stride must be in [1, tile]");

    const int orig_w = image.width, orig_h = image.height;
    ImageRgb padded = image;
    if (padded.width < tile || padded.height < tile)
        padded = reflect_pad(image, std::max(0, tile - image.width),
                             std::max(0, tile - image.height));

    const auto tiles = plan_tiles(padded.width, padded.height, tile, stride);
    const std::size_t plane = static_cast<std::size_t>(padded.width) * padded.height;
    std::vector<double> sum_o(plane, 0.0), sum_c(plane, 0.0), count(plane, 0.0);

    Rng unused(0);  // inference mode never draws
    for (const auto& [ox, oy] : tiles) {
        Tensor t(1, 3, tile, tile);
        for (int c = 0; c < 3; ++c)
            for (int y = 0; y < tile; ++y)
                for (int x = 0; x < tile; ++x)
                    t.at(0, c, y, x) = padded.at(c, ox + x, oy + y);
        const ProbabilityMaps maps = forward(model, t, false, unused);
        for (int y = 0; y < tile; ++y)
            for (int x = 0; x < tile; ++x) {
                const std::size_t pi = static_cast<std::size_t>(oy + y) * padded.width + ox + x;
                const std::size_t ti = static_cast<std::size_t>(y) * tile + x;
                sum_o[pi] += maps.p_object[ti];
                sum_c[pi] += maps.p_contour[ti];
                count[pi] += 1.0;
            }
    }

    ProbabilityMaps out(orig_w, orig_h);
    for (int y = 0; y < orig_h; ++y)
        for (int x = 0; x < orig_w; ++x) {
            const std::size_t pi = static_cast<std::size_t>(y) * padded.width + x;
            const std::size_t oi = static_cast<std::size_t>(y) * orig_w + x;
            out.p_object[oi] = sum_o[pi] / count[pi];
            out.p_contour[oi] = sum_c[pi] / count[pi];
        }
    return out;
}

void save_checkpoint(const std::string& path, DcanModel& model) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error(path + ": cannot open for writing");
    out << "DCAN-CKPT v1\n";
    for (const ParamEntry& e : enumerate_params(model)) {
        out << e.name << " " << e.shape[0] << " " << e.shape[1] << " " << e.shape[2] << " "
            << e.shape[3] << "\n";
        write_le_doubles(out, e.data, e.count);
    }
    if (!out) throw std::runtime_error(path + ": write failed");
}

DcanModel load_checkpoint(const std::string& path, int input_size) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error(path + ": cannot open for reading");
    std::string line;
    if (!std::getline(in, line) || line != "DCAN-CKPT v1")
        throw std::runtime_error(path + ": missing DCAN-CKPT v1 magic");

    struct Rec {
        std::array<int, 4> shape;
        std::vector<double> data;
    };
    std::map<std::string, Rec> records;
    std::string name;
    while (in >> name) {
        Rec r;
        for (int i = 0; i < 4; ++i)
            if (!(in >> r.shape[i])) throw std::runtime_error(path + ": bad shape for " + name);
        in.get();  // newline before the payload
        std::size_t count = 1;
        for (int d : r.shape) {
            if (d < 1) throw std::runtime_error(path + ": bad shape for " + name);
            count *= static_cast<std::size_t>(d);
        }
        r.data.resize(count);
        try {
            read_le_doubles(in, r.data.data(), count);
        } catch (const std::exception&) {
            throw std::runtime_error(path + ": truncated payload for " + name);
        }
        if (!records.emplace(name, std::move(r)).second)
            throw std::runtime_error(path + ": duplicate parameter " + name);
    }
    if (records.empty()) throw std::runtime_error(path + ": no parameters");

    // Reconstruct the architecture from the parameter names and shapes.
    DcanConfig cfg;
    cfg.input_size = input_size;
    int max_stage = 0, max_conv = 0;
    std::vector<int> taps;
    for (const auto& [n, r] : records) {
        int s, j, t;
        char rest[32] = {0};
        if (std::sscanf(n.c_str(), "stage%d.conv%d.%31s", &s, &j, rest) == 3 &&
            std::string(rest) == "kernel") {
            max_stage = std::max(max_stage, s);
            max_conv = std::max(max_conv, j);
        } else if (std::sscanf(n.c_str(), "object.tap%d.%31s", &t, rest) == 2 &&
                   std::string(rest) == "deconv.kernel") {
            taps.push_back(t);
        }
    }
    if (max_stage == 0 || taps.empty())
        throw std::runtime_error(path + ": checkpoint lacks stage or tap parameters");
    std::sort(taps.begin(), taps.end());

    cfg.num_pool_stages = max_stage;
    cfg.convs_per_stage = max_conv;
    cfg.branch_taps = taps;
    cfg.channels_per_stage.clear();
    for (int s = 1; s <= max_stage; ++s) {
        const auto it = records.find("stage" + std::to_string(s) + ".conv1.kernel");
        if (it == records.end())
            throw std::runtime_error(path + ": missing stage" + std::to_string(s) + ".conv1.kernel");
        cfg.channels_per_stage.push_back(it->second.shape[0]);
        if (s == 1) cfg.input_channels = it->second.shape[1];
    }
    {
        const auto it = records.find("object.tap" + std::to_string(taps[0]) + ".deconv.kernel");
        cfg.upsample_channels = it->second.shape[1];
    }

    DcanModel model = make_skeleton(cfg);
    std::size_t used = 0;
    for (const ParamEntry& e : enumerate_params(model)) {
        const auto it = records.find(e.name);
        if (it == records.end()) throw std::runtime_error(path + ": missing parameter " + e.name);
        if (it->second.shape != e.shape)
            throw std::runtime_error(path + ": shape mismatch for " + e.name);
        std::copy(it->second.data.begin(), it->second.data.end(), e.data);
        ++used;
    }
    if (used != records.size())
        throw std::runtime_error(path + ": checkpoint contains unexpected parameters");
    return model;
}

}  // namespace dcan
