#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "dcan/net.hpp"
#include "dcan/synth.hpp"
#include "doctest.h"

using namespace dcan;

namespace {

DcanConfig mini_config() {
    DcanConfig cfg;
    cfg.input_size = 16;
    cfg.input_channels = 3;
    cfg.num_pool_stages = 2;
    cfg.channels_per_stage = {4, 4};
    cfg.convs_per_stage = 2;
    cfg.branch_taps = {1, 2};
    cfg.upsample_channels = 4;
    cfg.dropout_rate = 0.0;
    cfg.lambda = 5e-4;
    return cfg;
}

Tensor random_image(const DcanConfig& cfg, Rng& rng) {
    Tensor t(1, cfg.input_channels, cfg.input_size, cfg.input_size);
    for (double& v : t.data) v = rng.uniform();
    return t;
}

LabelPair random_labels(int size, Rng& rng) {
    LabelPair lp;
    lp.object_labels = BinaryMask(size, size);
    lp.contour_labels = BinaryMask(size, size);
    for (auto& b : lp.object_labels.bits) b = rng.uniform() < 0.5 ? 1 : 0;
    for (auto& b : lp.contour_labels.bits) b = rng.uniform() < 0.5 ? 1 : 0;
    return lp;
}

std::vector<double> snapshot(DcanModel& model) {
    std::vector<double> v;
    for (const ParamEntry& e : enumerate_params(model))
        v.insert(v.end(), e.data, e.data + e.count);
    return v;
}

}  // namespace

TEST_CASE("build_model determinism and parameter count") {
    const DcanConfig cfg = mini_config();
    Rng r1(5), r2(5), r3(6);
    DcanModel a = build_model(cfg, r1);
    DcanModel b = build_model(cfg, r2);
    DcanModel c = build_model(cfg, r3);
    CHECK(snapshot(a) == snapshot(b));
    CHECK(snapshot(a) != snapshot(c));

    // closed-form count over layer shapes
    long expect = 0;
    expect += (3 * 4 * 9 + 4) + (4 * 4 * 9 + 4);  // stage 1
    expect += (4 * 4 * 9 + 4) + (4 * 4 * 9 + 4);  // stage 2
    // taps: stage1 deconv 4x4x4x4, stage2 deconv 4x4x8x8, scores 4*2+2
    const long tap1 = 4 * 4 * 4 * 4 + 4 + (4 * 2 + 2);
    const long tap2 = 4 * 4 * 8 * 8 + 4 + (4 * 2 + 2);
    expect += 2 * (tap1 + tap2);
    CHECK(parameter_count(cfg) == expect);

    long actual = 0;
    for (const ParamEntry& e : enumerate_params(a)) actual += static_cast<long>(e.count);
    CHECK(actual == expect);
}

TEST_CASE("config validation rejects inconsistencies") {
    DcanConfig cfg = mini_config();
    cfg.branch_taps = {3};
    CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
    cfg = mini_config();
    cfg.input_size = 18;  // not divisible by 4
    CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
    cfg = mini_config();
    cfg.channels_per_stage = {4};
    CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
    cfg = mini_config();
    cfg.branch_taps = {};
    CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
}

TEST_CASE("forward produces normalized full-resolution maps") {
    const DcanConfig cfg = mini_config();
    Rng rng(7);
    const DcanModel model = build_model(cfg, rng);
    const Tensor image = random_image(cfg, rng);
    Rng fwd(1);
    const ProbabilityMaps maps = forward(model, image, false, fwd);
    CHECK(maps.width == cfg.input_size);
    CHECK(maps.height == cfg.input_size);
    CHECK(maps.aux_object.size() == 2);
    CHECK(maps.aux_contour.size() == 2);
    for (double v : maps.p_object) {
        CHECK(v >= 0.0);
        CHECK(v <= 1.0);
    }
    // inference is deterministic (no dropout)
    Rng fwd2(999);
    const ProbabilityMaps again = forward(model, image, false, fwd2);
    CHECK(again.p_object == maps.p_object);
    CHECK(again.p_contour == maps.p_contour);

    Tensor bad(1, 3, 8, 8);
    Rng fwd3(0);
    CHECK_THROWS_AS(forward(model, bad, false, fwd3), std::invalid_argument);
}

TEST_CASE("zero classifier weights give uniform 0.5 maps") {
    DcanConfig cfg = mini_config();
    cfg.branch_taps = {2};
    Rng rng(8);
    DcanModel model = build_model(cfg, rng);
    for (auto* taps : {&model.object_taps, &model.contour_taps})
        for (TapHead& t : *taps) {
            std::fill(t.score.kernel.data.begin(), t.score.kernel.data.end(), 0.0);
            std::fill(t.score.bias.begin(), t.score.bias.end(), 0.0);
        }
    Rng fwd(1);
    const ProbabilityMaps maps = forward(model, random_image(cfg, rng), false, fwd);
    for (double v : maps.p_object) CHECK(v == doctest::Approx(0.5).epsilon(1e-12));
    for (double v : maps.p_contour) CHECK(v == doctest::Approx(0.5).epsilon(1e-12));
}

TEST_CASE("total_loss special cases") {
    DcanConfig cfg = mini_config();
    cfg.lambda = 0.0;
    Rng rng(9);
    DcanModel model = build_model(cfg, rng);
    const Tensor image = random_image(cfg, rng);
    LabelPair labels = random_labels(cfg.input_size, rng);

    // saturate every tap score toward the true labels through the score biases:
    // zero the kernels so the bias alone sets the logits
    for (auto* taps : {&model.object_taps, &model.contour_taps})
        for (TapHead& t : *taps)
            std::fill(t.score.kernel.data.begin(), t.score.kernel.data.end(), 0.0);
    // per-pixel labels differ, so saturation cannot come from a constant bias;
    // instead check the regularizer-only identity with matching uniform labels
    for (auto& b : labels.object_labels.bits) b = 1;
    for (auto& b : labels.contour_labels.bits) b = 1;
    for (auto* taps : {&model.object_taps, &model.contour_taps})
        for (TapHead& t : *taps) t.score.bias = {-50.0, 50.0};

    Rng fwd(2);
    const ForwardCache cache = forward_cached(model, image, false, fwd);
    const LossBreakdown loss0 = total_loss(model, cache, labels, 0.0);
    CHECK(loss0.total < 1e-6);  // saturated-correct, lambda 0, wa 0

    // lambda > 0 and zero data error: loss equals the weight norm term
    DcanModel reg_model = model;
    reg_model.config.lambda = 0.25;
    double norm_sq = 0.0;
    for (const ParamEntry& e : enumerate_params(reg_model))
        if (e.is_weight)
            for (std::size_t i = 0; i < e.count; ++i) norm_sq += e.data[i] * e.data[i];
    const LossBreakdown loss1 = total_loss(reg_model, cache, labels, 0.0);
    CHECK(loss1.regularizer == doctest::Approx(0.25 * 0.5 * norm_sq).epsilon(1e-12));
    CHECK(loss1.total - loss1.regularizer < 1e-6);

    // with wa > 0 the auxiliary terms are included
    const LossBreakdown loss2 = total_loss(model, cache, labels, 0.5);
    double aux_sum = 0.0;
    for (double v : loss2.aux_object) aux_sum += v;
    for (double v : loss2.aux_contour) aux_sum += v;
    CHECK(loss2.total ==
          doctest::Approx(loss2.regularizer + 0.5 * aux_sum + loss2.fused_object +
                          loss2.fused_contour)
              .epsilon(1e-12));
}

TEST_CASE("full loss gradient matches finite differences on the miniature config") {
    const DcanConfig cfg = mini_config();
    const double eps = 1e-5;
    Rng rng(11);
    DcanModel model = build_model(cfg, rng);
    const Tensor image = random_image(cfg, rng);
    const LabelPair labels = random_labels(cfg.input_size, rng);
    const double wa = 0.7;

    Rng fwd(3);
    const ForwardCache cache = forward_cached(model, image, false, fwd);
    LossAndGrads lg = loss_and_gradients(model, cache, labels, wa, true);

    auto params = enumerate_params(model);
    auto grads = enumerate_params(lg.grads);
    REQUIRE(params.size() == grads.size());

    auto loss_at = [&](double* w, double value) {
        const double saved = *w;
        *w = value;
        Rng r(0);
        const double loss = total_loss(model, forward_cached(model, image, false, r), labels, wa).total;
        *w = saved;
        return loss;
    };

    int checked = 0;
    for (int trial = 0; trial < 60 && checked < 20; ++trial) {
        const std::size_t pi =
            static_cast<std::size_t>(rng.uniform_int(0, static_cast<std::int64_t>(params.size()) - 1));
        const std::size_t ei =
            static_cast<std::size_t>(rng.uniform_int(0, static_cast<std::int64_t>(params[pi].count) - 1));
        double* w = &params[pi].data[ei];
        const double fd1 = (loss_at(w, *w + eps) - loss_at(w, *w - eps)) / (2 * eps);
        const double fd2 = (loss_at(w, *w + 2 * eps) - loss_at(w, *w - 2 * eps)) / (4 * eps);
        // the finite-difference oracle is only valid away from ReLU kinks and
        // pooling ties; inconsistent epsilons flag a kink in the interval
        if (std::abs(fd1 - fd2) / std::max({1e-8, std::abs(fd1), std::abs(fd2)}) > 2e-5) continue;
        const double an = grads[pi].data[ei];
        const double rel = std::abs(fd1 - an) / std::max({1e-8, std::abs(fd1), std::abs(an)});
        CHECK(rel < 1e-4);
        ++checked;
    }
    CHECK(checked >= 20);
}

TEST_CASE("parameter partition: each branch updates only its own upsampling weights") {
    const DcanConfig cfg = mini_config();
    Rng rng(13);
    DcanModel base = build_model(cfg, rng);
    const Tensor image = random_image(cfg, rng);
    const LabelPair labels = random_labels(cfg.input_size, rng);

    auto step_with = [&](double w_obj, double w_con) {
        DcanModel m = base;
        Rng fwd(4);
        const ForwardCache cache = forward_cached(m, image, false, fwd);
        LossAndGrads lg = loss_and_gradients(m, cache, labels, 0.5, false, w_obj, w_con);
        auto mp = enumerate_params(m);
        auto gp = enumerate_params(lg.grads);
        for (std::size_t i = 0; i < mp.size(); ++i)
            sgd_step(std::span<double>(mp[i].data, mp[i].count),
                     std::span<const double>(gp[i].data, gp[i].count), 0.01, 0.0);
        return m;
    };

    auto section = [](DcanModel& m, const std::string& prefix) {
        std::vector<double> v;
        for (const ParamEntry& e : enumerate_params(m))
            if (e.name.rfind(prefix, 0) == 0) v.insert(v.end(), e.data, e.data + e.count);
        return v;
    };

    DcanModel obj_only = step_with(1.0, 0.0);
    DcanModel con_only = step_with(0.0, 1.0);

    // object-only step: contour branch untouched, object and shared move
    CHECK(section(obj_only, "contour.") == section(base, "contour."));
    CHECK(section(obj_only, "object.") != section(base, "object."));
    CHECK(section(obj_only, "stage") != section(base, "stage"));
    // contour-only step: the mirror image
    CHECK(section(con_only, "object.") == section(base, "object."));
    CHECK(section(con_only, "contour.") != section(base, "contour."));
    CHECK(section(con_only, "stage") != section(base, "stage"));
}

TEST_CASE("discount weight schedule steps by factor 10 down to its floor") {
    TrainSchedule s;
    s.wa0 = 1.0;
    s.wa_drop_factor = 10.0;
    s.wa_interval = 100;
    s.wa_floor = 1e-3;
    CHECK(s.wa_at(0) == 1.0);
    CHECK(s.wa_at(99) == 1.0);
    CHECK(s.wa_at(100) == doctest::Approx(0.1).epsilon(1e-15));
    CHECK(s.wa_at(199) == doctest::Approx(0.1).epsilon(1e-15));
    CHECK(s.wa_at(250) == doctest::Approx(0.01).epsilon(1e-15));
    CHECK(s.wa_at(399) == doctest::Approx(1e-3).epsilon(1e-15));
    CHECK(s.wa_at(400) == 1e-3);
    CHECK(s.wa_at(100000) == 1e-3);  // floor holds exactly
    // never increases
    double prev = s.wa_at(0);
    for (long t = 1; t < 1000; t += 7) {
        CHECK(s.wa_at(t) <= prev);
        prev = s.wa_at(t);
    }
}

TEST_CASE("train with lr0 = 0 leaves parameters unchanged") {
    DcanConfig cfg = mini_config();
    cfg.schedule.lr0 = 0.0;
    cfg.schedule.lr_floor = 0.0;
    cfg.schedule.max_iters = 5;
    Rng rng(17);
    DcanModel model = build_model(cfg, rng);
    const std::vector<double> before = snapshot(model);

    GlandSceneSpec scene;
    scene.image_size = 16;
    scene.radius_min = 4;
    scene.radius_max = 5;
    scene.count_min = 1;
    scene.count_max = 1;
    Rng data_rng(3);
    std::vector<Sample> data = {generate_scene(scene, data_rng)};
    Rng train_rng(5);
    train(model, data, cfg.schedule, train_rng);
    CHECK(snapshot(model) == before);
}

TEST_CASE("train aborts with the iteration number on a non-finite loss") {
    DcanConfig cfg = mini_config();
    cfg.schedule.lr0 = 1e15;  // divergence by design
    cfg.schedule.lr_floor = 0.0;
    cfg.schedule.max_iters = 50;
    Rng rng(19);
    DcanModel model = build_model(cfg, rng);
    GlandSceneSpec scene;
    scene.image_size = 16;
    scene.radius_min = 4;
    scene.radius_max = 5;
    scene.count_min = 1;
    scene.count_max = 1;
    Rng data_rng(3);
    std::vector<Sample> data = {generate_scene(scene, data_rng)};
    Rng train_rng(5);
    try {
        train(model, data, cfg.schedule, train_rng);
        FAIL("expected a non-finite loss abort");
    } catch (const std::runtime_error& e) {
        CHECK(std::string(e.what()).find("iteration") != std::string::npos);
    }
}

TEST_CASE("training loss trends downward on a fixed 4-image batch") {
    DcanConfig cfg = mini_config();
    cfg.dropout_rate = 0.0;
    cfg.schedule.lr0 = 3e-5;
    cfg.schedule.max_iters = 300;
    cfg.schedule.wa_interval = 100;
    Rng rng(23);
    DcanModel model = build_model(cfg, rng);

    GlandSceneSpec scene;
    scene.image_size = 16;
    scene.radius_min = 4;
    scene.radius_max = 6;
    scene.ring_min = 2;
    scene.ring_max = 2;
    scene.count_min = 1;
    scene.count_max = 2;
    scene.touching_fraction = 0.0;
    Rng data_rng(29);
    std::vector<Sample> data;
    for (int i = 0; i < 4; ++i) data.push_back(generate_scene(scene, data_rng));

    Rng train_rng(31);
    const TrainResult r = train(model, data, cfg.schedule, train_rng);
    REQUIRE(r.loss_curve.size() == 300);
    auto mean = [&](std::size_t lo, std::size_t hi) {
        double acc = 0.0;
        for (std::size_t i = lo; i < hi; ++i) acc += r.loss_curve[i];
        return acc / (hi - lo);
    };
    CHECK(mean(250, 300) < mean(0, 50));  // smoothed trend is downward
    // schedules recorded per iteration and monotone
    for (std::size_t i = 1; i < r.lr_curve.size(); ++i) {
        CHECK(r.lr_curve[i] <= r.lr_curve[i - 1]);
        CHECK(r.wa_curve[i] <= r.wa_curve[i - 1]);
    }
    CHECK(r.wa_curve.front() == 1.0);
    CHECK(r.wa_curve.back() == doctest::Approx(0.01).epsilon(1e-15));  // 300 iters, interval 100
}

TEST_CASE("predict_tiled equals one forward when the image is one tile") {
    const DcanConfig cfg = mini_config();
    Rng rng(37);
    const DcanModel model = build_model(cfg, rng);
    GlandSceneSpec scene;
    scene.image_size = 16;
    scene.radius_min = 4;
    scene.radius_max = 5;
    Rng data_rng(41);
    const Sample s = generate_scene(scene, data_rng);

    const ProbabilityMaps tiled = predict_tiled(model, s.image, 16, 8);
    Rng fwd(0);
    const ProbabilityMaps direct = forward(model, s.image.to_tensor(), false, fwd);
    CHECK(tiled.p_object == direct.p_object);
    CHECK(tiled.p_contour == direct.p_contour);
}

TEST_CASE("predict_tiled averages overlapping tiles exactly") {
    const DcanConfig cfg = mini_config();
    Rng rng(43);
    const DcanModel model = build_model(cfg, rng);

    // 24x16 image, tile 16, stride 8: tiles at x=0 and x=8 overlap on columns 8..15
    ImageRgb img(24, 16);
    Rng pix(47);
    for (double& v : img.data) v = pix.uniform();
    const ProbabilityMaps tiled = predict_tiled(model, img, 16, 8);

    auto tile_forward = [&](int ox) {
        Tensor t(1, 3, 16, 16);
        for (int c = 0; c < 3; ++c)
            for (int y = 0; y < 16; ++y)
                for (int x = 0; x < 16; ++x) t.at(0, c, y, x) = img.at(c, ox + x, y);
        Rng fwd(0);
        return forward(model, t, false, fwd);
    };
    const ProbabilityMaps t0 = tile_forward(0);
    const ProbabilityMaps t8 = tile_forward(8);

    for (int y = 0; y < 16; ++y) {
        for (int x = 0; x < 24; ++x) {
            double expect;
            if (x < 8) {
                expect = t0.p_object[y * 16 + x];
            } else if (x < 16) {
                expect = (t0.p_object[y * 16 + x] + t8.p_object[y * 16 + (x - 8)]) / 2.0;
            } else {
                expect = t8.p_object[y * 16 + (x - 8)];
            }
            CHECK(tiled.p_object[y * 24 + x] == expect);
        }
    }
}

TEST_CASE("predict_tiled pads images smaller than the tile") {
    const DcanConfig cfg = mini_config();
    Rng rng(53);
    const DcanModel model = build_model(cfg, rng);
    ImageRgb img(10, 12);
    Rng pix(59);
    for (double& v : img.data) v = pix.uniform();
    const ProbabilityMaps maps = predict_tiled(model, img, 16, 16);
    CHECK(maps.width == 10);
    CHECK(maps.height == 12);
    CHECK_THROWS_AS(predict_tiled(model, img, 32, 16), std::invalid_argument);
}

TEST_CASE("checkpoint round trip is byte-exact and rebuilds the architecture") {
    const DcanConfig cfg = mini_config();
    Rng rng(61);
    DcanModel model = build_model(cfg, rng);
    const std::string p1 = "ckpt_test_1.bin", p2 = "ckpt_test_2.bin";
    save_checkpoint(p1, model);

    DcanModel loaded = load_checkpoint(p1, cfg.input_size);
    CHECK(loaded.config.num_pool_stages == cfg.num_pool_stages);
    CHECK(loaded.config.channels_per_stage == cfg.channels_per_stage);
    CHECK(loaded.config.branch_taps == cfg.branch_taps);
    CHECK(loaded.config.upsample_channels == cfg.upsample_channels);
    CHECK(snapshot(loaded) == snapshot(model));

    save_checkpoint(p2, loaded);
    std::ifstream f1(p1, std::ios::binary), f2(p2, std::ios::binary);
    std::stringstream s1, s2;
    s1 << f1.rdbuf();
    s2 << f2.rdbuf();
    CHECK(s1.str() == s2.str());

    // the loaded model computes identical maps
    Rng pix(67);
    Tensor image(1, 3, 16, 16);
    for (double& v : image.data) v = pix.uniform();
    Rng fa(0), fb(0);
    CHECK(forward(model, image, false, fa).p_object ==
          forward(loaded, image, false, fb).p_object);

    CHECK_THROWS(load_checkpoint(p1, 17));  // indivisible input size
    std::remove(p1.c_str());
    std::remove(p2.c_str());
    CHECK_THROWS(load_checkpoint("missing_ckpt.bin", 16));
}

TEST_CASE("make_label_pair derives object and contour planes") {
    InstanceMask inst(8, 8);
    for (int y = 2; y < 6; ++y)
        for (int x = 2; x < 6; ++x) inst.at(x, y) = 1;
    const LabelPair lp = make_label_pair(inst, 0);
    for (int y = 0; y < 8; ++y)
        for (int x = 0; x < 8; ++x)
            CHECK(lp.object_labels.at(x, y) == (inst.at(x, y) ? 1 : 0));
    CHECK(lp.contour_labels.at(2, 2) == 1);
    CHECK(lp.contour_labels.at(4, 4) == 0);  // interior of the 4x4 block
}
