#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "dcan/config.hpp"
#include "dcan/fusion.hpp"
#include "dcan/image_io.hpp"
#include "dcan/metrics.hpp"
#include "dcan/morphology.hpp"
#include "dcan/net.hpp"
#include "dcan/synth.hpp"

namespace fs = std::filesystem;
using namespace dcan;

namespace {

std::string scene_name(int i) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "scene_%03d", i);
    return buf;
}

void cmd_gen_data(const std::string& config_path, const std::string& out_dir) {
    const AppConfig cfg = parse_config_file(config_path);
    fs::create_directories(out_dir);
    Rng rng(cfg.data_seed);
    const Dataset ds = generate_dataset(cfg.scene, cfg.data_count, rng);
    for (std::size_t i = 0; i < ds.samples.size(); ++i) {
        const std::string base = (fs::path(out_dir) / scene_name(static_cast<int>(i))).string();
        write_ppm(base + ".ppm", ds.samples[i].image);
        write_imask(base + ".imask", ds.samples[i].instances);
    }
    write_manifest((fs::path(out_dir) / "manifest.txt").string(), ds.manifest);
    std::cout << "wrote " << ds.samples.size() << " scenes to " << out_dir << "\n";
}

void cmd_make_labels(const std::string& mask_in, const std::string& contour_out, int radius) {
    const InstanceMask instances = read_imask(mask_in);
    write_imask(contour_out, extract_contour_labels(instances, radius));
    std::cout << "wrote " << contour_out << "\n";
}

std::vector<Sample> load_samples(const std::string& data_dir) {
    std::vector<std::string> stems;
    for (const auto& entry : fs::directory_iterator(data_dir))
        if (entry.path().extension() == ".ppm") stems.push_back(entry.path().stem().string());
    std::sort(stems.begin(), stems.end());
    if (stems.empty()) throw std::runtime_error(data_dir + ": no .ppm images found");
    std::vector<Sample> samples;
    for (const std::string& stem : stems) {
        Sample s;
        s.image = read_ppm((fs::path(data_dir) / (stem + ".ppm")).string());
        s.instances = read_imask((fs::path(data_dir) / (stem + ".imask")).string());
        if (s.image.width != s.instances.width || s.image.height != s.instances.height)
            throw std::runtime_error(stem + ": image and mask dimensions differ");
        samples.push_back(std::move(s));
    }
    return samples;
}

void cmd_train(const std::string& config_path, const std::string& data_dir,
               const std::string& ckpt_out) {
    const AppConfig cfg = parse_config_file(config_path);
    const std::vector<Sample> samples = load_samples(data_dir);
    Rng rng(cfg.train_seed);
    DcanModel model = build_model(cfg.net, rng);
    TrainOptions opts;
    opts.contour_radius = cfg.contour_radius;
    opts.augment_enabled = cfg.augment_enabled;
    opts.augment_spec = cfg.augment;
    opts.progress_every = std::max<long>(1, cfg.net.schedule.max_iters / 20);
    opts.on_progress = [](long iter, double loss, double lr, double wa) {
        std::printf("iter %ld  loss %.4f  lr %.3g  wa %.3g\n", iter, loss, lr, wa);
    };
    const TrainResult result = train(model, samples, cfg.net.schedule, rng, opts);
    save_checkpoint(ckpt_out, model);
    if (!result.loss_curve.empty())
        std::printf("final loss %.4f  object xent/px %.4f\n", result.loss_curve.back(),
                    result.object_xent_per_pixel.back());
    std::cout << "wrote " << ckpt_out << "\n";
}

void cmd_infer(const std::string& ckpt, const std::string& image_in, const std::string& maps_out,
               int tile, int stride) {
    DcanModel model = load_checkpoint(ckpt, tile);
    const fs::path in_path(image_in);
    const ImageRgb image =
        in_path.extension() == ".pgm" ? read_pgm(image_in) : read_ppm(image_in);
    const ProbabilityMaps maps = predict_tiled(model, image, tile, stride);
    write_pmap(maps_out, maps);
    std::cout << "wrote " << maps_out << "\n";
}

void cmd_fuse(const std::string& maps_in, const std::string& instances_out, double t_o,
              double t_c, int min_area, int smooth_radius, bool objects_only) {
    const ProbabilityMaps maps = read_pmap(maps_in);
    FusionParams params;
    params.t_object = t_o;
    params.t_contour = t_c;
    params.min_area = min_area;
    params.smooth_radius = smooth_radius;
    const InstanceMask instances =
        objects_only ? segment_objects_only(maps, params) : segment(maps, params);
    write_imask(instances_out, instances);
    std::cout << "wrote " << instances_out << " (" << instances.max_label() << " instances)\n";
}

void cmd_eval(const std::string& seg_dir, const std::string& gt_dir,
              const std::string& report_csv) {
    std::vector<std::string> names;
    for (const auto& entry : fs::directory_iterator(seg_dir))
        if (entry.path().extension() == ".imask") names.push_back(entry.path().stem().string());
    std::sort(names.begin(), names.end());
    if (names.empty()) throw std::runtime_error(seg_dir + ": no .imask files found");
    std::vector<InstanceMask> segs, gts;
    for (const std::string& name : names) {
        segs.push_back(read_imask((fs::path(seg_dir) / (name + ".imask")).string()));
        const fs::path gt_path = fs::path(gt_dir) / (name + ".imask");
        if (!fs::exists(gt_path))
            throw std::runtime_error(gt_path.string() + ": missing ground truth for " + name);
        gts.push_back(read_imask(gt_path.string()));
    }
    const SetMetrics metrics = evaluate_set(names, segs, gts);
    write_eval_csv(report_csv, metrics);
    std::printf("ALL: f1 %.4f dice %.4f hausdorff %.4f\n", metrics.overall.f1,
                metrics.overall.object_dice, metrics.overall.object_hausdorff);
    std::cout << "wrote " << report_csv << "\n";
}

void cmd_rank(const std::string& scores_csv, const std::string& ranking_csv) {
    const std::vector<TeamScores> scores = read_scores_csv(scores_csv);
    const std::vector<TeamRanking> rankings = rank_teams(scores);
    write_ranking_csv(ranking_csv, rankings);
    for (const TeamRanking& r : rankings)
        std::printf("%-16s sum %3d  final %d\n", r.team.c_str(), r.sum_score, r.final_rank);
    std::cout << "wrote " << ranking_csv << "\n";
}

// Central finite differences on randomly sampled parameters of the full loss.
int cmd_gradcheck(const std::string& config_path) {
    const AppConfig cfg = parse_config_file(config_path);
    const double eps = 1e-5;
    const double tol = 1e-4;
    double worst = 0.0;
    for (std::uint64_t seed : {1ULL, 2ULL, 3ULL}) {
        Rng rng(seed);
        DcanModel model = build_model(cfg.net, rng);
        const int size = cfg.net.input_size;
        Tensor image(1, cfg.net.input_channels, size, size);
        for (double& v : image.data) v = rng.uniform();
        LabelPair labels;
        labels.object_labels = BinaryMask(size, size);
        labels.contour_labels = BinaryMask(size, size);
        for (auto& b : labels.object_labels.bits) b = rng.uniform() < 0.5 ? 1 : 0;
        for (auto& b : labels.contour_labels.bits) b = rng.uniform() < 0.5 ? 1 : 0;
        const double wa = 0.7;

        Rng fwd_rng(seed + 100);
        const ForwardCache cache = forward_cached(model, image, false, fwd_rng);
        LossAndGrads lg = loss_and_gradients(model, cache, labels, wa, true);

        auto params = enumerate_params(model);
        auto grads = enumerate_params(lg.grads);
        double max_rel = 0.0;
        for (int trial = 0; trial < 20; ++trial) {
            const std::size_t pi =
                static_cast<std::size_t>(rng.uniform_int(0, static_cast<std::int64_t>(params.size()) - 1));
            const std::size_t ei =
                static_cast<std::size_t>(rng.uniform_int(0, static_cast<std::int64_t>(params[pi].count) - 1));
            double& w = params[pi].data[ei];
            const double saved = w;
            Rng r1(0), r2(0);
            w = saved + eps;
            const double lp = total_loss(model, forward_cached(model, image, false, r1), labels, wa).total;
            w = saved - eps;
            const double lm = total_loss(model, forward_cached(model, image, false, r2), labels, wa).total;
            w = saved;
            const double fd = (lp - lm) / (2 * eps);
            const double an = grads[pi].data[ei];
            const double rel = std::abs(fd - an) / std::max({1e-8, std::abs(fd), std::abs(an)});
            max_rel = std::max(max_rel, rel);
        }
        std::printf("seed %llu: max relative error %.3g\n",
                    static_cast<unsigned long long>(seed), max_rel);
        worst = std::max(worst, max_rel);
    }
    const bool pass = worst < tol;
    std::printf("%s (worst %.3g, tolerance %.0e)\n", pass ? "PASS" : "FAIL", worst, tol);
    return pass ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Deep contour-aware gland segmentation pipeline"};
    app.require_subcommand(1);

    std::string config_path, out_dir, mask_in, contour_out, data_dir, ckpt, image_in, maps_out;
    std::string maps_in, instances_out, seg_dir, gt_dir, report_csv, scores_csv, ranking_csv;
    int radius = 3, tile = 64, stride = 32, min_area = 64, smooth_radius = 3;
    double t_o = 0.5, t_c = 0.5;
    bool objects_only = false;

    auto* gen = app.add_subcommand("gen-data", "Generate a synthetic dataset");
    gen->add_option("config", config_path)->required();
    gen->add_option("out_dir", out_dir)->required();

    auto* labels = app.add_subcommand("make-labels", "Contour labels from an instance mask");
    labels->add_option("mask_in", mask_in)->required();
    labels->add_option("contour_out", contour_out)->required();
    labels->add_option("--radius", radius, "contour dilation disk radius");

    auto* tr = app.add_subcommand("train", "Train a model on a directory of samples");
    tr->add_option("config", config_path)->required();
    tr->add_option("data_dir", data_dir)->required();
    tr->add_option("ckpt_out", ckpt)->required();

    auto* inf = app.add_subcommand("infer", "Tiled inference producing probability maps");
    inf->add_option("ckpt", ckpt)->required();
    inf->add_option("image_in", image_in)->required();
    inf->add_option("maps_out", maps_out)->required();
    inf->add_option("--tile", tile, "tile edge (must match the trained input size)");
    inf->add_option("--stride", stride, "tile stride");

    auto* fu = app.add_subcommand("fuse", "Fuse probability maps into labeled instances");
    fu->add_option("maps_in", maps_in)->required();
    fu->add_option("instances_out", instances_out)->required();
    fu->add_option("--to", t_o, "object threshold (inclusive)");
    fu->add_option("--tc", t_c, "contour threshold (strict)");
    fu->add_option("--min-area", min_area, "minimum instance area");
    fu->add_option("--smooth-radius", smooth_radius, "post-processing disk radius");
    fu->add_flag("--objects-only", objects_only, "ignore the contour map (ablation baseline)");

    auto* ev = app.add_subcommand("eval", "Evaluate segmentations against ground truth");
    ev->add_option("seg_dir", seg_dir)->required();
    ev->add_option("gt_dir", gt_dir)->required();
    ev->add_option("report_csv", report_csv)->required();

    auto* rk = app.add_subcommand("rank", "Team ranking from a scores CSV");
    rk->add_option("scores_csv", scores_csv)->required();
    rk->add_option("ranking_csv", ranking_csv)->required();

    auto* gc = app.add_subcommand("gradcheck", "Finite-difference gradient check");
    gc->add_option("config", config_path)->required();

    auto* cr = app.add_subcommand("config-reference", "Print all configuration keys");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e);
    }

    try {
        if (gen->parsed()) cmd_gen_data(config_path, out_dir);
        else if (labels->parsed()) cmd_make_labels(mask_in, contour_out, radius);
        else if (tr->parsed()) cmd_train(config_path, data_dir, ckpt);
        else if (inf->parsed()) cmd_infer(ckpt, image_in, maps_out, tile, stride);
        else if (fu->parsed()) cmd_fuse(maps_in, instances_out, t_o, t_c, min_area, smooth_radius, objects_only);
        else if (ev->parsed()) cmd_eval(seg_dir, gt_dir, report_csv);
        else if (rk->parsed()) cmd_rank(scores_csv, ranking_csv);
        else if (gc->parsed()) return cmd_gradcheck(config_path);
        else if (cr->parsed()) std::cout << config_reference();
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
