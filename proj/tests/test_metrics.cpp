#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <set>
#include <vector>

#include "dcan/metrics.hpp"
#include "dcan/morphology.hpp"
#include "dcan/rng.hpp"
#include "doctest.h"

using namespace dcan;

namespace {

// ---- independent reference implementations (set-based, quadratic) ----

std::map<std::int32_t, PixelSet> objects_by_id(const InstanceMask& m) {
    std::map<std::int32_t, PixelSet> out;
    for (int y = 0; y < m.height; ++y)
        for (int x = 0; x < m.width; ++x)
            if (m.at(x, y) > 0) out[m.at(x, y)].emplace_back(x, y);
    return out;
}

std::size_t set_overlap(const PixelSet& a, const PixelSet& b) {
    std::set<std::pair<int, int>> sa(a.begin(), a.end());
    std::size_t n = 0;
    for (const auto& p : b) n += sa.count(p);
    return n;
}

MatchStats match_oracle(const InstanceMask& seg, const InstanceMask& gt) {
    const auto seg_objs = objects_by_id(seg);
    const auto gt_objs = objects_by_id(gt);
    // per ground-truth object, the best qualifying segmented object
    std::map<std::int32_t, std::pair<std::int32_t, std::size_t>> winner;  // gt -> (seg, overlap)
    for (const auto& [sid, spx] : seg_objs) {
        std::int32_t best_gt = 0;
        std::size_t best_ov = 0;
        for (const auto& [gid, gpx] : gt_objs) {
            const std::size_t ov = set_overlap(spx, gpx);
            if (ov > best_ov) {  // ties keep the smaller gt id (map order)
                best_ov = ov;
                best_gt = gid;
            }
        }
        if (best_gt == 0) continue;
        if (2 * best_ov < gt_objs.at(best_gt).size()) continue;  // 50% rule
        auto it = winner.find(best_gt);
        if (it == winner.end() || best_ov > it->second.second)
            winner[best_gt] = {sid, best_ov};
    }
    MatchStats st;
    st.n_tp = static_cast<int>(winner.size());
    st.n_fp = static_cast<int>(seg_objs.size()) - st.n_tp;
    st.n_fn = static_cast<int>(gt_objs.size()) - st.n_tp;
    for (const auto& [gid, w] : winner) st.pairing[w.first] = gid;
    return st;
}

double dice_of(const PixelSet& g, const PixelSet& s) {
    return 2.0 * set_overlap(g, s) / static_cast<double>(g.size() + s.size());
}

double object_dice_oracle(const InstanceMask& seg, const InstanceMask& gt) {
    const auto seg_objs = objects_by_id(seg);
    const auto gt_objs = objects_by_id(gt);
    if (seg_objs.empty() && gt_objs.empty()) return 1.0;
    if (seg_objs.empty() || gt_objs.empty()) return 0.0;
    double seg_area = 0, gt_area = 0;
    for (const auto& [id, px] : seg_objs) seg_area += px.size();
    for (const auto& [id, px] : gt_objs) gt_area += px.size();

    double seg_sum = 0.0;
    for (const auto& [sid, spx] : seg_objs) {
        std::int32_t best = 0;
        std::size_t best_ov = 0;
        for (const auto& [gid, gpx] : gt_objs) {
            const std::size_t ov = set_overlap(spx, gpx);
            if (ov > best_ov) {
                best_ov = ov;
                best = gid;
            }
        }
        const double d = best == 0 ? 0.0 : dice_of(gt_objs.at(best), spx);
        seg_sum += (spx.size() / seg_area) * d;
    }
    double gt_sum = 0.0;
    for (const auto& [gid, gpx] : gt_objs) {
        std::int32_t best = 0;
        std::size_t best_ov = 0;
        for (const auto& [sid, spx] : seg_objs) {
            const std::size_t ov = set_overlap(gpx, spx);
            if (ov > best_ov) {
                best_ov = ov;
                best = sid;
            }
        }
        const double d = best == 0 ? 0.0 : dice_of(gpx, seg_objs.at(best));
        gt_sum += (gpx.size() / gt_area) * d;
    }
    return 0.5 * (seg_sum + gt_sum);
}

double object_hausdorff_oracle(const InstanceMask& seg, const InstanceMask& gt) {
    const auto seg_objs = objects_by_id(seg);
    const auto gt_objs = objects_by_id(gt);
    if (seg_objs.empty() && gt_objs.empty()) return 0.0;
    const double diagonal = std::sqrt(static_cast<double>(seg.width) * seg.width +
                                      static_cast<double>(seg.height) * seg.height);
    double seg_area = 0, gt_area = 0;
    for (const auto& [id, px] : seg_objs) seg_area += px.size();
    for (const auto& [id, px] : gt_objs) gt_area += px.size();

    auto side = [&](const std::map<std::int32_t, PixelSet>& primary,
                    const std::map<std::int32_t, PixelSet>& counterpart, double total) {
        double sum = 0.0;
        for (const auto& [pid, ppx] : primary) {
            std::int32_t best = 0;
            std::size_t best_ov = 0;
            for (const auto& [cid, cpx] : counterpart) {
                const std::size_t ov = set_overlap(ppx, cpx);
                if (ov > best_ov) {
                    best_ov = ov;
                    best = cid;
                }
            }
            double h;
            if (best != 0) {
                h = hausdorff_bruteforce(ppx, counterpart.at(best));
            } else if (!counterpart.empty()) {
                h = std::numeric_limits<double>::max();
                for (const auto& [cid, cpx] : counterpart)
                    h = std::min(h, hausdorff_bruteforce(ppx, cpx));
            } else {
                h = diagonal;
            }
            sum += (ppx.size() / total) * h;
        }
        return sum;
    };
    return 0.5 * (side(seg_objs, gt_objs, seg_area) + side(gt_objs, seg_objs, gt_area));
}

InstanceMask random_instances(int w, int h, Rng& rng, double density = 0.45) {
    BinaryMask m(w, h);
    for (auto& b : m.bits) b = rng.uniform() < density ? 1 : 0;
    InstanceMask inst = connected_components(m);
    if (rng.uniform() < 0.5) {  // sparse, shuffled ids
        for (auto& l : inst.labels)
            if (l > 0) l = 3 * l + 2;
    }
    return inst;
}

}  // namespace

TEST_CASE("match_objects on identical partitions is perfect") {
    Rng rng(3);
    const InstanceMask m = random_instances(20, 20, rng);
    const MatchStats st = match_objects(m, m);
    CHECK(st.n_fp == 0);
    CHECK(st.n_fn == 0);
    CHECK(st.n_tp == static_cast<int>(objects_by_id(m).size()));
}

TEST_CASE("49% coverage fails the 50% rule") {
    // gt: 100-pixel strip; seg: 49 of those pixels
    InstanceMask gt(100, 3), seg(100, 3);
    for (int x = 0; x < 100; ++x) gt.at(x, 1) = 1;
    for (int x = 0; x < 49; ++x) seg.at(x, 1) = 1;
    const MatchStats st = match_objects(seg, gt);
    CHECK(st.n_tp == 0);
    CHECK(st.n_fp == 1);
    CHECK(st.n_fn == 1);

    // exactly 50% qualifies
    InstanceMask seg2(100, 3);
    for (int x = 0; x < 50; ++x) seg2.at(x, 1) = 1;
    const MatchStats st2 = match_objects(seg2, gt);
    CHECK(st2.n_tp == 1);
}

TEST_CASE("one ground-truth object accepts only one true positive") {
    // two segmented halves of one gt object, each covering >= 50%? impossible;
    // make one cover 60% and the other 40%: only the 60% one can be the TP,
    // and it is; the 40% one maps to the same gt but fails the 50% rule.
    InstanceMask gt(10, 10), seg(10, 10);
    for (int y = 0; y < 10; ++y)
        for (int x = 0; x < 10; ++x) gt.at(x, y) = 1;
    for (int y = 0; y < 10; ++y) {
        for (int x = 0; x < 6; ++x) seg.at(x, y) = 1;
        for (int x = 6; x < 10; ++x) seg.at(x, y) = 2;
    }
    const MatchStats st = match_objects(seg, gt);
    CHECK(st.n_tp == 1);
    CHECK(st.n_fp == 1);
    CHECK(st.n_fn == 0);
    CHECK(st.pairing.at(1) == 1);
}

TEST_CASE("match_objects equals the exhaustive oracle on random pairs") {
    Rng rng(5);
    for (int trial = 0; trial < 40; ++trial) {
        const InstanceMask seg = random_instances(20, 20, rng);
        const InstanceMask gt = random_instances(20, 20, rng);
        const MatchStats got = match_objects(seg, gt);
        const MatchStats want = match_oracle(seg, gt);
        CHECK(got.n_tp == want.n_tp);
        CHECK(got.n_fp == want.n_fp);
        CHECK(got.n_fn == want.n_fn);
        CHECK(got.pairing == want.pairing);
    }
}

TEST_CASE("match_objects rejects dimension mismatch") {
    CHECK_THROWS_AS(match_objects(InstanceMask(4, 4), InstanceMask(5, 4)), std::invalid_argument);
}

TEST_CASE("detection_f1 arithmetic and conventions") {
    MatchStats perfect;
    perfect.n_tp = 7;
    CHECK(detection_f1(perfect).f1 == 1.0);

    MatchStats mixed;
    mixed.n_tp = 2;
    mixed.n_fp = 1;
    mixed.n_fn = 1;
    const DetectionScore s = detection_f1(mixed);
    CHECK(s.precision == doctest::Approx(2.0 / 3).epsilon(1e-15));
    CHECK(s.recall == doctest::Approx(2.0 / 3).epsilon(1e-15));
    CHECK(s.f1 == doctest::Approx(2.0 / 3).epsilon(1e-15));

    MatchStats none;
    none.n_fp = 3;
    none.n_fn = 2;
    CHECK(detection_f1(none).f1 == 0.0);

    MatchStats empty;  // both masks empty
    const DetectionScore e = detection_f1(empty);
    CHECK(e.f1 == 1.0);
    CHECK(e.precision == 1.0);
    CHECK(e.recall == 1.0);
}

TEST_CASE("pixel_dice basics") {
    CHECK(pixel_dice(5, 5, 5) == 1.0);
    CHECK(pixel_dice(4, 6, 0) == 0.0);
    CHECK(pixel_dice(4, 4, 2) == 0.5);
    CHECK(pixel_dice(0, 0, 0) == 1.0);  // empty vs empty
    CHECK(pixel_dice(0, 3, 0) == 0.0);

    BinaryMask g(4, 4), s(4, 4);
    g.at(0, 0) = g.at(1, 0) = 1;
    s.at(1, 0) = s.at(2, 0) = 1;
    CHECK(pixel_dice(g, s) == 0.5);
    CHECK(pixel_dice(g, s) == pixel_dice(s, g));  // symmetric
}

TEST_CASE("hausdorff point cases and symmetry") {
    const PixelSet a = {{0, 0}};
    const PixelSet b = {{3, 4}};
    CHECK(hausdorff(a, b) == 5.0);
    CHECK(hausdorff(a, a) == 0.0);
    CHECK(hausdorff_bruteforce(a, b) == 5.0);
    CHECK_THROWS_AS(hausdorff(a, {}), std::invalid_argument);
    CHECK_THROWS_AS(hausdorff_bruteforce({}, b), std::invalid_argument);

    Rng rng(7);
    for (int trial = 0; trial < 20; ++trial) {
        PixelSet g, s;
        const int ng = static_cast<int>(rng.uniform_int(1, 40));
        const int ns = static_cast<int>(rng.uniform_int(1, 40));
        for (int i = 0; i < ng; ++i)
            g.emplace_back(static_cast<int>(rng.uniform_int(0, 39)),
                           static_cast<int>(rng.uniform_int(0, 39)));
        for (int i = 0; i < ns; ++i)
            s.emplace_back(static_cast<int>(rng.uniform_int(0, 39)),
                           static_cast<int>(rng.uniform_int(0, 39)));
        const double fast = hausdorff(g, s);
        const double brute = hausdorff_bruteforce(g, s);
        CHECK(fast == brute);                    // bit-for-bit
        CHECK(hausdorff(s, g) == hausdorff(g, s));  // symmetric
    }
}

TEST_CASE("object_dice trivial reductions") {
    Rng rng(9);
    const InstanceMask m = random_instances(24, 24, rng);
    CHECK(object_dice(m, m) == doctest::Approx(1.0).epsilon(1e-12));

    // single object each side reduces to pixel dice
    InstanceMask g1(10, 10), s1(10, 10);
    for (int y = 2; y < 8; ++y)
        for (int x = 2; x < 8; ++x) g1.at(x, y) = 4;
    for (int y = 4; y < 9; ++y)
        for (int x = 4; x < 9; ++x) s1.at(x, y) = 2;
    const double expect = pixel_dice(g1.foreground(), s1.foreground());
    CHECK(object_dice(s1, g1) == doctest::Approx(expect).epsilon(1e-12));

    CHECK(object_dice(InstanceMask(5, 5), InstanceMask(5, 5)) == 1.0);
    CHECK(object_dice(s1, InstanceMask(10, 10)) == 0.0);
    CHECK(object_dice(InstanceMask(10, 10), g1) == 0.0);
}

TEST_CASE("object_dice equals the term-by-term oracle on random pairs") {
    Rng rng(11);
    for (int trial = 0; trial < 30; ++trial) {
        const InstanceMask seg = random_instances(24, 24, rng);
        const InstanceMask gt = random_instances(24, 24, rng);
        CHECK(object_dice(seg, gt) ==
              doctest::Approx(object_dice_oracle(seg, gt)).epsilon(1e-12));
    }
}

TEST_CASE("object_hausdorff trivial reductions and 2-object fixture") {
    Rng rng(13);
    const InstanceMask m = random_instances(24, 24, rng);
    CHECK(object_hausdorff(m, m) == 0.0);

    // single object each: reduces to plain hausdorff
    InstanceMask g1(12, 12), s1(12, 12);
    for (int y = 1; y < 4; ++y)
        for (int x = 1; x < 4; ++x) g1.at(x, y) = 1;
    for (int y = 1; y < 4; ++y)
        for (int x = 3; x < 6; ++x) s1.at(x, y) = 1;
    PixelSet gp, sp;
    for (int y = 0; y < 12; ++y)
        for (int x = 0; x < 12; ++x) {
            if (g1.at(x, y)) gp.emplace_back(x, y);
            if (s1.at(x, y)) sp.emplace_back(x, y);
        }
    CHECK(object_hausdorff(s1, g1) ==
          doctest::Approx(hausdorff_bruteforce(gp, sp)).epsilon(1e-12));

    // hand-expanded two-object fixture: H(G1,S1)=2 with areas 9, H(G2,S2)=1 with areas 4
    InstanceMask seg(12, 8), gt(12, 8);
    for (int y = 1; y < 4; ++y)
        for (int x = 1; x < 4; ++x) seg.at(x, y) = 1;
    for (int y = 1; y < 4; ++y)
        for (int x = 3; x < 6; ++x) gt.at(x, y) = 1;
    for (int y = 1; y < 3; ++y)
        for (int x = 8; x < 10; ++x) seg.at(x, y) = 2;
    for (int y = 2; y < 4; ++y)
        for (int x = 8; x < 10; ++x) gt.at(x, y) = 2;
    const double hand = 0.5 * ((9.0 / 13 * 2.0 + 4.0 / 13 * 1.0) +
                               (9.0 / 13 * 2.0 + 4.0 / 13 * 1.0));
    CHECK(object_hausdorff(seg, gt) == doctest::Approx(hand).epsilon(1e-12));

    CHECK(object_hausdorff(InstanceMask(6, 6), InstanceMask(6, 6)) == 0.0);
}

TEST_CASE("object_hausdorff equals the oracle on random pairs") {
    Rng rng(15);
    for (int trial = 0; trial < 30; ++trial) {
        const InstanceMask seg = random_instances(24, 24, rng);
        const InstanceMask gt = random_instances(24, 24, rng);
        CHECK(object_hausdorff(seg, gt) ==
              doctest::Approx(object_hausdorff_oracle(seg, gt)).epsilon(1e-12));
    }
}

TEST_CASE("dilating both masks identically keeps a perfect match perfect") {
    Rng rng(17);
    const InstanceMask m = random_instances(20, 20, rng, 0.3);
    // dilate each labeled object into free space consistently on both sides
    const BinaryMask grown = dilate(m.foreground(), DiskElement::make(1));
    InstanceMask gm = connected_components(grown);
    const MatchStats st = match_objects(gm, gm);
    CHECK(st.n_fp == 0);
    CHECK(st.n_fn == 0);
    CHECK(detection_f1(st).f1 == (gm.max_label() > 0 ? 1.0 : 1.0));
}

TEST_CASE("competition ranks: 1224 semantics") {
    CHECK(competition_rank({3, 1, 1}, RankDirection::HigherBetter) == std::vector<int>{1, 2, 2});
    CHECK(competition_rank({1, 1, 3}, RankDirection::LowerBetter) == std::vector<int>{1, 1, 3});
    CHECK(competition_rank({5, 5, 5}, RankDirection::HigherBetter) == std::vector<int>{1, 1, 1});
    CHECK(competition_rank({1, 2, 2, 4}, RankDirection::LowerBetter) ==
          std::vector<int>{1, 2, 2, 4});
    CHECK_THROWS_AS(competition_rank({}, RankDirection::HigherBetter), std::invalid_argument);

    // rank 1 is always achieved and ranks are consistent with sorting
    Rng rng(19);
    std::vector<double> scores(8);
    for (double& s : scores) s = rng.uniform();
    const auto ranks = competition_rank(scores, RankDirection::HigherBetter);
    CHECK(*std::min_element(ranks.begin(), ranks.end()) == 1);
    for (std::size_t i = 0; i < scores.size(); ++i)
        for (std::size_t j = 0; j < scores.size(); ++j)
            if (scores[i] > scores[j]) CHECK(ranks[i] < ranks[j]);
}

namespace {

std::vector<TeamScores> challenge_scores() {
    // published challenge results for the teams listed in all three tables
    return {
        {"CUMedVision2", 0.9116, 0.7158, 0.8974, 0.7810, 45.4182, 160.3469},
        {"CUMedVision1", 0.8680, 0.7692, 0.8666, 0.8001, 74.5955, 153.6457},
        {"ExB1", 0.8912, 0.7027, 0.8823, 0.7860, 57.4126, 145.5748},
        {"ExB2", 0.8924, 0.6857, 0.8844, 0.7542, 54.7853, 187.4420},
        {"ExB3", 0.8958, 0.7191, 0.8860, 0.7647, 57.3500, 159.8730},
        {"Freiburg2", 0.8702, 0.6952, 0.8756, 0.7856, 57.0932, 148.4630},
        {"Freiburg1", 0.8340, 0.6047, 0.8745, 0.7832, 57.1938, 146.6065},
        {"CVIP Dundee", 0.8633, 0.6328, 0.8698, 0.7152, 58.3386, 209.0483},
        {"CVML", 0.6521, 0.5408, 0.6444, 0.6543, 155.4326, 176.2439},
    };
}

}  // namespace

TEST_CASE("published challenge scores reproduce the final ranking table") {
    const auto rankings = rank_teams(challenge_scores());
    std::map<std::string, TeamRanking> by_team;
    for (const auto& r : rankings) by_team[r.team] = r;

    // detection ranks on part A, derivable positions 1..8
    CHECK(by_team["CUMedVision2"].f1_a == 1);
    CHECK(by_team["ExB3"].f1_a == 2);
    CHECK(by_team["ExB2"].f1_a == 3);
    CHECK(by_team["ExB1"].f1_a == 4);
    CHECK(by_team["Freiburg2"].f1_a == 5);
    CHECK(by_team["CUMedVision1"].f1_a == 6);
    CHECK(by_team["CVIP Dundee"].f1_a == 7);
    CHECK(by_team["Freiburg1"].f1_a == 8);

    // per-criterion rank rows of the seven fully derivable teams
    const std::map<std::string, std::array<int, 6>> rows = {
        {"CUMedVision2", {1, 3, 1, 5, 1, 6}}, {"ExB1", {4, 4, 4, 2, 6, 1}},
        {"ExB3", {2, 2, 2, 6, 5, 5}},         {"Freiburg2", {5, 5, 5, 3, 3, 3}},
        {"CUMedVision1", {6, 1, 8, 1, 8, 4}}, {"ExB2", {3, 6, 3, 7, 2, 8}},
        {"Freiburg1", {8, 8, 6, 4, 4, 2}},
    };
    for (const auto& [team, row] : rows) {
        const TeamRanking& r = by_team[team];
        CHECK(r.f1_a == row[0]);
        CHECK(r.f1_b == row[1]);
        CHECK(r.dice_a == row[2]);
        CHECK(r.dice_b == row[3]);
        CHECK(r.haus_a == row[4]);
        CHECK(r.haus_b == row[5]);
    }

    // sum scores and final ranking
    CHECK(by_team["CUMedVision2"].sum_score == 17);
    CHECK(by_team["CUMedVision2"].final_rank == 1);
    CHECK(by_team["ExB1"].sum_score == 21);
    CHECK(by_team["ExB1"].final_rank == 2);
    CHECK(by_team["ExB3"].sum_score == 22);
    CHECK(by_team["ExB3"].final_rank == 3);
    CHECK(by_team["Freiburg2"].sum_score == 24);
    CHECK(by_team["Freiburg2"].final_rank == 4);
    CHECK(by_team["CUMedVision1"].sum_score == 28);
    CHECK(by_team["CUMedVision1"].final_rank == 5);
    CHECK(by_team["ExB2"].sum_score == 29);
    CHECK(by_team["ExB2"].final_rank == 6);
    CHECK(by_team["Freiburg1"].sum_score == 32);
    CHECK(by_team["Freiburg1"].final_rank == 7);
    CHECK(by_team["CVIP Dundee"].final_rank == 8);
    CHECK(by_team["CVML"].final_rank == 9);

    // output sorted by final rank
    for (std::size_t i = 1; i < rankings.size(); ++i)
        CHECK(rankings[i - 1].final_rank <= rankings[i].final_rank);
}

TEST_CASE("identical rank rows share the final rank") {
    std::vector<TeamScores> teams = {
        {"a", 0.9, 0.9, 0.9, 0.9, 10.0, 10.0},
        {"b", 0.9, 0.9, 0.9, 0.9, 10.0, 10.0},
        {"c", 0.5, 0.5, 0.5, 0.5, 50.0, 50.0},
    };
    const auto rankings = rank_teams(teams);
    std::map<std::string, TeamRanking> by_team;
    for (const auto& r : rankings) by_team[r.team] = r;
    CHECK(by_team["a"].sum_score == by_team["b"].sum_score);
    CHECK(by_team["a"].final_rank == 1);
    CHECK(by_team["b"].final_rank == 1);
    CHECK(by_team["c"].final_rank == 3);
}

TEST_CASE("evaluate_set pools detection counts and object terms") {
    // image 1: perfect single object; image 2: one gt object, empty seg
    InstanceMask a(8, 8);
    for (int y = 2; y < 6; ++y)
        for (int x = 2; x < 6; ++x) a.at(x, y) = 1;
    InstanceMask empty(8, 8);

    const SetMetrics sm = evaluate_set({"img1", "img2"}, {a, empty}, {a, a});
    REQUIRE(sm.per_image.size() == 2);
    CHECK(sm.per_image[0].name == "img1");
    CHECK(sm.per_image[0].f1 == 1.0);
    CHECK(sm.per_image[1].f1 == 0.0);
    // pooled detection: tp=1, fp=0, fn=1 -> P=1, R=0.5, F1=2/3
    CHECK(sm.overall.f1 == doctest::Approx(2.0 / 3).epsilon(1e-12));
    CHECK(sm.overall.precision == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(sm.overall.recall == doctest::Approx(0.5).epsilon(1e-12));
    // pooled dice: seg side = 1 (one perfect object), gt side = (16*1 + 16*0)/32 = 0.5
    CHECK(sm.overall.object_dice == doctest::Approx(0.5 * (1.0 + 0.5)).epsilon(1e-12));
    CHECK(sm.overall.name == "ALL");
}

TEST_CASE("eval and ranking CSV round trips") {
    SetMetrics sm;
    sm.per_image.push_back({"img1", 0.5, 0.6, 0.4, 0.7, 12.25});
    sm.overall = {"ALL", 0.5, 0.6, 0.4, 0.7, 12.25};
    write_eval_csv("metrics_tmp.csv", sm);
    std::ifstream in("metrics_tmp.csv");
    std::string header, row1, row2;
    std::getline(in, header);
    std::getline(in, row1);
    std::getline(in, row2);
    CHECK(header == "image,f1,precision,recall,object_dice,object_hausdorff");
    CHECK(row1 == "img1,0.500000,0.600000,0.400000,0.700000,12.250000");
    CHECK(row2.substr(0, 4) == "ALL,");
    std::remove("metrics_tmp.csv");

    const auto rankings = rank_teams(challenge_scores());
    write_ranking_csv("ranking_tmp.csv", rankings);
    const auto back = read_ranking_csv("ranking_tmp.csv");
    REQUIRE(back.size() == rankings.size());
    for (std::size_t i = 0; i < back.size(); ++i) {
        CHECK(back[i].team == rankings[i].team);
        CHECK(back[i].sum_score == rankings[i].sum_score);
        CHECK(back[i].final_rank == rankings[i].final_rank);
    }
    std::remove("ranking_tmp.csv");
}
