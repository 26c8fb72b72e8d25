#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "dcan/mask.hpp"

namespace dcan {

using PixelSet = std::vector<std::pair<int, int>>;  // (x, y)

struct Objects {
    std::vector<std::int32_t> ids;  // ascending
    std::vector<PixelSet> pixels;
    std::vector<std::size_t> areas;

    std::size_t count() const { return ids.size(); }
};

Objects extract_objects(const InstanceMask& mask);

struct MatchStats {
    int n_tp = 0, n_fp = 0, n_fn = 0;
    std::map<std::int32_t, std::int32_t> pairing;  // TP segmented id -> ground-truth id
};

// Challenge matching: each segmented object is assigned the ground-truth
// object of maximal overlap (ties: smaller gt id) and is a true positive iff
// it covers at least 50% of that object; at most one segmented object per
// ground-truth object counts (larger overlap wins, ties: smaller seg id).
MatchStats match_objects(const InstanceMask& seg, const InstanceMask& gt);

struct DetectionScore {
    double f1 = 0.0, precision = 0.0, recall = 0.0;
};

// Empty-denominator conventions: 0/0 -> 0, except a fully empty pair of
// masks which scores a perfect 1.
DetectionScore detection_f1(const MatchStats& stats);

double pixel_dice(std::size_t size_g, std::size_t size_s, std::size_t intersection);
double pixel_dice(const BinaryMask& g, const BinaryMask& s);

// Hausdorff distance between two non-empty pixel sets (full sets, Euclidean,
// lattice points). The default implementation runs on exact squared distance
// transforms and equals the quadratic double loop bit-for-bit.
double hausdorff(const PixelSet& g, const PixelSet& s);
double hausdorff_bruteforce(const PixelSet& g, const PixelSet& s);

// Object-level Dice: size-weighted Dice over both partitions with
// maximal-overlap pairing per side; zero-overlap objects contribute 0.
double object_dice(const InstanceMask& seg, const InstanceMask& gt);

// Object-level Hausdorff with the same weighting; zero-overlap objects pair
// with the counterpart minimizing H, or score the image diagonal when the
// counterpart mask is entirely empty.
double object_hausdorff(const InstanceMask& seg, const InstanceMask& gt);

enum class RankDirection { HigherBetter, LowerBetter };

// Standard competition ("1224") ranks: tied scores share the minimal rank.
std::vector<int> competition_rank(const std::vector<double>& scores, RankDirection direction);

struct ImageMetrics {
    std::string name;
    double f1 = 0.0, precision = 0.0, recall = 0.0;
    double object_dice = 0.0, object_hausdorff = 0.0;
};

struct SetMetrics {
    std::vector<ImageMetrics> per_image;
    ImageMetrics overall;  // name "ALL"; pooled objects and detection counts
};

ImageMetrics evaluate_pair(const std::string& name, const InstanceMask& seg,
                           const InstanceMask& gt);
SetMetrics evaluate_set(const std::vector<std::string>& names,
                        const std::vector<InstanceMask>& segs,
                        const std::vector<InstanceMask>& gts);

struct TeamScores {
    std::string team;
    double f1_a = 0, f1_b = 0, dice_a = 0, dice_b = 0, haus_a = 0, haus_b = 0;
};

struct TeamRanking {
    std::string team;
    int f1_a = 0, f1_b = 0, dice_a = 0, dice_b = 0, haus_a = 0, haus_b = 0;
    int sum_score = 0;
    int final_rank = 0;
};

// Six competition ranks per team (F1 and Dice descending, Hausdorff
// ascending), their sum, and the final rank over the sums (smaller better).
std::vector<TeamRanking> rank_teams(const std::vector<TeamScores>& scores);

void write_eval_csv(const std::string& path, const SetMetrics& metrics);
std::vector<TeamScores> read_scores_csv(const std::string& path);
void write_ranking_csv(const std::string& path, const std::vector<TeamRanking>& rankings);
std::vector<TeamRanking> read_ranking_csv(const std::string& path);

}  // namespace dcan
