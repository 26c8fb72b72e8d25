#include "dcan/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <sstream>
#include <stdexcept>

namespace dcan {

Objects extract_objects(const InstanceMask& mask) {
    std::map<std::int32_t, PixelSet> by_id;
    for (int y = 0; y < mask.height; ++y)
        for (int x = 0; x < mask.width; ++x) {
            const std::int32_t v = mask.at(x, y);
            if (v > 0) by_id[v].emplace_back(x, y);
        }
    Objects out;
    for (auto& [id, px] : by_id) {
        out.ids.push_back(id);
        out.areas.push_back(px.size());
        out.pixels.push_back(std::move(px));
    }
    return out;
}

namespace {

// Dense overlap counts indexed by object position (not id).
std::vector<std::vector<std::size_t>> overlap_matrix(const InstanceMask& seg,
                                                     const InstanceMask& gt,
                                                     const Objects& seg_objs,
                                                     const Objects& gt_objs) {
    std::map<std::int32_t, std::size_t> seg_pos, gt_pos;
    for (std::size_t i = 0; i < seg_objs.ids.size(); ++i) seg_pos[seg_objs.ids[i]] = i;
    for (std::size_t i = 0; i < gt_objs.ids.size(); ++i) gt_pos[gt_objs.ids[i]] = i;
    std::vector<std::vector<std::size_t>> m(seg_objs.count(),
                                            std::vector<std::size_t>(gt_objs.count(), 0));
    for (std::size_t i = 0; i < seg.labels.size(); ++i) {
        const std::int32_t s = seg.labels[i], g = gt.labels[i];
        if (s > 0 && g > 0) ++m[seg_pos[s]][gt_pos[g]];
    }
    return m;
}

// Position of the maximal entry in one row/column; ties take the smaller
// position. Returns false when every entry is zero.
bool argmax_overlap(const std::vector<std::size_t>& entries, std::size_t& best) {
    std::size_t best_val = 0;
    bool found = false;
    for (std::size_t i = 0; i < entries.size(); ++i) {
        if (entries[i] > best_val) {
            best_val = entries[i];
            best = i;
            found = true;
        }
    }
    return found;
}

}  // namespace

MatchStats match_objects(const InstanceMask& seg, const InstanceMask& gt) {
    require_same_dims(seg.width, seg.height, gt.width, gt.height, "match_objects");
    const Objects seg_objs = extract_objects(seg);
    const Objects gt_objs = extract_objects(gt);
    const auto overlaps = overlap_matrix(seg, gt, seg_objs, gt_objs);

    // Winner per ground-truth object among qualifying segmented objects.
    std::vector<std::size_t> winner(gt_objs.count(), SIZE_MAX);
    std::vector<std::size_t> winner_overlap(gt_objs.count(), 0);
    for (std::size_t si = 0; si < seg_objs.count(); ++si) {
        std::size_t gi;
        if (!argmax_overlap(overlaps[si], gi)) continue;
        const std::size_t inter = overlaps[si][gi];
        if (2 * inter < gt_objs.areas[gi]) continue;  // below the 50% rule
        if (winner[gi] == SIZE_MAX || inter > winner_overlap[gi]) {
            winner[gi] = si;
            winner_overlap[gi] = inter;
        }
    }

    MatchStats stats;
    for (std::size_t gi = 0; gi < gt_objs.count(); ++gi)
        if (winner[gi] != SIZE_MAX) {
            ++stats.n_tp;
            stats.pairing[seg_objs.ids[winner[gi]]] = gt_objs.ids[gi];
        }
    stats.n_fp = static_cast<int>(seg_objs.count()) - stats.n_tp;
    stats.n_fn = static_cast<int>(gt_objs.count()) - stats.n_tp;
    return stats;
}

DetectionScore detection_f1(const MatchStats& stats) {
    DetectionScore s;
    const int seg_total = stats.n_tp + stats.n_fp;
    const int gt_total = stats.n_tp + stats.n_fn;
    if (seg_total == 0 && gt_total == 0) {
        s.f1 = s.precision = s.recall = 1.0;
        return s;
    }
    s.precision = seg_total > 0 ? static_cast<double>(stats.n_tp) / seg_total : 0.0;
    s.recall = gt_total > 0 ? static_cast<double>(stats.n_tp) / gt_total : 0.0;
    s.f1 = (s.precision + s.recall) > 0.0
               ? 2.0 * s.precision * s.recall / (s.precision + s.recall)
               : 0.0;
    return s;
}

double pixel_dice(std::size_t size_g, std::size_t size_s, std::size_t intersection) {
    if (size_g == 0 && size_s == 0) return 1.0;
    return 2.0 * static_cast<double>(intersection) / static_cast<double>(size_g + size_s);
}

double pixel_dice(const BinaryMask& g, const BinaryMask& s) {
    require_same_dims(g.width, g.height, s.width, s.height, "pixel_dice");
    std::size_t ng = 0, ns = 0, inter = 0;
    for (std::size_t i = 0; i < g.bits.size(); ++i) {
        ng += g.bits[i] ? 1 : 0;
        ns += s.bits[i] ? 1 : 0;
        inter += (g.bits[i] && s.bits[i]) ? 1 : 0;
    }
    return pixel_dice(ng, ns, inter);
}

double hausdorff_bruteforce(const PixelSet& g, const PixelSet& s) {
    if (g.empty() || s.empty())
        throw std::invalid_argument("hausdorff: undefined for empty pixel sets");
    auto directed = [](const PixelSet& from, const PixelSet& to) {
        long worst = 0;
        for (const auto& [fx, fy] : from) {
            long best = std::numeric_limits<long>::max();
            for (const auto& [tx, ty] : to) {
                const long dx = fx - tx, dy = fy - ty;
                best = std::min(best, dx * dx + dy * dy);
            }
            worst = std::max(worst, best);
        }
        return worst;
    };
    return std::sqrt(static_cast<double>(std::max(directed(g, s), directed(s, g))));
}

namespace {

constexpr double kDtInf = 1e30;

// Felzenszwalb-Huttenlocher 1-D squared distance transform; exact on
// integer-valued inputs.
void dt1d(const std::vector<double>& f, std::vector<double>& d) {
    const int n = static_cast<int>(f.size());
    std::vector<int> v(n, 0);
    std::vector<double> z(n + 1, 0.0);
    int k = 0;
    v[0] = 0;
    z[0] = -kDtInf;
    z[1] = kDtInf;
    for (int q = 1; q < n; ++q) {
        double s;
        while (true) {
            const int p = v[k];
            s = ((f[q] + static_cast<double>(q) * q) - (f[p] + static_cast<double>(p) * p)) /
                (2.0 * (q - p));
            if (s > z[k]) break;
            --k;
        }
        ++k;
        v[k] = q;
        z[k] = s;
        z[k + 1] = kDtInf;
    }
    k = 0;
    for (int q = 0; q < n; ++q) {
        while (z[k + 1] < q) ++k;
        const double diff = q - v[k];
        d[q] = diff * diff + f[v[k]];
    }
}

// Exact squared Euclidean distance transform of `to` over the bounding grid.
std::vector<double> squared_dt(const PixelSet& to, int x0, int y0, int w, int h) {
    std::vector<double> grid(static_cast<std::size_t>(w) * h, kDtInf);
    for (const auto& [x, y] : to) grid[static_cast<std::size_t>(y - y0) * w + (x - x0)] = 0.0;
    // columns
    std::vector<double> buf(h), out(h);
    for (int x = 0; x < w; ++x) {
        for (int y = 0; y < h; ++y) buf[y] = grid[static_cast<std::size_t>(y) * w + x];
        dt1d(buf, out);
        for (int y = 0; y < h; ++y) grid[static_cast<std::size_t>(y) * w + x] = out[y];
    }
    // rows
    std::vector<double> rbuf(w), rout(w);
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) rbuf[x] = grid[static_cast<std::size_t>(y) * w + x];
        dt1d(rbuf, rout);
        for (int x = 0; x < w; ++x) grid[static_cast<std::size_t>(y) * w + x] = rout[x];
    }
    return grid;
}

double directed_sq(const PixelSet& from, const std::vector<double>& dt, int x0, int y0, int w) {
    double worst = 0.0;
    for (const auto& [x, y] : from)
        worst = std::max(worst, dt[static_cast<std::size_t>(y - y0) * w + (x - x0)]);
    return worst;
}

}  // namespace

double hausdorff(const PixelSet& g, const PixelSet& s) {
    if (g.empty() || s.empty())
        throw std::invalid_argument("hausdorff: undefined for empty pixel sets");
    int min_x = std::numeric_limits<int>::max(), min_y = min_x;
    int max_x = std::numeric_limits<int>::min(), max_y = max_x;
    for (const PixelSet* ps : {&g, &s})
        for (const auto& [x, y] : *ps) {
            min_x = std::min(min_x, x);
            max_x = std::max(max_x, x);
            min_y = std::min(min_y, y);
            max_y = std::max(max_y, y);
        }
    const int w = max_x - min_x + 1, h = max_y - min_y + 1;
    const std::vector<double> dt_s = squared_dt(s, min_x, min_y, w, h);
    const std::vector<double> dt_g = squared_dt(g, min_x, min_y, w, h);
    const double worst =
        std::max(directed_sq(g, dt_s, min_x, min_y, w), directed_sq(s, dt_g, min_x, min_y, w));
    return std::sqrt(worst);
}

namespace {

// One side of the Eq.5/Eq.7 style sum: size-weighted metric over `primary`
// objects, each paired with the maximal-overlap counterpart.
enum class PairMetric { Dice, Hausdorff };

double weighted_side(const Objects& primary, const Objects& counterpart,
                     const std::vector<std::vector<std::size_t>>& overlap, bool transpose,
                     PairMetric metric, double empty_counterpart_value) {
    if (primary.count() == 0) return 0.0;
    std::size_t total_area = 0;
    for (std::size_t a : primary.areas) total_area += a;
    double sum = 0.0;
    for (std::size_t i = 0; i < primary.count(); ++i) {
        std::vector<std::size_t> row(counterpart.count(), 0);
        for (std::size_t j = 0; j < counterpart.count(); ++j)
            row[j] = transpose ? overlap[j][i] : overlap[i][j];
        std::size_t j;
        const bool has_overlap = argmax_overlap(row, j);
        double value;
        if (metric == PairMetric::Dice) {
            value = has_overlap
                        ? pixel_dice(counterpart.areas[j], primary.areas[i], row[j])
                        : 0.0;
        } else if (has_overlap) {
            value = hausdorff(primary.pixels[i], counterpart.pixels[j]);
        } else if (counterpart.count() > 0) {
            // zero overlap: fall back to the closest counterpart object
            value = std::numeric_limits<double>::max();
            for (std::size_t jj = 0; jj < counterpart.count(); ++jj)
                value = std::min(value, hausdorff(primary.pixels[i], counterpart.pixels[jj]));
        } else {
            value = empty_counterpart_value;
        }
        const double weight = static_cast<double>(primary.areas[i]) / total_area;
        sum += weight * value;
    }
    return sum;
}

}  // namespace

double object_dice(const InstanceMask& seg, const InstanceMask& gt) {
    require_same_dims(seg.width, seg.height, gt.width, gt.height, "object_dice");
    const Objects seg_objs = extract_objects(seg);
    const Objects gt_objs = extract_objects(gt);
    if (seg_objs.count() == 0 && gt_objs.count() == 0) return 1.0;
    if (seg_objs.count() == 0 || gt_objs.count() == 0) return 0.0;
    const auto overlap = overlap_matrix(seg, gt, seg_objs, gt_objs);
    const double seg_side = weighted_side(seg_objs, gt_objs, overlap, false, PairMetric::Dice, 0.0);
    const double gt_side = weighted_side(gt_objs, seg_objs, overlap, true, PairMetric::Dice, 0.0);
    return 0.5 * (seg_side + gt_side);
}

double object_hausdorff(const InstanceMask& seg, const InstanceMask& gt) {
    require_same_dims(seg.width, seg.height, gt.width, gt.height, "object_hausdorff");
    const Objects seg_objs = extract_objects(seg);
    const Objects gt_objs = extract_objects(gt);
    if (seg_objs.count() == 0 && gt_objs.count() == 0) return 0.0;
    const double diagonal =
        std::sqrt(static_cast<double>(seg.width) * seg.width +
                  static_cast<double>(seg.height) * seg.height);
    const auto overlap = overlap_matrix(seg, gt, seg_objs, gt_objs);
    const double seg_side =
        weighted_side(seg_objs, gt_objs, overlap, false, PairMetric::Hausdorff, diagonal);
    const double gt_side =
        weighted_side(gt_objs, seg_objs, overlap, true, PairMetric::Hausdorff, diagonal);
    return 0.5 * (seg_side + gt_side);
}

std::vector<int> competition_rank(const std::vector<double>& scores, RankDirection direction) {
    if (scores.empty()) throw std::invalid_argument("competition_rank: need at least one team");
    std::vector<int> ranks(scores.size(), 1);
    for (std::size_t i = 0; i < scores.size(); ++i)
        for (std::size_t j = 0; j < scores.size(); ++j) {
            const bool better = direction == RankDirection::HigherBetter
                                    ? scores[j] > scores[i]
                                    : scores[j] < scores[i];
            if (better) ++ranks[i];
        }
    return ranks;
}

ImageMetrics evaluate_pair(const std::string& name, const InstanceMask& seg,
                           const InstanceMask& gt) {
    ImageMetrics m;
    m.name = name;
    const DetectionScore det = detection_f1(match_objects(seg, gt));
    m.f1 = det.f1;
    m.precision = det.precision;
    m.recall = det.recall;
    m.object_dice = object_dice(seg, gt);
    m.object_hausdorff = object_hausdorff(seg, gt);
    return m;
}

namespace {

// Pooled object terms across the whole set: weights become size fractions of
// the pooled partitions, detection counts are summed.
struct SetAccumulator {
    int tp = 0, fp = 0, fn = 0;
    double dice_seg_weighted = 0.0, dice_gt_weighted = 0.0;
    double haus_seg_weighted = 0.0, haus_gt_weighted = 0.0;
    std::size_t seg_area = 0, gt_area = 0;

    void add_side(const Objects& primary, const Objects& counterpart,
                  const std::vector<std::vector<std::size_t>>& overlap, bool transpose,
                  double diagonal, double& dice_acc, double& haus_acc) {
        for (std::size_t i = 0; i < primary.count(); ++i) {
            std::vector<std::size_t> row(counterpart.count(), 0);
            for (std::size_t j = 0; j < counterpart.count(); ++j)
                row[j] = transpose ? overlap[j][i] : overlap[i][j];
            std::size_t j;
            const bool has_overlap = argmax_overlap(row, j);
            double dice_v = 0.0, haus_v;
            if (has_overlap) {
                dice_v = pixel_dice(counterpart.areas[j], primary.areas[i], row[j]);
                haus_v = hausdorff(primary.pixels[i], counterpart.pixels[j]);
            } else if (counterpart.count() > 0) {
                haus_v = std::numeric_limits<double>::max();
                for (std::size_t jj = 0; jj < counterpart.count(); ++jj)
                    haus_v = std::min(haus_v, hausdorff(primary.pixels[i], counterpart.pixels[jj]));
            } else {
                haus_v = diagonal;
            }
            dice_acc += static_cast<double>(primary.areas[i]) * dice_v;
            haus_acc += static_cast<double>(primary.areas[i]) * haus_v;
        }
    }

    void add(const InstanceMask& seg, const InstanceMask& gt) {
        const MatchStats stats = match_objects(seg, gt);
        tp += stats.n_tp;
        fp += stats.n_fp;
        fn += stats.n_fn;
        const Objects seg_objs = extract_objects(seg);
        const Objects gt_objs = extract_objects(gt);
        const auto overlap = overlap_matrix(seg, gt, seg_objs, gt_objs);
        const double diagonal =
            std::sqrt(static_cast<double>(seg.width) * seg.width +
                      static_cast<double>(seg.height) * seg.height);
        add_side(seg_objs, gt_objs, overlap, false, diagonal, dice_seg_weighted,
                 haus_seg_weighted);
        add_side(gt_objs, seg_objs, overlap, true, diagonal, dice_gt_weighted, haus_gt_weighted);
        for (std::size_t a : seg_objs.areas) seg_area += a;
        for (std::size_t a : gt_objs.areas) gt_area += a;
    }

    ImageMetrics overall() const {
        ImageMetrics m;
        m.name = "ALL";
        MatchStats pooled;
        pooled.n_tp = tp;
        pooled.n_fp = fp;
        pooled.n_fn = fn;
        const DetectionScore det = detection_f1(pooled);
        m.f1 = det.f1;
        m.precision = det.precision;
        m.recall = det.recall;
        if (seg_area == 0 && gt_area == 0) {
            m.object_dice = 1.0;
            m.object_hausdorff = 0.0;
        } else {
            const double seg_dice = seg_area > 0 ? dice_seg_weighted / seg_area : 0.0;
            const double gt_dice = gt_area > 0 ? dice_gt_weighted / gt_area : 0.0;
            m.object_dice = 0.5 * (seg_dice + gt_dice);
            const double seg_haus = seg_area > 0 ? haus_seg_weighted / seg_area : 0.0;
            const double gt_haus = gt_area > 0 ? haus_gt_weighted / gt_area : 0.0;
            m.object_hausdorff = 0.5 * (seg_haus + gt_haus);
        }
        return m;
    }
};

}  // namespace

SetMetrics evaluate_set(const std::vector<std::string>& names,
                        const std::vector<InstanceMask>& segs,
                        const std::vector<InstanceMask>& gts) {
    if (names.size() != segs.size() || names.size() != gts.size())
        throw std::invalid_argument("evaluate_set: names/segs/gts must align");
    if (names.empty()) throw std::invalid_argument("evaluate_set: no images");
    SetMetrics out;
    SetAccumulator acc;
    for (std::size_t i = 0; i < names.size(); ++i) {
        out.per_image.push_back(evaluate_pair(names[i], segs[i], gts[i]));
        acc.add(segs[i], gts[i]);
    }
    std::sort(out.per_image.begin(), out.per_image.end(),
              [](const ImageMetrics& a, const ImageMetrics& b) { return a.name < b.name; });
    out.overall = acc.overall();
    return out;
}

std::vector<TeamRanking> rank_teams(const std::vector<TeamScores>& scores) {
    if (scores.empty()) throw std::invalid_argument("rank_teams: need at least one team");
    const std::size_t n = scores.size();
    auto column = [&](double TeamScores::*field) {
        std::vector<double> v(n);
        for (std::size_t i = 0; i < n; ++i) v[i] = scores[i].*field;
        return v;
    };
    const auto f1_a = competition_rank(column(&TeamScores::f1_a), RankDirection::HigherBetter);
    const auto f1_b = competition_rank(column(&TeamScores::f1_b), RankDirection::HigherBetter);
    const auto dice_a = competition_rank(column(&TeamScores::dice_a), RankDirection::HigherBetter);
    const auto dice_b = competition_rank(column(&TeamScores::dice_b), RankDirection::HigherBetter);
    const auto haus_a = competition_rank(column(&TeamScores::haus_a), RankDirection::LowerBetter);
    const auto haus_b = competition_rank(column(&TeamScores::haus_b), RankDirection::LowerBetter);

    std::vector<TeamRanking> out(n);
    std::vector<double> sums(n);
    for (std::size_t i = 0; i < n; ++i) {
        out[i].team = scores[i].team;
        out[i].f1_a = f1_a[i];
        out[i].f1_b = f1_b[i];
        out[i].dice_a = dice_a[i];
        out[i].dice_b = dice_b[i];
        out[i].haus_a = haus_a[i];
        out[i].haus_b = haus_b[i];
        out[i].sum_score = f1_a[i] + f1_b[i] + dice_a[i] + dice_b[i] + haus_a[i] + haus_b[i];
        sums[i] = out[i].sum_score;
    }
    const auto final_ranks = competition_rank(sums, RankDirection::LowerBetter);
    for (std::size_t i = 0; i < n; ++i) out[i].final_rank = final_ranks[i];
    std::sort(out.begin(), out.end(), [](const TeamRanking& a, const TeamRanking& b) {
        if (a.final_rank != b.final_rank) return a.final_rank < b.final_rank;
        return a.team < b.team;
    });
    return out;
}

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> fields;
    std::string cur;
    for (char ch : line) {
        if (ch == ',') {
            fields.push_back(cur);
            cur.clear();
        } else if (ch != '\r') {
            cur.push_back(ch);
        }
    }
    fields.push_back(cur);
    return fields;
}

}  // namespace

void write_eval_csv(const std::string& path, const SetMetrics& metrics) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error(path + ": cannot open for writing");
    out << "image,f1,precision,recall,object_dice,object_hausdorff\n";
    char buf[256];
    auto row = [&](const ImageMetrics& m) {
        std::snprintf(buf, sizeof buf, "%s,%.6f,%.6f,%.6f,%.6f,%.6f\n", m.name.c_str(), m.f1,
                      m.precision, m.recall, m.object_dice, m.object_hausdorff);
        out << buf;
    };
    for (const ImageMetrics& m : metrics.per_image) row(m);
    row(metrics.overall);
    if (!out) throw std::runtime_error(path + ": write failed");
}

std::vector<TeamScores> read_scores_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error(path + ": cannot open for reading");
    std::string line;
    if (!std::getline(in, line)) throw std::runtime_error(path + ": empty file");
    if (split_csv_line(line) !=
        std::vector<std::string>{"team", "f1_a", "f1_b", "dice_a", "dice_b", "haus_a", "haus_b"})
        throw std::runtime_error(path + ": expected header team,f1_a,f1_b,dice_a,dice_b,haus_a,haus_b");
    std::vector<TeamScores> out;
    int line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty() || line == "\r") continue;
        const auto fields = split_csv_line(line);
        if (fields.size() != 7)
            throw std::runtime_error(path + ":" + std::to_string(line_no) +
                                     ": expected 7 fields, got " + std::to_string(fields.size()));
        TeamScores t;
        t.team = fields[0];
        try {
            t.f1_a = std::stod(fields[1]);
            t.f1_b = std::stod(fields[2]);
            t.dice_a = std::stod(fields[3]);
            t.dice_b = std::stod(fields[4]);
            t.haus_a = std::stod(fields[5]);
            t.haus_b = std::stod(fields[6]);
        } catch (const std::exception&) {
            throw std::runtime_error(path + ":" + std::to_string(line_no) + ": bad numeric field");
        }
        out.push_back(std::move(t));
    }
    return out;
}

void write_ranking_csv(const std::string& path, const std::vector<TeamRanking>& rankings) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error(path + ": cannot open for writing");
    out << "team,f1_a,f1_b,dice_a,dice_b,haus_a,haus_b,sum_score,final_rank\n";
    for (const TeamRanking& r : rankings)
        out << r.team << ',' << r.f1_a << ',' << r.f1_b << ',' << r.dice_a << ',' << r.dice_b
            << ',' << r.haus_a << ',' << r.haus_b << ',' << r.sum_score << ',' << r.final_rank
            << '\n';
    if (!out) throw std::runtime_error(path + ": write failed");
}

std::vector<TeamRanking> read_ranking_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error(path + ": cannot open for reading");
    std::string line;
    if (!std::getline(in, line)) throw std::runtime_error(path + ": empty file");
    std::vector<TeamRanking> out;
    while (std::getline(in, line)) {
        if (line.empty() || line == "\r") continue;
        const auto fields = split_csv_line(line);
        if (fields.size() != 9) throw std::runtime_error(path + ": expected 9 fields per row");
        TeamRanking r;
        r.team = fields[0];
        r.f1_a = std::stoi(fields[1]);
        r.f1_b = std::stoi(fields[2]);
        r.dice_a = std::stoi(fields[3]);
        r.dice_b = std::stoi(fields[4]);
        r.haus_a = std::stoi(fields[5]);
        r.haus_b = std::stoi(fields[6]);
        r.sum_score = std::stoi(fields[7]);
        r.final_rank = std::stoi(fields[8]);
        out.push_back(std::move(r));
    }
    return out;
}

}  // namespace dcan
