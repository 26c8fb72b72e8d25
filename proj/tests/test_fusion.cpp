#include <vector>

#include "dcan/fusion.hpp"
#include "dcan/morphology.hpp"
#include "dcan/rng.hpp"
#include "doctest.h"

using namespace dcan;

namespace {

ProbabilityMaps uniform_maps(int w, int h, double po, double pc) {
    ProbabilityMaps m(w, h);
    std::fill(m.p_object.begin(), m.p_object.end(), po);
    std::fill(m.p_contour.begin(), m.p_contour.end(), pc);
    return m;
}

}  // namespace

TEST_CASE("fusion boundary semantics") {
    FusionParams params;  // thresholds 0.5/0.5
    CHECK(fuse(uniform_maps(1, 1, 0.7, 0.2), params).at(0, 0) == 1);
    CHECK(fuse(uniform_maps(1, 1, 0.7, 0.5), params).at(0, 0) == 0);   // strict contour bound
    CHECK(fuse(uniform_maps(1, 1, 0.5, 0.49), params).at(0, 0) == 1);  // inclusive object bound
}

TEST_CASE("fuse is monotone in p_object and antitone in p_contour") {
    FusionParams params;
    Rng rng(3);
    ProbabilityMaps maps(12, 12);
    for (double& v : maps.p_object) v = rng.uniform();
    for (double& v : maps.p_contour) v = rng.uniform();
    const BinaryMask base = fuse(maps, params);

    ProbabilityMaps raised = maps;
    for (double& v : raised.p_object) v = std::min(1.0, v + 0.2);
    const BinaryMask up = fuse(raised, params);
    for (std::size_t i = 0; i < base.bits.size(); ++i)
        if (base.bits[i]) CHECK(up.bits[i] == 1);

    ProbabilityMaps calmer = maps;
    for (double& v : calmer.p_contour) v = std::max(0.0, v - 0.2);
    const BinaryMask calm = fuse(calmer, params);
    for (std::size_t i = 0; i < base.bits.size(); ++i)
        if (base.bits[i]) CHECK(calm.bits[i] == 1);
}

TEST_CASE("fuse with a zero contour plane is plain thresholding") {
    FusionParams params;
    Rng rng(5);
    ProbabilityMaps maps(10, 10);
    for (double& v : maps.p_object) v = rng.uniform();
    const BinaryMask fused = fuse(maps, params);
    for (std::size_t i = 0; i < fused.bits.size(); ++i)
        CHECK(fused.bits[i] == (maps.p_object[i] >= params.t_object ? 1 : 0));
}

TEST_CASE("fuse validates inputs") {
    FusionParams params;
    CHECK_THROWS_AS(fuse(std::vector<double>(4, 0.5), std::vector<double>(9, 0.5), 2, 2, params),
                    std::invalid_argument);
    FusionParams bad;
    bad.t_object = 1.5;
    CHECK_THROWS_AS(fuse(uniform_maps(2, 2, 0.5, 0.5), bad), std::invalid_argument);
}

TEST_CASE("postprocess pipeline on an empty mask") {
    FusionParams params;
    const InstanceMask out = postprocess(BinaryMask(16, 16), params);
    CHECK(out.max_label() == 0);
}

TEST_CASE("postprocess separates contour-split blobs and fills holes") {
    FusionParams params;
    params.smooth_radius = 0;  // isolate the topology steps
    params.min_area = 4;

    // two solid blobs separated by a 1-pixel gap
    BinaryMask split(20, 12);
    for (int y = 2; y < 10; ++y) {
        for (int x = 2; x < 9; ++x) split.at(x, y) = 1;
        for (int x = 10; x < 17; ++x) split.at(x, y) = 1;
    }
    const InstanceMask two = postprocess(split, params);
    CHECK(two.max_label() == 2);

    // a blob with a 2-pixel interior hole is closed
    BinaryMask holed(14, 14);
    for (int y = 2; y < 12; ++y)
        for (int x = 2; x < 12; ++x) holed.at(x, y) = 1;
    holed.at(6, 6) = holed.at(7, 6) = 0;
    const InstanceMask closed = postprocess(holed, params);
    CHECK(closed.max_label() == 1);
    CHECK(closed.at(6, 6) == 1);
    CHECK(closed.at(7, 6) == 1);
}

TEST_CASE("postprocess drops small components and is hole-free") {
    FusionParams params;
    params.smooth_radius = 0;
    params.min_area = 10;
    Rng rng(7);
    for (int trial = 0; trial < 10; ++trial) {
        BinaryMask m(24, 24);
        for (auto& b : m.bits) b = rng.uniform() < 0.45 ? 1 : 0;
        const InstanceMask out = postprocess(m, params);
        // no instance smaller than min_area
        std::vector<int> areas(out.max_label() + 1, 0);
        for (std::int32_t v : out.labels)
            if (v > 0) ++areas[v];
        for (std::size_t i = 1; i < areas.size(); ++i) CHECK(areas[i] >= params.min_area);
        // fill_holes afterwards is a no-op
        const BinaryMask fg = out.foreground();
        CHECK(fill_holes(fg) == fg);
    }
}

TEST_CASE("objects-only segmentation equals the fused path when contours are silent") {
    FusionParams params;
    params.min_area = 4;
    Rng rng(9);
    ProbabilityMaps maps(16, 16);
    for (double& v : maps.p_object) v = rng.uniform();
    // p_contour stays all zero
    const InstanceMask a = segment_objects_only(maps, params);
    const InstanceMask b = segment(maps, params);
    CHECK(a.labels == b.labels);

    ProbabilityMaps empty(8, 8);
    CHECK(segment_objects_only(empty, params).max_label() == 0);
}

TEST_CASE("contour band splits touching blobs that objects-only merges") {
    FusionParams params;
    params.smooth_radius = 0;
    params.min_area = 4;
    // one object plateau covering two touching squares, contour band between them
    ProbabilityMaps maps(22, 12);
    for (int y = 2; y < 10; ++y)
        for (int x = 2; x < 20; ++x) maps.p_object[y * 22 + x] = 0.9;
    for (int y = 0; y < 12; ++y)
        for (int x = 10; x < 12; ++x) maps.p_contour[y * 22 + x] = 0.9;

    const InstanceMask merged = segment_objects_only(maps, params);
    const InstanceMask split = segment(maps, params);
    CHECK(merged.max_label() == 1);
    CHECK(split.max_label() == 2);
}
