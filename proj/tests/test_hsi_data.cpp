#include <doctest.h>

#include <algorithm>
#include <set>

#include "esmlr/errors.hpp"
#include "esmlr/hsi_data.hpp"
#include "testutil.hpp"

using namespace esmlr;

TEST_CASE("cube round-trips through the raw format") {
    const auto dir = testutil::scratch_dir("cube_rt");
    HsiCube cube;
    cube.height = 2;
    cube.width = 2;
    cube.bands = 1;
    cube.values = {1, 2, 3, 4};
    save_cube(cube, (dir / "c.bsq").string());

    const HsiCube back = load_cube((dir / "c.bsq").string());
    CHECK(back.height == 2);
    CHECK(back.width == 2);
    CHECK(back.bands == 1);
    CHECK_FALSE(back.normalized);
    CHECK(back.value(0, 0, 0) == 1.0);
    CHECK(back.value(0, 1, 0) == 2.0);
    CHECK(back.value(1, 0, 0) == 3.0);
    CHECK(back.value(1, 1, 0) == 4.0);
}

TEST_CASE("cube loading validates the header and file length") {
    const auto dir = testutil::scratch_dir("cube_bad");
    HsiCube cube;
    cube.height = 2;
    cube.width = 2;
    cube.bands = 2;
    cube.values.assign(8, 1.0);
    save_cube(cube, (dir / "c.bsq").string());

    SUBCASE("truncated payload") {
        auto bytes = testutil::read_text(dir / "c.bsq");
        bytes.resize(bytes.size() - 4);
        testutil::write_text(dir / "c.bsq", bytes);
        CHECK_THROWS_AS(load_cube((dir / "c.bsq").string()), DataError);
    }
    SUBCASE("missing sidecar") {
        std::filesystem::remove(dir / "c.json");
        CHECK_THROWS_AS(load_cube((dir / "c.bsq").string()), DataError);
    }
    SUBCASE("wrong interleave") {
        testutil::write_text(dir / "c.json",
                             R"({"height":2,"width":2,"bands":2,"interleave":"bip","dtype":"f32le"})");
        CHECK_THROWS_AS(load_cube((dir / "c.bsq").string()), DataError);
    }
    SUBCASE("non-positive dimension") {
        testutil::write_text(dir / "c.json",
                             R"({"height":0,"width":2,"bands":2,"interleave":"bsq","dtype":"f32le"})");
        CHECK_THROWS_AS(load_cube((dir / "c.bsq").string()), DataError);
    }
}

TEST_CASE("unit-max normalization") {
    HsiCube cube;
    cube.height = 1;
    cube.width = 3;
    cube.bands = 1;
    cube.values = {2, 4, 8};

    const HsiCube norm = normalize_unit_max(cube);
    CHECK(norm.normalized);
    CHECK(norm.values[0] == doctest::Approx(0.25));
    CHECK(norm.values[1] == doctest::Approx(0.5));
    CHECK(norm.values[2] == doctest::Approx(1.0));

    SUBCASE("idempotent") {
        const HsiCube again = normalize_unit_max(norm);
        CHECK(again.values == norm.values);
    }
    SUBCASE("negative values rejected") {
        cube.values = {-1, 1, 2};
        CHECK_THROWS_AS(normalize_unit_max(cube), DataError);
    }
    SUBCASE("no positive value") {
        cube.values = {0, 0, 0};
        CHECK_THROWS_AS(normalize_unit_max(cube), DataError);
    }
}

TEST_CASE("ground truth loads from CSV and raw rasters") {
    const auto dir = testutil::scratch_dir("gt");
    testutil::write_text(dir / "g.json", R"({"height":2,"width":2})");

    SUBCASE("csv happy path") {
        testutil::write_text(dir / "g.csv", "0,0,1\n1,1,2\n");
        const GroundTruth gt = load_ground_truth((dir / "g.csv").string());
        CHECK(gt.class_count == 2);
        CHECK(gt.labeled_count() == 2);
        CHECK(gt.label(0, 0) == 1);
        CHECK(gt.label(0, 1) == 0);
        CHECK(gt.label(1, 1) == 2);
    }
    SUBCASE("duplicate pixel") {
        testutil::write_text(dir / "g.csv", "0,0,1\n0,0,2\n");
        CHECK_THROWS_AS(load_ground_truth((dir / "g.csv").string()), DataError);
    }
    SUBCASE("pixel outside dimensions") {
        testutil::write_text(dir / "g.csv", "5,0,1\n");
        CHECK_THROWS_AS(load_ground_truth((dir / "g.csv").string()), DataError);
    }
    SUBCASE("negative label") {
        testutil::write_text(dir / "g.csv", "0,0,-1\n");
        CHECK_THROWS_AS(load_ground_truth((dir / "g.csv").string()), DataError);
    }
    SUBCASE("no labeled pixel") {
        testutil::write_text(dir / "g.csv", "0,0,0\n");
        CHECK_THROWS_AS(load_ground_truth((dir / "g.csv").string()), DataError);
    }
    SUBCASE("gap in the class range") {
        testutil::write_text(dir / "g.csv", "0,0,2\n");
        CHECK_THROWS_AS(load_ground_truth((dir / "g.csv").string()), DataError);
    }
    SUBCASE("raster round-trip") {
        GroundTruth gt;
        gt.height = 2;
        gt.width = 2;
        gt.labels = {1, 0, 2, 1};
        save_ground_truth(gt, (dir / "r.labels").string());
        const GroundTruth back = load_ground_truth((dir / "r.labels").string());
        CHECK(back.labels == gt.labels);
        CHECK(back.class_count == 2);
    }
}

namespace {

HsiCube ramp_cube(int height, int width, int bands) {
    HsiCube cube;
    cube.height = height;
    cube.width = width;
    cube.bands = bands;
    cube.values.resize(static_cast<std::size_t>(height) * width * bands);
    for (std::size_t i = 0; i < cube.values.size(); ++i)
        cube.values[i] = static_cast<double>(i + 1);
    return normalize_unit_max(cube);
}

}  // namespace

TEST_CASE("flatten_labeled walks labeled pixels in raster order") {
    const HsiCube cube = ramp_cube(2, 2, 3);
    GroundTruth gt;
    gt.height = 2;
    gt.width = 2;
    gt.labels = {0, 2, 1, 0};
    gt.class_count = 2;

    const LabeledDataset ds = flatten_labeled(cube, gt);
    CHECK(ds.sample_count() == 2);
    CHECK(ds.features.rows() == 3);
    CHECK(ds.labels == std::vector<int>{2, 1});
    CHECK(ds.pixel_index == std::vector<std::pair<int, int>>{{0, 1}, {1, 0}});
    CHECK((ds.features.col(0) - cube.spectrum(0, 1)).norm() == 0.0);
    CHECK((ds.features.col(1) - cube.spectrum(1, 0)).norm() == 0.0);

    SUBCASE("unnormalized cube rejected") {
        HsiCube raw = cube;
        raw.normalized = false;
        CHECK_THROWS_AS(flatten_labeled(raw, gt), std::invalid_argument);
    }
    SUBCASE("dimension mismatch") {
        GroundTruth other = gt;
        other.width = 3;
        other.labels = {0, 2, 1, 0, 0, 0};
        CHECK_THROWS_AS(flatten_labeled(cube, other), DataError);
    }
    SUBCASE("flatten_all covers every pixel") {
        const Eigen::MatrixXd all = flatten_all(cube);
        CHECK(all.rows() == 3);
        CHECK(all.cols() == 4);
        CHECK((all.col(3) - cube.spectrum(1, 1)).norm() == 0.0);
    }
}

namespace {

LabeledDataset synthetic_classes(const std::vector<int>& class_sizes) {
    LabeledDataset ds;
    ds.class_count = static_cast<int>(class_sizes.size());
    int n = 0;
    for (int s : class_sizes) n += s;
    ds.features = Eigen::MatrixXd::Zero(1, n);
    int at = 0;
    for (std::size_t c = 0; c < class_sizes.size(); ++c)
        for (int k = 0; k < class_sizes[c]; ++k) {
            ds.labels.push_back(static_cast<int>(c) + 1);
            ds.pixel_index.emplace_back(0, at);
            ds.features(0, at) = at;
            ++at;
        }
    return ds;
}

}  // namespace

TEST_CASE("per-class split honors counts, cap rule and determinism") {
    SUBCASE("explicit count 3 on a class of 54") {
        const LabeledDataset ds = synthetic_classes({54});
        Rng rng(11);
        const Split s = split_per_class(ds, SplitSpec{0, {3}, true}, rng);
        CHECK(s.train_idx.size() == 3);
        CHECK(s.test_idx.size() == 51);
    }
    SUBCASE("Q=40 on a class of 46 caps at half") {
        const LabeledDataset ds = synthetic_classes({46});
        Rng rng(11);
        const Split s = split_per_class(ds, SplitSpec{40, {}, true}, rng);
        CHECK(s.train_idx.size() == 23);
        CHECK(s.test_idx.size() == 23);
    }
    SUBCASE("Q=5 on a class of 100") {
        const LabeledDataset ds = synthetic_classes({100});
        Rng rng(11);
        const Split s = split_per_class(ds, SplitSpec{5, {}, true}, rng);
        CHECK(s.train_idx.size() == 5);
        CHECK(s.test_idx.size() == 95);
    }
    SUBCASE("explicit count larger than the class errors even under the cap") {
        const LabeledDataset ds = synthetic_classes({10, 4});
        Rng rng(11);
        SplitSpec spec{0, {3, 7}, true};
        CHECK_THROWS_AS(split_per_class(ds, spec, rng), std::invalid_argument);
    }
    SUBCASE("uncapped Q beyond the class errors") {
        const LabeledDataset ds = synthetic_classes({6});
        Rng rng(11);
        CHECK_THROWS_AS(split_per_class(ds, SplitSpec{9, {}, false}, rng),
                        std::invalid_argument);
    }
    SUBCASE("deterministic, complete and disjoint") {
        const LabeledDataset ds = synthetic_classes({20, 35, 11});
        const SplitSpec spec{4, {}, true};
        Rng r1(99), r2(99), r3(100);
        const Split a = split_per_class(ds, spec, r1);
        const Split b = split_per_class(ds, spec, r2);
        const Split c = split_per_class(ds, spec, r3);
        CHECK(a.train_idx == b.train_idx);
        CHECK(a.test_idx == b.test_idx);
        CHECK(a.train_idx != c.train_idx);

        CHECK(a.train_idx.size() + a.test_idx.size() == 66);
        std::set<int> all(a.train_idx.begin(), a.train_idx.end());
        all.insert(a.test_idx.begin(), a.test_idx.end());
        CHECK(all.size() == 66);
        CHECK(std::is_sorted(a.train_idx.begin(), a.train_idx.end()));
        CHECK(std::is_sorted(a.test_idx.begin(), a.test_idx.end()));
    }
    SUBCASE("per-class train counts are exact per class") {
        const LabeledDataset ds = synthetic_classes({9, 30});
        Rng rng(5);
        const Split s = split_per_class(ds, SplitSpec{0, {4, 12}, true}, rng);
        int first = 0;
        for (int i : s.train_idx)
            if (ds.labels[static_cast<std::size_t>(i)] == 1) ++first;
        CHECK(first == 4);
        CHECK(s.train_idx.size() == 16);
    }
}
