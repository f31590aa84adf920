#include <doctest.h>

#include <cmath>

#include "esmlr/emaps.hpp"
#include "esmlr/errors.hpp"
#include "esmlr/rng.hpp"
#include "esmlr/synthetic.hpp"
#include "oracles.hpp"
#include "testutil.hpp"

using namespace esmlr;

namespace {

GrayImage image_from(int height, int width, std::initializer_list<int> levels) {
    GrayImage img;
    img.height = height;
    img.width = width;
    for (int v : levels) img.levels.push_back(static_cast<std::uint8_t>(v));
    return img;
}

GrayImage random_image(int height, int width, int level_count, Rng& rng) {
    GrayImage img;
    img.height = height;
    img.width = width;
    img.levels.resize(static_cast<std::size_t>(height) * width);
    for (auto& v : img.levels)
        v = static_cast<std::uint8_t>(rng.below(static_cast<std::uint64_t>(level_count)));
    return img;
}

bool pointwise_leq(const GrayImage& a, const GrayImage& b) {
    for (std::size_t i = 0; i < a.levels.size(); ++i)
        if (a.levels[i] > b.levels[i]) return false;
    return true;
}

}  // namespace

TEST_CASE("quantize maps extremes and rounds half up") {
    Eigen::MatrixXd r(1, 3);
    r << 0.0, 0.5, 1.0;
    GrayImage q = quantize(r);
    CHECK(q.levels == std::vector<std::uint8_t>{0, 128, 255});

    r << -2.0, 0.0, 2.0;
    q = quantize(r);
    CHECK(q.levels == std::vector<std::uint8_t>{0, 128, 255});

    r << 3.5, 3.5, 3.5;
    q = quantize(r);
    CHECK(q.levels == std::vector<std::uint8_t>{0, 0, 0});
}

TEST_CASE("area thinning basics") {
    SUBCASE("threshold one is the identity") {
        Rng rng(3);
        const GrayImage img = random_image(7, 5, 256, rng);
        CHECK(area_thinning(img, 1, 4).levels == img.levels);
    }
    SUBCASE("an isolated bright pixel vanishes") {
        GrayImage img;
        img.height = 8;
        img.width = 8;
        img.levels.assign(64, 0);
        img.at(3, 4) = 255;
        const GrayImage out = area_thinning(img, 2, 4);
        CHECK(out.at(3, 4) == 0);
        CHECK(out.levels == std::vector<std::uint8_t>(64, 0));
    }
    SUBCASE("flat image unchanged for any threshold") {
        GrayImage img;
        img.height = 4;
        img.width = 4;
        img.levels.assign(16, 9);
        CHECK(area_thinning(img, 1000, 4).levels == img.levels);
    }
    SUBCASE("a two-pixel plateau survives threshold two") {
        GrayImage img = image_from(2, 3, {0, 7, 7, 0, 0, 0});
        const GrayImage out = area_thinning(img, 2, 4);
        CHECK(out.levels == img.levels);
        const GrayImage gone = area_thinning(img, 3, 4);
        CHECK(gone.levels == std::vector<std::uint8_t>(6, 0));
    }
    SUBCASE("connectivity matters for diagonals") {
        GrayImage img = image_from(2, 2, {5, 0, 0, 5});
        CHECK(area_thinning(img, 2, 4).levels == std::vector<std::uint8_t>{0, 0, 0, 0});
        CHECK(area_thinning(img, 2, 8).levels == img.levels);
    }
}

TEST_CASE("area thickening duals the thinning") {
    GrayImage img;
    img.height = 8;
    img.width = 8;
    img.levels.assign(64, 255);
    img.at(2, 2) = 0;
    const GrayImage out = area_thickening(img, 2, 4);
    CHECK(out.at(2, 2) == 255);

    Rng rng(17);
    for (int trial = 0; trial < 25; ++trial) {
        const GrayImage f = random_image(9, 9, 256, rng);
        const int lambda = 1 + static_cast<int>(rng.below(12));
        GrayImage inverted = f;
        for (auto& v : inverted.levels) v = static_cast<std::uint8_t>(255 - v);
        GrayImage via_dual = area_thinning(inverted, lambda, 4);
        for (auto& v : via_dual.levels) v = static_cast<std::uint8_t>(255 - v);
        CHECK(area_thickening(f, lambda, 4).levels == via_dual.levels);
    }
}

TEST_CASE("area opening agrees with the level-set oracle") {
    Rng rng(41);
    for (int trial = 0; trial < 200; ++trial) {
        const int conn = trial % 2 == 0 ? 4 : 8;
        const GrayImage img = random_image(6, 6, 3, rng);
        const int lambda = 1 + static_cast<int>(rng.below(9));
        const GrayImage fast = area_thinning(img, lambda, conn);
        const GrayImage slow = oracle::area_opening_bruteforce(img, lambda, conn);
        REQUIRE(fast.levels == slow.levels);
    }
}

TEST_CASE("morphological filter laws on random 16x16 images") {
    Rng rng(53);
    for (int trial = 0; trial < 40; ++trial) {
        const GrayImage f = random_image(16, 16, 256, rng);
        const int lambda = 2 + static_cast<int>(rng.below(40));
        const GrayImage once = area_thinning(f, lambda, 4);

        CHECK(area_thinning(once, lambda, 4).levels == once.levels);
        CHECK(pointwise_leq(once, f));

        const GrayImage thick = area_thickening(f, lambda, 4);
        CHECK(pointwise_leq(f, thick));
        CHECK(area_thickening(thick, lambda, 4).levels == thick.levels);

        const int bigger = lambda + 1 + static_cast<int>(rng.below(40));
        CHECK(area_thinning(area_thinning(f, lambda, 4), bigger, 4).levels ==
              area_thinning(f, bigger, 4).levels);
    }
}

TEST_CASE("attribute profile layout") {
    Rng rng(9);
    const GrayImage img = random_image(10, 10, 256, rng);
    const ApSpec spec{{100, 200, 500, 1000}, 4};
    const auto profile = build_ap(img, spec);
    REQUIRE(profile.size() == 9);
    CHECK(profile[4].levels == img.levels);
    CHECK(profile[0].levels == area_thickening(img, 1000, 4).levels);
    CHECK(profile[3].levels == area_thickening(img, 100, 4).levels);
    CHECK(profile[5].levels == area_thinning(img, 100, 4).levels);
    CHECK(profile[8].levels == area_thinning(img, 1000, 4).levels);

    SUBCASE("flat input gives identical images") {
        GrayImage flat;
        flat.height = 5;
        flat.width = 5;
        flat.levels.assign(25, 77);
        for (const auto& p : build_ap(flat, spec)) CHECK(p.levels == flat.levels);
    }
    SUBCASE("thresholds must ascend") {
        CHECK_THROWS_AS(build_ap(img, ApSpec{{200, 100}, 4}), std::invalid_argument);
        CHECK_THROWS_AS(build_ap(img, ApSpec{{100, 100}, 4}), std::invalid_argument);
        CHECK_THROWS_AS(build_ap(img, ApSpec{{0, 100}, 4}), std::invalid_argument);
    }
}

TEST_CASE("pca retains by cumulative eigenvalue share") {
    SUBCASE("data on a line needs one component") {
        Eigen::MatrixXd x(3, 12);
        Eigen::Vector3d dir(1.0, -2.0, 0.5);
        for (int i = 0; i < 12; ++i) x.col(i) = dir * (0.3 * i - 1.0);
        const PcaModel m = pca_fit(x);
        CHECK(m.retained == 1);
        CHECK(m.eigenvalues(0) / m.eigenvalues.sum() >= 0.99);
    }
    SUBCASE("isotropic 2-d cloud needs both") {
        Rng rng(29);
        Eigen::MatrixXd x(2, 400);
        for (int i = 0; i < 400; ++i) {
            x(0, i) = rng.normal();
            x(1, i) = rng.normal();
        }
        CHECK(pca_fit(x).retained == 2);
    }
    SUBCASE("covariance eigenvalues match the closed 2x2 form") {
        Rng rng(31);
        Eigen::MatrixXd x(2, 60);
        for (int i = 0; i < 60; ++i) {
            const double t = rng.normal();
            x(0, i) = 2.0 * t + 0.3 * rng.normal();
            x(1, i) = -t + 0.3 * rng.normal();
        }
        const Eigen::VectorXd mean = x.rowwise().mean();
        const Eigen::MatrixXd centered = x.colwise() - mean;
        const Eigen::MatrixXd cov = centered * centered.transpose() / 59.0;
        const auto [hi, lo] = oracle::eig2_sym(cov(0, 0), cov(0, 1), cov(1, 1));

        const PcaModel m = pca_fit(x);
        CHECK(m.eigenvalues(0) == doctest::Approx(hi).epsilon(1e-10));
        CHECK(m.eigenvalues(1) == doctest::Approx(lo).epsilon(1e-10));
        CHECK((m.components.transpose() * m.components -
               Eigen::MatrixXd::Identity(2, 2)).cwiseAbs().maxCoeff() < 1e-10);
    }
    SUBCASE("degenerate inputs") {
        CHECK_THROWS_AS(pca_fit(Eigen::MatrixXd::Random(3, 1)), std::invalid_argument);
        CHECK_THROWS_AS(pca_fit(Eigen::MatrixXd::Constant(3, 5, 2.0)), NumericalError);
    }
}

TEST_CASE("pca projection matches per-pixel dot products") {
    const auto [cube_raw, gt] = make_blob_scene(BlobSceneSpec{8, 8, 5, 2}, 77);
    const HsiCube cube = normalize_unit_max(cube_raw);
    const Eigen::MatrixXd x = flatten_all(cube);
    const PcaModel m = pca_fit(x);
    const auto rasters = pca_project_to_images(m, cube);
    REQUIRE(static_cast<int>(rasters.size()) == m.retained);
    for (int c = 0; c < m.retained; ++c)
        for (int r = 0; r < 8; ++r)
            for (int col = 0; col < 8; ++col) {
                double dot = 0.0;
                for (int b = 0; b < 5; ++b)
                    dot += m.components(b, c) * (cube.value(r, col, b) - m.mean(b));
                CHECK(rasters[static_cast<std::size_t>(c)](r, col) ==
                      doctest::Approx(dot).epsilon(1e-12));
            }

    SUBCASE("full reconstruction recovers the data") {
        const Eigen::MatrixXd centered = x.colwise() - m.mean;
        const Eigen::MatrixXd coeffs = m.components.transpose() * centered;
        const double rel = (m.components * coeffs - centered).norm() / centered.norm();
        CHECK(rel < 1e-8);
    }
}

TEST_CASE("emap stack construction and flattening") {
    const auto [cube_raw, gt] = make_blob_scene(BlobSceneSpec{20, 20, 6, 3}, 5);
    const HsiCube cube = normalize_unit_max(cube_raw);
    const ApSpec spec{{4, 16}, 4};
    const EmapStack stack = build_emaps(cube, spec);

    const Eigen::MatrixXd x = flatten_all(cube);
    const int c = pca_fit(x).retained;
    REQUIRE(static_cast<int>(stack.images.size()) == c * 5);
    CHECK(static_cast<int>(stack.layout.size()) == c * 5);
    CHECK(stack.layout[0].component == 0);
    CHECK(stack.layout[0].kind == ProfileKind::Thickening);
    CHECK(stack.layout[0].threshold == 16);
    CHECK(stack.layout[2].kind == ProfileKind::Original);
    CHECK(stack.layout[2].threshold == 0);
    CHECK(stack.layout[4].threshold == 16);
    CHECK(stack.layout[4].kind == ProfileKind::Thinning);

    SUBCASE("features align with pixel index and live in [0,1]") {
        const LabeledDataset ds = flatten_labeled(cube, gt);
        const FeatureBlock f = emap_features(stack, ds.pixel_index);
        CHECK(f.rows() == static_cast<Eigen::Index>(stack.images.size()));
        CHECK(f.cols() == ds.sample_count());
        CHECK(f.tag == BlockTag::Spatial);
        CHECK(f.values.minCoeff() >= 0.0);
        CHECK(f.values.maxCoeff() <= 1.0);
        const auto [r0, c0] = ds.pixel_index[3];
        CHECK(f.values(1, 3) ==
              doctest::Approx(stack.images[1].at(r0, c0) / 255.0).epsilon(1e-12));
    }
    SUBCASE("unnormalized cube rejected") {
        CHECK_THROWS_AS(build_emaps(cube_raw, spec), std::invalid_argument);
    }
    SUBCASE("constant cube degrades to one zero component") {
        HsiCube flat;
        flat.height = 4;
        flat.width = 4;
        flat.bands = 2;
        flat.values.assign(32, 0.5);
        flat.normalized = true;
        const EmapStack zero = build_emaps(flat, spec);
        REQUIRE(zero.images.size() == 5);
        for (const auto& img : zero.images)
            CHECK(img.levels == std::vector<std::uint8_t>(16, 0));
    }
    SUBCASE("stack dump writes the manifest") {
        const auto dir = testutil::scratch_dir("emdump");
        dump_emap_stack(stack, (dir / "st").string());
        CHECK(std::filesystem::file_size(dir / "st.f32") ==
              stack.images.size() * 20 * 20 * 4);
        const std::string manifest = testutil::read_text(dir / "st.json");
        CHECK(manifest.find("\"layout\"") != std::string::npos);
    }
}
