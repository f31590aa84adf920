#include <doctest.h>

#include <sstream>

#include <json.hpp>

#include "esmlr/evaluation.hpp"
#include "esmlr/rng.hpp"

using namespace esmlr;

namespace {

ConfusionMatrix from_rows(std::initializer_list<std::initializer_list<int>> rows) {
    ConfusionMatrix cm;
    const int m = static_cast<int>(rows.size());
    cm.counts = Eigen::MatrixXi::Zero(m, m);
    int r = 0;
    for (const auto& row : rows) {
        int c = 0;
        for (int v : row) cm.counts(r, c++) = v;
        ++r;
    }
    return cm;
}

}  // namespace

TEST_CASE("confusion matrix accumulation") {
    const ConfusionMatrix perfect = confusion({1, 2, 3, 2}, {1, 2, 3, 2}, 3);
    CHECK(perfect.counts.diagonal().sum() == 4);
    CHECK(perfect.counts.sum() == 4);
    CHECK(oa(perfect) == 1.0);
    CHECK(aa(perfect) == 1.0);
    CHECK(kappa(perfect) == doctest::Approx(1.0));

    const ConfusionMatrix swapped = confusion({1, 2}, {2, 1}, 2);
    CHECK(swapped.counts(0, 1) == 1);
    CHECK(swapped.counts(1, 0) == 1);
    CHECK(swapped.counts.diagonal().sum() == 0);

    const ConfusionMatrix empty = confusion({}, {}, 2);
    CHECK(empty.counts.isZero());
    CHECK(empty.total() == 0);
    CHECK_THROWS_AS(oa(empty), std::invalid_argument);

    CHECK_THROWS_AS(confusion({1}, {1, 2}, 2), std::invalid_argument);
    CHECK_THROWS_AS(confusion({1}, {3}, 2), std::invalid_argument);
    CHECK_THROWS_AS(confusion({0}, {1}, 2), std::invalid_argument);
}

TEST_CASE("metrics reproduce the hand-derived cases") {
    SUBCASE("kappa 0.70 at oa 0.85") {
        const ConfusionMatrix cm = from_rows({{40, 10}, {5, 45}});
        CHECK(oa(cm) == doctest::Approx(0.85).epsilon(1e-15));
        const auto per = per_class_accuracy(cm);
        CHECK(per[0] == doctest::Approx(0.8));
        CHECK(per[1] == doctest::Approx(0.9));
        CHECK(aa(cm) == doctest::Approx(0.85));
        CHECK(kappa(cm) == doctest::Approx(0.70).epsilon(1e-12));
    }
    SUBCASE("uniform table scores zero skill") {
        const ConfusionMatrix cm = from_rows({{1, 1}, {1, 1}});
        CHECK(oa(cm) == doctest::Approx(0.5));
        CHECK(kappa(cm) == doctest::Approx(0.0));
    }
    SUBCASE("single-class degenerate chance agreement") {
        const ConfusionMatrix cm = from_rows({{5, 0}, {0, 0}});
        CHECK(kappa(cm) == 1.0);
        CHECK_THROWS_AS(aa(cm), std::invalid_argument);
    }
    SUBCASE("kappa never exceeds oa for positive chance agreement") {
        Rng rng(61);
        for (int trial = 0; trial < 50; ++trial) {
            const int m = 2 + static_cast<int>(rng.below(4));
            ConfusionMatrix cm;
            cm.counts = Eigen::MatrixXi::Zero(m, m);
            for (int i = 0; i < m; ++i)
                for (int j = 0; j < m; ++j)
                    cm.counts(i, j) = static_cast<int>(rng.below(20)) + (i == j ? 5 : 0);
            CHECK(kappa(cm) <= oa(cm) + 1e-12);
        }
    }
    SUBCASE("oa is invariant under joint class relabeling") {
        const ConfusionMatrix cm = from_rows({{7, 2, 1}, {0, 9, 3}, {4, 0, 6}});
        ConfusionMatrix permuted;
        const std::vector<int> perm{2, 0, 1};
        permuted.counts = Eigen::MatrixXi::Zero(3, 3);
        for (int i = 0; i < 3; ++i)
            for (int j = 0; j < 3; ++j)
                permuted.counts(perm[static_cast<std::size_t>(i)],
                                perm[static_cast<std::size_t>(j)]) = cm.counts(i, j);
        CHECK(oa(permuted) == doctest::Approx(oa(cm)).epsilon(1e-15));
        CHECK(kappa(permuted) == doctest::Approx(kappa(cm)).epsilon(1e-12));
    }
}

TEST_CASE("report aggregation") {
    const ConfusionMatrix a = from_rows({{8, 2}, {1, 9}});
    const ConfusionMatrix b = from_rows({{9, 1}, {2, 8}});
    const MetricsReport ra = make_report(a, 1.0, 0.5, 11);
    const MetricsReport rb = make_report(b, 3.0, 1.5, 12);
    CHECK(ra.oa == doctest::Approx(0.85));
    CHECK(ra.aa == doctest::Approx(0.85));

    SUBCASE("single report has zero spread") {
        const MetricsSummary s = aggregate({ra});
        CHECK(s.trials == 1);
        CHECK(s.oa_mean == doctest::Approx(ra.oa));
        CHECK(s.oa_std == 0.0);
        CHECK(s.per_class_std[0] == 0.0);
    }
    SUBCASE("two reports average their metrics") {
        const MetricsSummary s = aggregate({ra, rb});
        CHECK(s.oa_mean == doctest::Approx(0.85));
        CHECK(s.train_seconds_mean == doctest::Approx(2.0));
        CHECK(s.test_seconds_mean == doctest::Approx(1.0));
        // sample std of {0.85, 0.85} is 0; per-class accuracies differ though
        CHECK(s.per_class_mean[0] == doctest::Approx(0.85));
        CHECK(s.per_class_std[0] > 0.0);
    }
    SUBCASE("identical reports collapse the spread") {
        // The running mean rounds in its last ulp, so the spread is bounded
        // rather than exactly zero.
        const std::vector<MetricsReport> ten(10, ra);
        const MetricsSummary s = aggregate(ten);
        CHECK(s.oa_std < 1e-14);
        CHECK(s.aa_std < 1e-14);
        CHECK(s.kappa_std < 1e-14);
    }
    SUBCASE("empty and inconsistent inputs") {
        CHECK_THROWS_AS(aggregate({}), std::invalid_argument);
        MetricsReport odd = ra;
        odd.per_class.push_back(1.0);
        CHECK_THROWS_AS(aggregate({ra, odd}), std::invalid_argument);
    }
}

TEST_CASE("csv and json serialization") {
    const MetricsReport r1 = make_report(from_rows({{8, 2}, {1, 9}}), 1.25, 0.25, 100);
    const MetricsReport r2 = make_report(from_rows({{10, 0}, {0, 10}}), 1.75, 0.75, 101);
    const std::vector<MetricsReport> reports{r1, r2};

    SUBCASE("trial rows without timings") {
        std::ostringstream out;
        write_trials_csv(out, reports, "esmlr", "spectral", false);
        std::istringstream in(out.str());
        std::string header, row0, row1;
        std::getline(in, header);
        std::getline(in, row0);
        std::getline(in, row1);
        CHECK(header == "variant,mode,trial,seed,oa,aa,kappa,class1,class2");
        CHECK(row0.rfind("esmlr,spectral,0,100,0.85,", 0) == 0);
        CHECK(row1.rfind("esmlr,spectral,1,101,1,1,1,1,1", 0) == 0);
    }
    SUBCASE("timed rows append the wall clock") {
        std::ostringstream out;
        write_trials_csv(out, reports, "smlr", "mfl", true);
        std::string header;
        std::istringstream in(out.str());
        std::getline(in, header);
        CHECK(header ==
              "variant,mode,trial,seed,oa,aa,kappa,class1,class2,train_seconds,test_seconds");
        CHECK(out.str().find("1.25,0.25") != std::string::npos);
    }
    SUBCASE("summary json carries the aggregate and the trials") {
        const MetricsSummary s = aggregate(reports);
        const auto j = nlohmann::json::parse(summary_to_json(s, reports, "esmlr", "mfl"));
        CHECK(j.at("variant") == "esmlr");
        CHECK(j.at("trials") == 2);
        CHECK(j.at("oa").at("mean").get<double>() == doctest::Approx(0.925));
        CHECK(j.at("per_trial").size() == 2);
        CHECK(j.at("per_trial")[1].at("oa").get<double>() == doctest::Approx(1.0));
    }
}
