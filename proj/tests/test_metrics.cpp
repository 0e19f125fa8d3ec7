#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <map>

#include "oracles.hpp"
#include "voxatlas/error.hpp"
#include "voxatlas/metrics.hpp"
#include "voxatlas/rng.hpp"

using namespace voxatlas;

namespace {

LabelVolume labels_from(const Geometry& g, std::vector<std::uint8_t> data) {
    return LabelVolume(g, std::move(data));
}

LabelVolume random_labels(const Geometry& g, std::uint64_t seed, double fg_prob = 0.3) {
    Rng rng(seed);
    std::vector<std::uint8_t> data(g.voxel_count());
    for (auto& v : data)
        v = rng.uniform() < fg_prob ? static_cast<std::uint8_t>(1 + rng.below(3)) : 0;
    return LabelVolume(g, std::move(data));
}

Geometry small_grid(std::array<int, 3> dims, std::array<double, 3> spacing = {1, 1, 1}) {
    Geometry g;
    g.dims = dims;
    g.spacing = spacing;
    return g;
}

}  // namespace

TEST_SUITE("metrics") {

TEST_CASE("dice: identity, disjoint, and half overlap") {
    Geometry g = small_grid({10, 10, 4});
    LabelVolume a = random_labels(g, 1);
    CHECK(dice(a, a, 1) == 1.0);
    CHECK(dice(a, a, 2) == 1.0);

    // disjoint equal-size sets
    std::vector<std::uint8_t> p(g.voxel_count(), 0), q(g.voxel_count(), 0);
    for (int i = 0; i < 20; ++i) p[i] = 1;
    for (int i = 20; i < 40; ++i) q[i] = 1;
    CHECK(dice(labels_from(g, p), labels_from(g, q), 1) == 0.0);

    // |A| = |B| = 100, |A n B| = 50
    std::vector<std::uint8_t> x(g.voxel_count(), 0), y(g.voxel_count(), 0);
    for (int i = 0; i < 100; ++i) x[i] = 1;
    for (int i = 50; i < 150; ++i) y[i] = 1;
    CHECK(dice(labels_from(g, x), labels_from(g, y), 1) == doctest::Approx(0.5));
}

TEST_CASE("dice conventions for empty sets") {
    Geometry g = small_grid({4, 4, 4});
    const LabelVolume empty = LabelVolume::filled(g, 0);
    LabelVolume one = empty;
    {
        std::vector<std::uint8_t> d(g.voxel_count(), 0);
        d[0] = 2;
        one = labels_from(g, d);
    }
    CHECK(dice(empty, empty, 2) == 1.0);  // agreement on absence
    CHECK(dice(one, empty, 2) == 0.0);
    CHECK(dice(empty, one, 2) == 0.0);
}

TEST_CASE("hausdorff: identity and two singletons") {
    Geometry g = small_grid({8, 8, 8});
    LabelVolume a = random_labels(g, 3);
    CHECK(hausdorff(a, a, 1) == 0.0);

    std::vector<std::uint8_t> p(g.voxel_count(), 0), q(g.voxel_count(), 0);
    p[linear_index(g, 1, 1, 1)] = 1;
    q[linear_index(g, 4, 1, 1)] = 1;  // 3 voxels apart along x, 1 mm spacing
    CHECK(hausdorff(labels_from(g, p), labels_from(g, q), 1) == doctest::Approx(3.0));
}

TEST_CASE("hausdorff equals the brute-force oracle exactly on random masks") {
    const std::array<double, 3> spacings[] = {{1, 1, 1}, {0.5, 1.25, 2.0}, {2.5, 0.75, 1.0}};
    Rng rng(8);
    for (int trial = 0; trial < 40; ++trial) {
        Geometry g = small_grid({6, 6, 6}, spacings[trial % 3]);
        const LabelVolume a = random_labels(g, 100 + trial);
        const LabelVolume b = random_labels(g, 200 + trial);
        for (int cls = 1; cls <= 3; ++cls) {
            double got = -1.0, want = -1.0;
            bool got_defined = true, want_defined = true;
            try {
                got = hausdorff(a, b, cls);
            } catch (const Error&) {
                got_defined = false;
            }
            want = oracle::hausdorff_bruteforce(a, b, cls);
            // empty-set cases: oracle yields 0/inf; the library throws
            bool a_any = false, b_any = false;
            for (std::size_t i = 0; i < a.size(); ++i) {
                a_any = a_any || a[i] == cls;
                b_any = b_any || b[i] == cls;
            }
            want_defined = a_any && b_any;
            REQUIRE(got_defined == want_defined);
            if (got_defined) CHECK(got == want);  // exact, not approximate
        }
    }
}

TEST_CASE("hausdorff symmetry and metric axioms on random masks") {
    Rng rng(12);
    Geometry g = small_grid({5, 5, 5}, {1.0, 1.25, 0.75});
    for (int trial = 0; trial < 50; ++trial) {
        const LabelVolume a = random_labels(g, 300 + trial, 0.4);
        const LabelVolume b = random_labels(g, 400 + trial, 0.4);
        const LabelVolume c = random_labels(g, 500 + trial, 0.4);
        auto nonempty = [&](const LabelVolume& l) {
            for (std::size_t i = 0; i < l.size(); ++i)
                if (l[i] == 1) return true;
            return false;
        };
        if (!nonempty(a) || !nonempty(b) || !nonempty(c)) continue;
        const double ab = hausdorff(a, b, 1);
        const double ba = hausdorff(b, a, 1);
        const double ac = hausdorff(a, c, 1);
        const double cb = hausdorff(c, b, 1);
        CHECK(ab == ba);                 // symmetry
        CHECK(hausdorff(a, a, 1) == 0.0);  // identity
        CHECK(ab <= ac + cb + 1e-12);    // triangle inequality
    }
}

TEST_CASE("avd arithmetic and asymmetry") {
    Geometry g = small_grid({16, 16, 4});
    std::vector<std::uint8_t> p(g.voxel_count(), 0), q(g.voxel_count(), 0);
    for (int i = 0; i < 110; ++i) p[i] = 3;
    for (int i = 0; i < 100; ++i) q[i] = 3;
    const LabelVolume pred = labels_from(g, p), gt = labels_from(g, q);
    CHECK(avd(pred, gt, 3) == doctest::Approx(10.0));
    CHECK(avd(pred, pred, 3) == 0.0);
    CHECK(avd(gt, pred, 3) == doctest::Approx(100.0 * 10.0 / 110.0));  // not symmetric
    CHECK(avd(pred, gt, 3) != avd(gt, pred, 3));

    // total miss
    const LabelVolume empty = LabelVolume::filled(g, 0);
    CHECK(avd(empty, gt, 3) == doctest::Approx(100.0));
    // empty ground truth is undefined
    try {
        avd(gt, empty, 3);
        FAIL("expected undefined-metric error");
    } catch (const Error& e) {
        CHECK(e.code() == errc::undefined_metric);
    }
}

TEST_CASE("avd uses physical voxel volume") {
    Geometry g = small_grid({8, 8, 8}, {2.0, 1.0, 0.5});
    std::vector<std::uint8_t> p(g.voxel_count(), 0), q(g.voxel_count(), 0);
    for (int i = 0; i < 50; ++i) p[i] = 1;
    for (int i = 0; i < 100; ++i) q[i] = 1;
    // voxel volume cancels in the ratio; result stays 50%
    CHECK(avd(labels_from(g, p), labels_from(g, q), 1) == doctest::Approx(50.0));
}

TEST_CASE("metrics are invariant under storage-order permutation of the grid") {
    // relabel voxel order by mirroring all three axes; geometry-preserving
    // when spacing is uniform and the content is mirrored with it
    Geometry g = small_grid({6, 6, 6});
    const LabelVolume a = random_labels(g, 600);
    const LabelVolume b = random_labels(g, 601);
    auto mirror = [&](const LabelVolume& l) {
        std::vector<std::uint8_t> data(l.size());
        for (int k = 0; k < 6; ++k)
            for (int j = 0; j < 6; ++j)
                for (int i = 0; i < 6; ++i)
                    data[linear_index(g, 5 - i, 5 - j, 5 - k)] = l(i, j, k);
        return labels_from(g, data);
    };
    const LabelVolume am = mirror(a), bm = mirror(b);
    for (int cls = 1; cls <= 3; ++cls) {
        CHECK(dice(a, b, cls) == dice(am, bm, cls));
        bool any_a = false, any_b = false;
        for (std::size_t i = 0; i < a.size(); ++i) {
            any_a = any_a || a[i] == cls;
            any_b = any_b || b[i] == cls;
        }
        if (any_a && any_b) CHECK(hausdorff(a, b, cls) == hausdorff(am, bm, cls));
        if (any_b) CHECK(avd(a, b, cls) == avd(am, bm, cls));
    }
}

TEST_CASE("surface variant never exceeds the full-set distance") {
    Geometry g = small_grid({8, 8, 8});
    const LabelVolume a = random_labels(g, 700, 0.5);
    const LabelVolume b = random_labels(g, 701, 0.5);
    const double full = hausdorff(a, b, 1, HausdorffVariant::full_set);
    const double surf = hausdorff(a, b, 1, HausdorffVariant::surface);
    CHECK(surf <= full + 1e-12);
}

TEST_CASE("geometry mismatch is an alignment error") {
    Geometry g1 = small_grid({4, 4, 4});
    Geometry g2 = small_grid({4, 4, 4}, {2, 2, 2});
    const LabelVolume a = LabelVolume::filled(g1, 1);
    const LabelVolume b = LabelVolume::filled(g2, 1);
    try {
        dice(a, b, 1);
        FAIL("expected alignment error");
    } catch (const Error& e) {
        CHECK(e.code() == errc::alignment);
    }
}

TEST_CASE("evaluate: perfect prediction and internal consistency") {
    Geometry g = small_grid({10, 10, 10});
    // nested boxes so each class is nonempty
    std::vector<std::uint8_t> data(g.voxel_count(), 0);
    for (int k = 1; k < 9; ++k)
        for (int j = 1; j < 9; ++j)
            for (int i = 1; i < 9; ++i) {
                int cls = 1;
                if (i >= 3 && i < 7 && j >= 3 && j < 7 && k >= 3 && k < 7) cls = 2;
                if (i >= 4 && i < 6 && j >= 4 && j < 6 && k >= 4 && k < 6) cls = 3;
                data[linear_index(g, i, j, k)] = static_cast<std::uint8_t>(cls);
            }
    const LabelVolume gt = labels_from(g, data);

    const MetricsReport perfect = evaluate(gt, gt);
    for (int c = 0; c < 3; ++c) {
        CHECK(*perfect.tissue[c].dsc == 1.0);
        CHECK(*perfect.tissue[c].hd_mm == 0.0);
        CHECK(*perfect.tissue[c].avd_pct == 0.0);
    }
    CHECK(*perfect.mean.dsc == 1.0);
    CHECK(*perfect.mean.hd_mm == 0.0);

    // mean row recomputation
    const LabelVolume pred = random_labels(g, 800, 0.5);
    const MetricsReport r = evaluate(pred, gt);
    if (r.mean.dsc) {
        const double mean = (*r.tissue[0].dsc + *r.tissue[1].dsc + *r.tissue[2].dsc) / 3.0;
        CHECK(*r.mean.dsc == doctest::Approx(mean).epsilon(1e-12));
    }
}

TEST_CASE("evaluate records undefined cells without aborting") {
    Geometry g = small_grid({6, 6, 6});
    std::vector<std::uint8_t> data(g.voxel_count(), 0);
    for (int i = 0; i < 10; ++i) data[i] = 1;  // CSF only
    const LabelVolume gt = labels_from(g, data);
    const LabelVolume pred = labels_from(g, std::vector<std::uint8_t>(g.voxel_count(), 0));

    const MetricsReport r = evaluate(pred, gt);
    CHECK(*r.tissue[0].dsc == 0.0);           // CSF: predicted empty
    CHECK_FALSE(r.tissue[0].hd_mm.has_value());  // undefined, not zero
    CHECK(*r.tissue[0].avd_pct == 100.0);
    CHECK(*r.tissue[1].dsc == 1.0);           // GM empty in both
    CHECK_FALSE(r.tissue[1].avd_pct.has_value());
    CHECK_FALSE(r.mean.hd_mm.has_value());
}

TEST_CASE("cohort summary: single case has zero std") {
    Geometry g = small_grid({8, 8, 8});
    const LabelVolume gt = random_labels(g, 900, 0.6);
    std::vector<MetricsReport> cases{evaluate(gt, gt)};
    const CohortSummary s = summarize(cases);
    REQUIRE(s.cells[0][0].has_value());
    CHECK(s.cells[0][0]->count == 1);
    CHECK(s.cells[0][0]->stddev == 0.0);
    CHECK(s.cells[0][0]->mean == 1.0);
}

TEST_CASE("csv output is stable and recomputable") {
    Geometry g = small_grid({8, 8, 8});
    const LabelVolume gt = random_labels(g, 901, 0.6);
    const LabelVolume pred = random_labels(g, 902, 0.6);
    std::vector<MetricsReport> cases{evaluate(pred, gt), evaluate(gt, gt)};
    std::vector<std::string> ids{"case_a", "case_b"};

    const auto tmp = std::filesystem::temp_directory_path() / "voxatlas_metrics_test";
    std::filesystem::create_directories(tmp);
    write_metrics_csv(tmp / "m1.csv", ids, cases);
    write_metrics_csv(tmp / "m2.csv", ids, cases);

    auto slurp = [](const std::filesystem::path& p) {
        std::ifstream in(p);
        return std::string(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
    };
    const std::string text = slurp(tmp / "m1.csv");
    CHECK(text == slurp(tmp / "m2.csv"));  // byte-identical
    CHECK(text.find("case,class,dsc,hd_mm,avd_pct") == 0);
    CHECK(text.find("case_a,csf,") != std::string::npos);
    CHECK(text.find("summary_mean,") != std::string::npos);
    CHECK(text.find("summary_std,") != std::string::npos);
}

TEST_CASE("csv summary rows recompute from the per-case rows") {
    Geometry g = small_grid({8, 8, 8});
    std::vector<MetricsReport> cases;
    std::vector<std::string> ids;
    for (int c = 0; c < 4; ++c) {
        cases.push_back(evaluate(random_labels(g, 950 + c, 0.6), random_labels(g, 960 + c, 0.6)));
        ids.push_back("case_" + std::to_string(c));
    }
    const auto tmp = std::filesystem::temp_directory_path() / "voxatlas_metrics_test";
    std::filesystem::create_directories(tmp);
    write_metrics_csv(tmp / "recompute.csv", ids, cases);

    // parse the csv back and check every summary cell against a direct
    // recomputation from the per-case rows
    std::ifstream in(tmp / "recompute.csv");
    std::string line;
    std::getline(in, line);  // header
    std::map<std::string, std::array<std::vector<double>, 3>> per_class;  // class -> metric -> values
    std::map<std::string, std::array<std::array<double, 2>, 3>> summary;  // class -> metric -> (mean, std)
    while (std::getline(in, line)) {
        std::vector<std::string> fields;
        std::size_t start = 0;
        while (true) {
            const std::size_t comma = line.find(',', start);
            fields.push_back(line.substr(start, comma - start));
            if (comma == std::string::npos) break;
            start = comma + 1;
        }
        REQUIRE(fields.size() == 5);
        const bool is_mean_row = fields[0] == "summary_mean";
        const bool is_std_row = fields[0] == "summary_std";
        for (int m = 0; m < 3; ++m) {
            if (fields[2 + m].empty()) continue;
            const double v = std::stod(fields[2 + m]);
            if (is_mean_row) summary[fields[1]][m][0] = v;
            else if (is_std_row) summary[fields[1]][m][1] = v;
            else per_class[fields[1]][m].push_back(v);
        }
    }
    for (const auto& [cls, metrics] : per_class) {
        for (int m = 0; m < 3; ++m) {
            const auto& values = metrics[m];
            if (values.empty()) continue;
            double sum = 0.0, sum2 = 0.0;
            for (double v : values) {
                sum += v;
                sum2 += v * v;
            }
            const double mean = sum / values.size();
            const double stddev = std::sqrt(std::max(0.0, sum2 / values.size() - mean * mean));
            CHECK(std::abs(summary[cls][m][0] - mean) < 1e-7);  // %.9g round trip
            CHECK(std::abs(summary[cls][m][1] - stddev) < 1e-7);
        }
    }
}

}  // TEST_SUITE
