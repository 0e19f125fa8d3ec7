#include <doctest.h>

#include "voxatlas/error.hpp"
#include "voxatlas/geometry.hpp"
#include "voxatlas/rng.hpp"

using namespace voxatlas;

TEST_SUITE("geometry") {

TEST_CASE("voxel_to_world with identity geometry") {
    Geometry g;
    g.dims = {8, 8, 8};
    const Vec3 p = voxel_to_world(g, 2, 3, 4);
    CHECK(p.x == doctest::Approx(2.0));
    CHECK(p.y == doctest::Approx(3.0));
    CHECK(p.z == doctest::Approx(4.0));
}

TEST_CASE("voxel_to_world applies origin and spacing") {
    Geometry g;
    g.dims = {4, 4, 4};
    g.spacing = {2.0, 2.0, 2.0};
    g.origin = {10.0, 0.0, 0.0};
    const Vec3 p = voxel_to_world(g, 1, 0, 0);
    CHECK(p.x == doctest::Approx(12.0));
    CHECK(p.y == doctest::Approx(0.0));
    CHECK(p.z == doctest::Approx(0.0));
}

TEST_CASE("voxel_to_world with a 90 degree rotation about z") {
    // R(90deg about z) maps x_hat to y_hat: column-wise [0 -1 0; 1 0 0; 0 0 1]
    Geometry g;
    g.dims = {4, 4, 4};
    g.direction.m = {0, -1, 0, 1, 0, 0, 0, 0, 1};
    const Vec3 p = voxel_to_world(g, 1, 0, 0);
    CHECK(p.x == doctest::Approx(0.0).epsilon(1e-12));
    CHECK(p.y == doctest::Approx(1.0));
    CHECK(p.z == doctest::Approx(0.0));
}

TEST_CASE("out-of-bounds index is a bounds error") {
    Geometry g;
    g.dims = {2, 2, 2};
    CHECK_THROWS_AS(voxel_to_world(g, 2, 0, 0), Error);
    try {
        voxel_to_world(g, 0, -1, 0);
        FAIL("expected bounds error");
    } catch (const Error& e) {
        CHECK(e.code() == errc::bounds);
    }
}

TEST_CASE("world/index round trip is identity within 1e-9") {
    Rng rng(41);
    for (int trial = 0; trial < 20; ++trial) {
        Geometry g;
        g.dims = {5, 6, 7};
        g.spacing = {rng.uniform(0.4, 3.0), rng.uniform(0.4, 3.0), rng.uniform(0.4, 3.0)};
        g.origin = {rng.uniform(-40, 40), rng.uniform(-40, 40), rng.uniform(-40, 40)};
        g.direction = euler_zyx({rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1)});
        g.validate();
        for (int i = 0; i < g.dims[0]; ++i)
            for (int j = 0; j < g.dims[1]; ++j)
                for (int k = 0; k < g.dims[2]; ++k) {
                    const Vec3 u = world_to_continuous_index(g, voxel_to_world(g, i, j, k));
                    CHECK(std::abs(u.x - i) < 1e-9);
                    CHECK(std::abs(u.y - j) < 1e-9);
                    CHECK(std::abs(u.z - k) < 1e-9);
                }
    }
}

TEST_CASE("validate rejects bad grids") {
    Geometry g;
    g.dims = {0, 1, 1};
    CHECK_THROWS_AS(g.validate(), Error);
    g.dims = {1, 1, 1};
    g.spacing = {0.0, 1.0, 1.0};
    CHECK_THROWS_AS(g.validate(), Error);
    g.spacing = {1.0, 1.0, 1.0};
    g.direction.m = {1, 0, 0, 0, 2, 0, 0, 0, 1};  // non-unit column
    CHECK_THROWS_AS(g.validate(), Error);
}

TEST_CASE("euler matrix inverse equals transpose") {
    const Mat3 r = euler_zyx({0.3, -0.2, 0.7});
    const Mat3 should_be_identity = r * r.transposed();
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j)
            CHECK(should_be_identity(i, j) == doctest::Approx(i == j ? 1.0 : 0.0).epsilon(1e-12));
}

}  // TEST_SUITE
