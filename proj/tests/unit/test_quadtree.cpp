#include "doctest.h"

#include <cmath>
#include <sstream>

#include "spamm/quadtree.hpp"
#include "support.hpp"

using namespace spamm;
using spamm::test::norms_consistent;
using spamm::test::random_matrix;

TEST_CASE("tree depth") {
    CHECK(tree_depth(7500, 7500) == 9);
    CHECK(tree_depth(16, 16) == 0);
    CHECK(tree_depth(17, 4) == 1);
    CHECK(tree_depth(1, 1) == 0);
    CHECK(tree_depth(4096, 100) == 8);
    CHECK(tree_depth(8, 8, 4) == 1);
}

TEST_CASE("drop tolerance") {
    CHECK(drop_tolerance(1e-8, 100, 10) == doctest::Approx(1e-10));
    CHECK(drop_tolerance(1e-6, 2, 2) == doctest::Approx(5e-7));
    CHECK_THROWS_AS(drop_tolerance(1e-6, 0, 0), ValidationError);
    CHECK_THROWS_AS(drop_tolerance(-1, 1, 1), ValidationError);
}

TEST_CASE("leaf block norms") {
    LeafBlock b;
    b(0, 0) = 3.0F;
    b(5, 6) = 4.0F;
    b.compute_norms();
    CHECK(b.norm == doctest::Approx(5.0));
    CHECK(b.subnorms[0] == doctest::Approx(3.0));
    CHECK(b.subnorms[1 * 4 + 1] == doctest::Approx(4.0));
    CHECK(b.subnorms[2] == 0.0F);
}

TEST_CASE("two by two with two by two leaves") {
    DenseMatrixF d(2, 2, {3, 0, 0, 4});
    const auto q = QuadtreeMatrix::from_dense(d, 2);
    CHECK(q.depth() == 0);
    CHECK(q.leaf_count() == 1);
    CHECK(q.norm() == doctest::Approx(5.0));
    CHECK(norms_consistent(q));
}

TEST_CASE("identity norm") {
    const auto q = QuadtreeMatrix::from_dense(DenseMatrixF::identity(32));
    CHECK(q.depth() == 1);
    CHECK(q.leaf_count() == 2);
    CHECK(q.norm() == doctest::Approx(std::sqrt(32.0)));
    CHECK(q.node(1, morton::encode(0, 1)) == std::nullopt);
    CHECK(q.node(1, morton::encode(1, 1)).has_value());
    CHECK(norms_consistent(q));
}

TEST_CASE("dense round trip is bit exact") {
    for (auto [r, c] : {std::pair<std::size_t, std::size_t>{1, 1}, {5, 9}, {16, 16}, {17, 40}, {100, 33}}) {
        auto d = random_matrix(r, c, r * 131 + c);
        d(0, 0) = -0.0F;
        const auto q = QuadtreeMatrix::from_dense(d);
        CHECK(norms_consistent(q));
        const auto back = q.to_dense();
        CHECK(bitwise_equal(back, d));
    }
}

TEST_CASE("zero blocks are not stored") {
    DenseMatrixF d(64, 64);
    d(20, 40) = 1.0F;
    const auto q = QuadtreeMatrix::from_dense(d);
    CHECK(q.leaf_count() == 1);
    CHECK(q.node_count() == 3);
    CHECK(norms_consistent(q));
}

TEST_CASE("get and set keep norms current") {
    QuadtreeMatrix q(40, 40);
    q.set(0, 0, 3.0F);
    q.set(1, 1, 4.0F);
    CHECK(q.norm() == doctest::Approx(5.0));
    CHECK(q.get(1, 1) == 4.0F);
    CHECK(q.get(39, 39) == 0.0F);
    q.set(35, 2, 12.0F);
    CHECK(q.norm() == doctest::Approx(13.0));
    CHECK(q.leaf_count() == 2);
    q.set(35, 2, 0.0F);
    CHECK(q.leaf_count() == 2);
    CHECK(q.norm() == doctest::Approx(5.0));
    q.set(30, 30, 0.0F);
    CHECK(q.leaf_count() == 2);
    CHECK(norms_consistent(q));
    CHECK_THROWS_AS((void)q.get(40, 0), std::out_of_range);
    CHECK_THROWS_AS(q.set(0, 40, 1.0F), std::out_of_range);
}

TEST_CASE("norm is homogeneous") {
    const auto d = random_matrix(50, 50, 7);
    auto q = QuadtreeMatrix::from_dense(d);
    const float before = q.norm();
    q.scale(-2.5F);
    CHECK(q.norm() == doctest::Approx(2.5 * before).epsilon(1e-6));
    CHECK(q.get(3, 4) == -2.5F * d(3, 4));
    CHECK(norms_consistent(q));
}

TEST_CASE("root norm equals dense Frobenius norm") {
    const auto d = random_matrix(77, 91, 9);
    const auto q = QuadtreeMatrix::from_dense(d);
    CHECK(q.norm() == doctest::Approx(d.frobenius_norm()).epsilon(1e-6));
}

TEST_CASE("sparsify drops exactly the small sub-blocks") {
    const auto d = test::block_sparse_matrix(96, 96, 0.7, 11);
    auto q = QuadtreeMatrix::from_dense(d);
    const double eps = 1e-3;

    // Brute-force scan of the 4x4 sub-blocks.
    std::size_t expected_dropped = 0;
    DenseMatrixF expected = d;
    for (std::size_t bi = 0; bi < 96; bi += 4) {
        for (std::size_t bj = 0; bj < 96; bj += 4) {
            double s = 0;
            for (std::size_t i = bi; i < bi + 4; ++i) {
                for (std::size_t j = bj; j < bj + 4; ++j) {
                    s += static_cast<double>(d(i, j)) * d(i, j);
                }
            }
            const float norm = static_cast<float>(std::sqrt(s));
            if (norm < eps) {
                expected_dropped += norm > 0.0F ? 1 : 0;
                for (std::size_t i = bi; i < bi + 4; ++i) {
                    for (std::size_t j = bj; j < bj + 4; ++j) {
                        expected(i, j) = 0.0F;
                    }
                }
            }
        }
    }
    const auto id = q.structure_id();
    CHECK(q.sparsify(eps) == expected_dropped);
    CHECK(expected_dropped > 0);
    CHECK(bitwise_equal(q.to_dense(), expected));
    CHECK(q.structure_id() != id);
    CHECK(norms_consistent(q));
    CHECK(q.sparsify(0.0) == 0);
}

TEST_CASE("binary dump round trip") {
    const auto d = random_matrix(37, 70, 3);
    const auto q = QuadtreeMatrix::from_dense(d);
    std::stringstream buf;
    write_quadtree(buf, q);
    const auto back = read_quadtree(buf);
    CHECK(back.rows() == 37);
    CHECK(back.cols() == 70);
    CHECK(back.leaf_count() == q.leaf_count());
    CHECK(bitwise_equal(back.to_dense(), d));
    CHECK(norms_consistent(back));
}

TEST_CASE("binary dump rejects corrupt input") {
    std::stringstream bad("NOTAQUADTREE");
    CHECK_THROWS_AS(read_quadtree(bad), FormatError);

    const auto q = QuadtreeMatrix::from_dense(random_matrix(20, 20, 4));
    std::stringstream buf;
    write_quadtree(buf, q);
    std::string bytes = buf.str();
    bytes.resize(bytes.size() - 10);
    std::stringstream truncated(bytes);
    CHECK_THROWS(read_quadtree(truncated));
}

TEST_CASE("invariant check detects a stale norm") {
    auto q = QuadtreeMatrix::from_dense(random_matrix(40, 40, 5));
    CHECK(norms_consistent(q));
    q.leaf_values(0)[0] += 100.0F;
    const auto report = q.check_invariants();
    CHECK_FALSE(report.ok);
    CHECK_FALSE(report.first_violation.empty());
    q.compute_norms();
    CHECK(norms_consistent(q));
}

TEST_CASE("leaf size must be a power of two") {
    CHECK_THROWS_AS(QuadtreeMatrix(10, 10, 12), ValidationError);
    CHECK_NOTHROW(QuadtreeMatrix(10, 10, 8));
}
