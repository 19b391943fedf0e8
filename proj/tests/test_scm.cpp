#include "ccd/scm.hpp"

#include <catch2/catch_amalgamated.hpp>

using namespace ccd;

TEST_CASE("identity SCM passes z through", "[scm]") {
    const Eigen::Index m = 4;
    Mat A = Mat::Identity(m, m);
    auto heads = ConceptHeads::identity_like(m, ScmKind::Linear, 0.0);
    Rng rng(1);
    Mat z = rng.gaussian_matrix(8, m);
    Mat c = concepts(A, heads, z, rng, /*train=*/true);
    CHECK(c.isApprox(z));
}

TEST_CASE("disconnected concept is constant", "[scm]") {
    const Eigen::Index m = 5, n = 3;
    Rng rng(2);
    Mat A = rng.uniform_matrix(m, n, -1.0, 1.0);
    A.col(1).setZero();
    ConceptHeads heads = ConceptHeads::identity_like(n, ScmKind::Tanh, 0.0);
    heads.eta_bias(1) = 0.7;
    Mat z1 = rng.gaussian_matrix(6, m);
    Mat z2 = rng.gaussian_matrix(6, m);
    Mat c1 = concepts(A, heads, z1, rng, false);
    Mat c2 = concepts(A, heads, z2, rng, false);
    for (Eigen::Index r = 0; r < 6; ++r) {
        CHECK(c1(r, 1) == Catch::Approx(std::tanh(0.7)));
        CHECK(c2(r, 1) == Catch::Approx(std::tanh(0.7)));
    }
}

TEST_CASE("tanh heads match a straight-line recomputation", "[scm]") {
    const Eigen::Index m = 6, n = 6;
    Rng rng(3);
    Mat A = rng.uniform_matrix(m, n, -1.0, 1.0);
    ConceptHeads heads;
    heads.kind = ScmKind::Tanh;
    heads.eta_scale = rng.uniform_matrix(n, 1, 0.5, 1.5).col(0);
    heads.eta_bias = rng.uniform_matrix(n, 1, -0.3, 0.3).col(0);
    heads.eps_std = 0.0;

    Mat z = rng.gaussian_matrix(100, m);
    Mat c = concepts(A, heads, z, rng, false);
    for (Eigen::Index b = 0; b < z.rows(); ++b) {
        for (Eigen::Index i = 0; i < n; ++i) {
            double acc = 0.0;
            for (Eigen::Index j = 0; j < m; ++j) acc += A(j, i) * z(b, j);
            const double expect = std::tanh(heads.eta_scale(i) * acc + heads.eta_bias(i));
            REQUIRE(c(b, i) == Catch::Approx(expect).epsilon(1e-12));
        }
    }
}

TEST_CASE("concept noise is train-only and zero-mean", "[scm]") {
    const Eigen::Index m = 3, n = 3;
    Rng rng(4);
    Mat A = rng.uniform_matrix(m, n, -1.0, 1.0);
    auto heads = ConceptHeads::identity_like(n, ScmKind::Tanh, 0.05);
    Mat z = rng.gaussian_matrix(1, m);

    Mat base = concepts(A, heads, z, rng, false);
    CHECK(concepts(A, heads, z, rng, false) == base);  // eval mode deterministic

    const int draws = 10000;
    Mat sum = Mat::Zero(1, n);
    for (int i = 0; i < draws; ++i) sum += concepts(A, heads, z, rng, true);
    Mat mean = sum / draws;
    // mean over 1e4 draws converges within 3*eps_std/100
    const double tol = 3.0 * heads.eps_std / 100.0;
    for (Eigen::Index i = 0; i < n; ++i)
        CHECK(std::abs(mean(0, i) - base(0, i)) < tol);
}

TEST_CASE("predict closed forms", "[scm]") {
    Predictor p = Predictor::ones(4);
    p.W.setZero();
    Mat c = Mat::Zero(3, 4);
    auto pred = predict(p, c);
    for (Eigen::Index i = 0; i < 3; ++i) {
        CHECK(pred.probability(i) == Catch::Approx(0.5));
        CHECK(pred.label[static_cast<std::size_t>(i)] == 1);  // 0.5 rounds up
    }

    Predictor q = Predictor::ones(4);
    q.w0 = 3.0;
    auto pred2 = predict(q, Mat::Zero(1, 4));
    CHECK(pred2.probability(0) == Catch::Approx(0.95257412682).epsilon(1e-9));
    CHECK(pred2.label[0] == 1);
}

TEST_CASE("clip_A arithmetic from the published rule", "[scm]") {
    Mat A(2, 2);
    A << 2, -4, 1, 0;
    REQUIRE(clip_A(A));
    Mat expect(2, 2);
    expect << 0.5, -1.0, 0.25, 0.0;
    CHECK(A.isApprox(expect));
}

TEST_CASE("clip_A fixed point and idempotence", "[scm]") {
    Mat A(2, 2);
    A << 0.3, -1.0, 0.2, 0.9;  // max |A| already 1
    Mat before = A;
    clip_A(A);
    CHECK(A.isApprox(before));

    Rng rng(5);
    for (int trial = 0; trial < 20; ++trial) {
        Mat M = 5.0 * rng.gaussian_matrix(4, 3);
        Mat once = M;
        clip_A(once);
        Mat twice = once;
        clip_A(twice);
        CHECK(twice.isApprox(once));
        CHECK(once.cwiseAbs().maxCoeff() <= 1.0 + 1e-15);
    }
}

TEST_CASE("clip_A preserves the argmax cell and signs", "[scm]") {
    Rng rng(6);
    for (int trial = 0; trial < 50; ++trial) {
        Mat M = rng.gaussian_matrix(5, 4) * 3.0;
        Eigen::Index r0, c0;
        M.cwiseAbs().maxCoeff(&r0, &c0);
        Mat clipped = M;
        clip_A(clipped);
        Eigen::Index r1, c1;
        clipped.cwiseAbs().maxCoeff(&r1, &c1);
        CHECK(r0 == r1);
        CHECK(c0 == c1);
        for (Eigen::Index i = 0; i < M.size(); ++i)
            if (M(i) != 0.0) CHECK(std::signbit(clipped(i)) == std::signbit(M(i)));
    }
}

TEST_CASE("clip_A skips all-zero and rejects non-finite", "[scm]") {
    Mat Z = Mat::Zero(3, 3);
    CHECK_FALSE(clip_A(Z));
    CHECK(Z.isZero());
    Mat bad = Mat::Ones(2, 2);
    bad(0, 0) = std::numeric_limits<double>::quiet_NaN();
    CHECK_THROWS_AS(clip_A(bad), numeric_error);
}

TEST_CASE("ordering of sub-threshold magnitudes survives clipping", "[scm]") {
    Rng rng(7);
    Mat M = rng.gaussian_matrix(4, 4) * 2.0;
    Mat clipped = M;
    clip_A(clipped);
    for (Eigen::Index a = 0; a < M.size(); ++a)
        for (Eigen::Index b = 0; b < M.size(); ++b)
            if (std::abs(clipped(a)) < 1.0 && std::abs(clipped(b)) < 1.0)
                CHECK((std::abs(M(a)) < std::abs(M(b))) ==
                      (std::abs(clipped(a)) < std::abs(clipped(b))));
}

TEST_CASE("shape mismatches are contract errors", "[scm]") {
    Rng rng(8);
    Mat A = rng.gaussian_matrix(4, 3);
    auto heads = ConceptHeads::identity_like(3);
    Mat z = rng.gaussian_matrix(2, 5);  // wrong width
    CHECK_THROWS_AS(concepts(A, heads, z, rng, false), contract_error);
    Predictor p = Predictor::ones(3);
    CHECK_THROWS_AS(predict(p, rng.gaussian_matrix(2, 4)), contract_error);
}
