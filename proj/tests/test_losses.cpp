#include "ccd/losses.hpp"

#include "gradcheck.hpp"

#include <catch2/catch_amalgamated.hpp>

using namespace ccd;

TEST_CASE("KL terms vanish when posterior equals prior", "[losses]") {
    Rng rng(1);
    Mat mu = rng.gaussian_matrix(4, 3);
    Mat logvar = Mat::Zero(4, 3);
    Mat x = rng.gaussian_matrix(4, 5), xhat = x;
    auto t = elbo_terms(mu, logvar, mu, Mat::Zero(4, 2), 1.0, x, xhat);
    CHECK(t.recon == 0.0);
    CHECK(t.kl_eps == Catch::Approx(0.0).margin(1e-15));
    CHECK(t.kl_zc == Catch::Approx(0.0).margin(1e-15));
}

TEST_CASE("unit shift gives KL one half", "[losses]") {
    // q = N(1,1), p = N(0,1) in one dimension
    Mat mu = Mat::Ones(1, 1), logvar = Mat::Zero(1, 1), prior = Mat::Zero(1, 1);
    auto t = elbo_terms(mu, logvar, prior, Mat::Zero(1, 1), 1.0, Mat::Zero(1, 1),
                        Mat::Zero(1, 1));
    CHECK(t.kl_zc == Catch::Approx(0.5));
}

TEST_CASE("closed-form KL matches a Monte-Carlo estimate", "[losses][slow]") {
    Rng rng(2);
    const Eigen::Index d = 3;
    Mat mu = rng.uniform_matrix(1, d, -0.8, 0.8);
    Mat logvar = rng.uniform_matrix(1, d, -0.7, 0.4);
    Mat prior_mu = rng.uniform_matrix(1, d, -0.5, 0.5);
    Mat mu_eps = rng.uniform_matrix(1, d, -0.6, 0.6);
    const double eps_std = 0.7;

    auto t = elbo_terms(mu, logvar, prior_mu, mu_eps, eps_std, Mat::Zero(1, 1),
                        Mat::Zero(1, 1));

    // MC oracle: E_q[log q(v) - log p(v)] over 1e5 reparameterized draws
    const int draws = 100000;
    double acc_zc = 0.0, acc_eps = 0.0;
    for (int i = 0; i < draws; ++i) {
        for (Eigen::Index k = 0; k < d; ++k) {
            const double sd = std::exp(0.5 * logvar(0, k));
            const double v = mu(0, k) + sd * rng.gaussian();
            const double lq = -0.5 * std::pow((v - mu(0, k)) / sd, 2) - std::log(sd);
            const double lp = -0.5 * std::pow(v - prior_mu(0, k), 2);
            acc_zc += lq - lp;

            const double e = mu_eps(0, k) + eps_std * rng.gaussian();
            const double lqe = -0.5 * std::pow((e - mu_eps(0, k)) / eps_std, 2) -
                               std::log(eps_std);
            const double lpe = -0.5 * e * e;
            acc_eps += lqe - lpe;
        }
    }
    CHECK(t.kl_zc == Catch::Approx(acc_zc / draws).epsilon(0.02));
    CHECK(t.kl_eps == Catch::Approx(acc_eps / draws).epsilon(0.02));
}

TEST_CASE("KL terms are nonnegative on random stats", "[losses]") {
    Rng rng(3);
    for (int trial = 0; trial < 100; ++trial) {
        Mat mu = rng.gaussian_matrix(2, 4);
        Mat logvar = rng.uniform_matrix(2, 4, -2.0, 2.0);
        Mat prior = rng.gaussian_matrix(2, 4);
        Mat mu_eps = rng.gaussian_matrix(2, 3);
        auto t = elbo_terms(mu, logvar, prior, mu_eps, 0.5, Mat::Zero(2, 2), Mat::Zero(2, 2));
        CHECK(t.kl_zc >= 0.0);
        CHECK(t.kl_eps >= 0.0);
    }
}

TEST_CASE("non-finite stats raise with the term named", "[losses]") {
    Mat mu = Mat::Zero(1, 2);
    Mat bad = mu;
    bad(0, 1) = std::numeric_limits<double>::infinity();
    CHECK_THROWS_WITH(
        elbo_terms(bad, mu, mu, mu, 1.0, Mat::Zero(1, 1), Mat::Zero(1, 1)),
        Catch::Matchers::ContainsSubstring("posterior mean"));
    CHECK_THROWS_WITH(
        elbo_terms(mu, bad, mu, mu, 1.0, Mat::Zero(1, 1), Mat::Zero(1, 1)),
        Catch::Matchers::ContainsSubstring("logvar"));
}

TEST_CASE("supervision loss is zero on the consistent identity case", "[losses]") {
    Rng rng(4);
    const Eigen::Index m = 4;
    Mat A = Mat::Identity(m, m);
    Mat z = rng.gaussian_matrix(6, m);
    Mat u = rng.uniform_matrix(6, m, 0.0, 1.0);
    Mat c = z;  // identity SCM, eps off
    CHECK(supervision_loss(A, c, z, u) == Catch::Approx(0.0).margin(1e-15));

    // strictly positive off the consistent manifold
    Mat cp = c;
    cp(0, 1) += 0.1;
    CHECK(supervision_loss(A, cp, z, u) > 0.0);
}

TEST_CASE("linear-algebra oracle: back-map recovers z through A inverse", "[losses]") {
    Rng rng(5);
    const Eigen::Index m = 6;
    Mat A = rng.gaussian_matrix(m, m) + 2.0 * Mat::Identity(m, m);
    Mat z = rng.gaussian_matrix(20, m);
    Mat u = rng.uniform_matrix(20, m, 0.0, 1.0);
    Mat c = z * A;  // c_b = A^T z_b row-wise
    CHECK(supervision_loss(A, c, z, u) < 1e-10);
}

TEST_CASE("pseudo-inverse path flags poor conditioning", "[losses]") {
    const Eigen::Index m = 4;
    Mat A = Mat::Zero(m, m);
    A(0, 0) = 1.0;
    A(1, 1) = 1e-9;  // nearly singular
    A(2, 2) = 1.0;
    A(3, 3) = 1.0;
    Rng rng(6);
    Mat z = rng.gaussian_matrix(3, m);
    Mat u = rng.uniform_matrix(3, m, 0.0, 1.0);
    SupervisionDiagnostics diag;
    const double v = supervision_loss(A, z * A, z, u, UProduct::Elementwise, &diag);
    CHECK(std::isfinite(v));
    CHECK(diag.condition > 1e6);
    CHECK(diag.ill_conditioned);
}

TEST_CASE("classification loss closed forms", "[losses]") {
    Vec half = Vec::Constant(5, 0.5);
    CHECK(classification_loss(half, {1, 0, 1, 0, 1}) == Catch::Approx(std::log(2.0)));

    Vec batch(2);
    batch << 0.9, 0.2;
    const double expect = -0.5 * (std::log(0.9) + std::log(0.8));
    CHECK(classification_loss(batch, {1, 0}) == Catch::Approx(expect).epsilon(1e-12));

    Vec confident = Vec::Constant(4, 1.0 - 1e-9);
    CHECK(classification_loss(confident, {1, 1, 1, 1}) < 1e-6);
}

TEST_CASE("diversity loss closed forms and elementwise oracle", "[losses]") {
    CHECK(diversity_loss(Mat::Zero(3, 3)) == 0.0);
    Mat A(2, 2);
    A << 3, 4, 0, 0;
    CHECK(diversity_loss(A) == Catch::Approx(5.0));

    Rng rng(7);
    Mat R = rng.gaussian_matrix(4, 5);
    double acc = 0.0;
    for (Eigen::Index i = 0; i < R.size(); ++i) acc += R(i) * R(i);
    CHECK(diversity_loss(R) == Catch::Approx(std::sqrt(acc)).epsilon(1e-12));
}

TEST_CASE("total loss composition and linearity", "[losses]") {
    ElboTerms elbo{1.25, 0.5, 0.75};
    LossWeights zero{0.0, 0.0, 0.0, 0.0, 0.0};
    CHECK(total_loss(elbo, 0.3, 0.4, 0.2, zero).total == Catch::Approx(1.25));

    LossWeights ds = LossWeights::defaults_for("dsprites_like");
    CHECK(ds.alpha == 0.5);
    CHECK(ds.beta1 == 1.0);
    CHECK(ds.beta2 == 0.6);
    CHECK(ds.delta == 0.5);
    CHECK(ds.gamma == 0.5);
    auto b = total_loss(elbo, 0.3, 0.4, 0.2, ds);
    CHECK(b.total ==
          Catch::Approx(1.25 + 1.0 * 0.5 + 0.6 * 0.75 + 0.5 * 0.3 + 0.5 * 0.4 + 0.5 * 0.2));

    LossWeights s3 = LossWeights::defaults_for("shapes3d_like");
    CHECK(s3.beta1 == 0.8);
    CHECK(s3.beta2 == 0.8);
    CHECK(s3.delta == 0.8);

    // doubling gamma moves the total by exactly gamma * l_diversity
    LossWeights doubled = ds;
    doubled.gamma *= 2.0;
    auto b2 = total_loss(elbo, 0.3, 0.4, 0.2, doubled);
    CHECK(b2.total - b.total == Catch::Approx(ds.gamma * 0.2));
}

TEST_CASE("graph losses match the plain forms", "[losses]") {
    Rng rng(8);
    const Eigen::Index batch = 5, zdim = 6, m = 4, n = 4, px = 7;
    Mat mu = rng.gaussian_matrix(batch, zdim);
    Mat logvar = rng.uniform_matrix(batch, zdim, -1.0, 0.5);
    Mat prior = rng.gaussian_matrix(batch, zdim);
    Mat mu_eps = rng.gaussian_matrix(batch, n);
    Mat x = rng.uniform_matrix(batch, px, 0.0, 1.0);
    Mat xhat = rng.uniform_matrix(batch, px, 0.0, 1.0);
    Mat A = rng.gaussian_matrix(m, n) + 2.0 * Mat::Identity(m, n);
    Mat z = rng.gaussian_matrix(batch, m);
    Mat c = z * A + 0.01 * rng.gaussian_matrix(batch, n);
    Mat u = rng.uniform_matrix(batch, m, 0.0, 1.0);
    Vec prob = rng.uniform_matrix(batch, 1, 0.05, 0.95).col(0);
    std::vector<int> y{1, 0, 1, 1, 0};

    auto plain = elbo_terms(mu, logvar, prior, mu_eps, 0.6, x, xhat);

    ad::Tape t;
    CHECK(graph::recon_loss(ad::leaf(t, xhat), x).scalar() == Catch::Approx(plain.recon));
    CHECK(graph::kl_eps_loss(ad::leaf(t, mu_eps), 0.6).scalar() ==
          Catch::Approx(plain.kl_eps));
    CHECK(graph::kl_zc_loss(ad::leaf(t, mu), ad::leaf(t, logvar), ad::constant(t, prior))
              .scalar() == Catch::Approx(plain.kl_zc));
    for (auto mode : {UProduct::Elementwise, UProduct::Inner}) {
        CHECK(graph::supervision_loss(ad::leaf(t, A), ad::leaf(t, c), ad::leaf(t, z), u, mode)
                  .scalar() == Catch::Approx(supervision_loss(A, c, z, u, mode)));
    }
    CHECK(graph::classification_loss(ad::leaf(t, Mat(prob)), y).scalar() ==
          Catch::Approx(classification_loss(prob, y)));
    CHECK(graph::diversity_loss(ad::leaf(t, A)).scalar() == Catch::Approx(diversity_loss(A)));
}

TEST_CASE("every graph loss passes a quick finite-difference check", "[losses]") {
    Rng rng(9);
    const Eigen::Index batch = 3, m = 3, n = 3, px = 4;
    Mat x = rng.uniform_matrix(batch, px, 0.0, 1.0);
    Mat u = rng.uniform_matrix(batch, m, 0.0, 1.0);
    std::vector<int> y{1, 0, 1};

    auto run = [&](auto build, std::vector<Mat> params) {
        ad::Tape tape;
        std::vector<ad::Var> leaves;
        for (const auto& p : params) leaves.push_back(ad::leaf(tape, p));
        ad::Var out = build(tape, leaves);
        tape.backward(out.id());
        std::vector<Mat> grads;
        for (auto& l : leaves)
            grads.push_back(l.grad().size() ? l.grad() : Mat::Zero(l.rows(), l.cols()));
        auto res = ccdtest::gradcheck(
            [&](const std::vector<Mat>& ps) {
                ad::Tape t2;
                std::vector<ad::Var> ls;
                for (const auto& p : ps) ls.push_back(ad::leaf(t2, p));
                return build(t2, ls).scalar();
            },
            params, grads);
        INFO("rel=" << res.max_rel_err);
        CHECK(ccdtest::grad_ok(res));
    };

    run([&](ad::Tape&, const std::vector<ad::Var>& v) { return graph::recon_loss(v[0], x); },
        {rng.uniform_matrix(batch, px, 0.0, 1.0)});
    run([&](ad::Tape&,
            const std::vector<ad::Var>& v) { return graph::kl_eps_loss(v[0], 0.5); },
        {rng.gaussian_matrix(batch, n)});
    run(
        [&](ad::Tape& t, const std::vector<ad::Var>& v) {
            return graph::kl_zc_loss(v[0], v[1], v[2]);
        },
        {rng.gaussian_matrix(batch, m), rng.uniform_matrix(batch, m, -1.0, 0.5),
         rng.gaussian_matrix(batch, m)});
    run(
        [&](ad::Tape&, const std::vector<ad::Var>& v) {
            return graph::supervision_loss(v[0], v[1], v[2], u);
        },
        {Mat(rng.gaussian_matrix(m, n) + 2.0 * Mat::Identity(m, n)),
         rng.gaussian_matrix(batch, n), rng.gaussian_matrix(batch, m)});
    run(
        [&](ad::Tape&, const std::vector<ad::Var>& v) {
            return graph::classification_loss(ad::sigmoid(v[0]), y);
        },
        {rng.gaussian_matrix(batch, 1)});
    run([&](ad::Tape&, const std::vector<ad::Var>& v) { return graph::diversity_loss(v[0]); },
        {rng.gaussian_matrix(m, n)});
}

TEST_CASE("rectangular supervision uses the pseudo-inverse", "[losses]") {
    Rng rng(10);
    const Eigen::Index m = 5, n = 3;  // fewer concepts than factors
    Mat A = rng.gaussian_matrix(m, n);
    Mat z = rng.gaussian_matrix(4, m);
    Mat u = rng.uniform_matrix(4, m, 0.0, 1.0);
    Mat c = z * A;
    const double plain = supervision_loss(A, c, z, u);
    CHECK(std::isfinite(plain));

    ad::Tape t;
    auto g = graph::supervision_loss(ad::leaf(t, A), ad::leaf(t, c), ad::leaf(t, z), u);
    CHECK(g.scalar() == Catch::Approx(plain).epsilon(1e-9));
}
