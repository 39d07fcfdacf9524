#include <doctest.h>

#include <cmath>
#include <cstring>
#include <vector>

#include "cngcf/adam.hpp"
#include "cngcf/rng.hpp"
#include "cngcf/tensor.hpp"
#include "helpers.hpp"

using namespace cngcf;
using cngcf::testing::max_grad_rel_error;
using cngcf::testing::random_values;
using cngcf::testing::random_values_off_kink;

namespace {

Tensor const_like(const Shape& shape, RngStream& rng) {
    std::vector<double> v(shape_size(shape));
    for (double& x : v) x = (rng.bernoulli(0.5) ? 1.0 : -1.0) * rng.uniform(0.5, 1.5);
    return Tensor::from_vector(shape, std::move(v));
}

}  // namespace

TEST_CASE("matmul basics") {
    const Tensor eye = Tensor::from_vector({2, 2}, {1, 0, 0, 1});
    const Tensor col = Tensor::from_vector({2, 1}, {3, 4});
    const Tensor prod = matmul(eye, col);
    CHECK(prod.shape() == Shape{2, 1});
    CHECK(prod.at(0, 0) == 3.0);
    CHECK(prod.at(1, 0) == 4.0);

    const Tensor row = Tensor::from_vector({1, 2}, {1, 2});
    CHECK(matmul(row, col).item() == doctest::Approx(11.0).epsilon(1e-15));

    const Tensor a = Tensor::zeros({2, 3});
    const Tensor b = Tensor::zeros({4, 5});
    try {
        matmul(a, b);
        FAIL("expected DimensionError");
    } catch (const DimensionError& e) {
        const std::string msg = e.what();
        CHECK(msg.find("{2,3}") != std::string::npos);
        CHECK(msg.find("{4,5}") != std::string::npos);
    }
}

TEST_CASE("relu values and subgradient") {
    const Tensor x = Tensor::from_vector({3}, {-1, 0, 2});
    const Tensor y = relu(x);
    CHECK(y.at(0) == 0.0);
    CHECK(y.at(1) == 0.0);
    CHECK(y.at(2) == 2.0);

    Tensor p = Tensor::param({2}, {-1, 2});
    const GradientMap grads = backward(sum(relu(p)));
    const Tensor g = grads.grad_of(p);
    CHECK(g.at(0) == 0.0);
    CHECK(g.at(1) == 1.0);

    Tensor all_neg = Tensor::param({3}, {-1, -2, -0.5});
    const Tensor out = relu(all_neg);
    CHECK(out.at(0) == 0.0);
    CHECK(out.at(1) == 0.0);
    CHECK(out.at(2) == 0.0);
    const Tensor gn = backward(sum(out)).grad_of(all_neg);
    for (std::size_t i = 0; i < 3; ++i) CHECK(gn.at(i) == 0.0);
}

TEST_CASE("softmax values, normalization and shift invariance") {
    const Tensor sym = softmax(Tensor::from_vector({2}, {0, 0}));
    CHECK(sym.at(0) == doctest::Approx(0.5).epsilon(1e-15));
    CHECK(sym.at(1) == doctest::Approx(0.5).epsilon(1e-15));

    // Independent closed-form oracle at long double precision.
    const Tensor s = softmax(Tensor::from_vector({3}, {1, 2, 3}));
    long double denom = 0.0L;
    for (int k = 1; k <= 3; ++k) denom += std::exp(static_cast<long double>(k));
    for (std::size_t i = 0; i < 3; ++i) {
        const long double expect = std::exp(static_cast<long double>(i) + 1.0L) / denom;
        CHECK(s.at(i) == doctest::Approx(static_cast<double>(expect)).epsilon(1e-12));
    }

    RngStream rng("softmax", 11);
    for (int rep = 0; rep < 50; ++rep) {
        const Tensor x = Tensor::from_vector({7}, random_values(7, rng, -30.0, 30.0));
        const Tensor y = softmax(x);
        double total = 0.0;
        for (std::size_t i = 0; i < 7; ++i) total += y.at(i);
        CHECK(std::abs(total - 1.0) <= 1e-9);

        const double c = rng.uniform(-100.0, 100.0);
        std::vector<double> shifted(7);
        for (std::size_t i = 0; i < 7; ++i) shifted[i] = x.at(i) + c;
        const Tensor y2 = softmax(Tensor::from_vector({7}, std::move(shifted)));
        for (std::size_t i = 0; i < 7; ++i) {
            CHECK(y2.at(i) == doctest::Approx(y.at(i)).epsilon(1e-12));
        }
    }

    CHECK_THROWS_AS(softmax(Tensor::from_vector({0}, {})), InvalidInputError);
}

TEST_CASE("gaussian_sample reparameterization") {
    const Tensor mu = Tensor::from_vector({3}, {0.5, -1.0, 2.0});
    const Tensor sigma = Tensor::from_vector({3}, {1.0, 0.5, 2.0});
    const Tensor zero_noise = Tensor::zeros({3});
    const Tensor collapsed = gaussian_sample(mu, sigma, zero_noise);
    for (std::size_t i = 0; i < 3; ++i) CHECK(collapsed.at(i) == mu.at(i));

    const Tensor eps = Tensor::from_vector({3}, {0.3, -0.7, 1.1});
    const Tensor std_draw = gaussian_sample(Tensor::zeros({3}), Tensor::full({3}, 1.0), eps);
    for (std::size_t i = 0; i < 3; ++i) CHECK(std_draw.at(i) == eps.at(i));

    Tensor mu_p = Tensor::param({3}, {0.5, -1.0, 2.0});
    const Tensor g = backward(sum(gaussian_sample(mu_p, sigma, eps))).grad_of(mu_p);
    for (std::size_t i = 0; i < 3; ++i) CHECK(g.at(i) == 1.0);

    CHECK_THROWS_AS(gaussian_sample(mu, Tensor::zeros({3}), eps), InvalidInputError);
}

TEST_CASE("kl_diag_normal closed forms and nonnegativity") {
    CHECK(kl_diag_normal(Tensor::zeros({4}), Tensor::full({4}, 1.0)).item() == 0.0);
    // 1-dim mu=1, sigma_sq=1: 0.5 * (1 + 1 - 1 - ln 1) = 0.5
    CHECK(kl_diag_normal(Tensor::from_vector({1}, {1.0}), Tensor::from_vector({1}, {1.0})).item() ==
          doctest::Approx(0.5).epsilon(1e-15));

    RngStream rng("kl", 3);
    for (int rep = 0; rep < 100; ++rep) {
        const Tensor mu = Tensor::from_vector({5}, random_values(5, rng, -3.0, 3.0));
        const Tensor ss = Tensor::from_vector({5}, random_values(5, rng, 0.05, 4.0));
        CHECK(kl_diag_normal(mu, ss).item() >= 0.0);
    }

    // Zero exactly at (mu=0, sigma_sq=1); strictly positive off that point.
    CHECK(std::abs(kl_diag_normal(Tensor::zeros({3}), Tensor::full({3}, 1.0)).item()) <= 1e-12);
    CHECK(kl_diag_normal(Tensor::from_vector({1}, {0.01}), Tensor::from_vector({1}, {1.0})).item() >
          0.0);
    CHECK(kl_diag_normal(Tensor::zeros({1}), Tensor::from_vector({1}, {1.2})).item() > 0.0);

    CHECK_THROWS_AS(kl_diag_normal(Tensor::zeros({2}), Tensor::zeros({2})), InvalidInputError);
}

TEST_CASE("dropout modes and Monte-Carlo expectation") {
    RngStream rng("dropout", 7);
    const Tensor x = Tensor::from_vector({4}, {1, -2, 3, 0.5});

    const Tensor train_p0 = dropout(x, 0.0, true, rng);
    const Tensor eval_p5 = dropout(x, 0.5, false, rng);
    for (std::size_t i = 0; i < 4; ++i) {
        CHECK(train_p0.at(i) == x.at(i));
        CHECK(eval_p5.at(i) == x.at(i));
    }
    CHECK(rng.draw_count() == 0);  // identity paths consume no randomness

    CHECK_THROWS_AS(dropout(x, 1.0, true, rng), InvalidInputError);

    // Monte-Carlo oracle: inverted dropout is mean-preserving.
    const std::size_t width = 16;
    const std::size_t draws = 100000 / width;
    const Tensor ones = Tensor::full({width}, 1.0);
    std::vector<double> mean(width, 0.0);
    for (std::size_t d = 0; d < draws; ++d) {
        const Tensor out = dropout(ones, 0.3, true, rng);
        for (std::size_t i = 0; i < width; ++i) mean[i] += out.at(i);
    }
    for (std::size_t i = 0; i < width; ++i) {
        CHECK(std::abs(mean[i] / static_cast<double>(draws) - 1.0) < 0.02);
    }
}

TEST_CASE("backward basics") {
    Tensor x = Tensor::param({3}, {1, 2, 3});
    const Tensor g = backward(sum(x)).grad_of(x);
    for (std::size_t i = 0; i < 3; ++i) CHECK(g.at(i) == 1.0);

    Tensor a = Tensor::param({}, {2.0});
    Tensor b = Tensor::param({}, {3.0});
    const GradientMap grads = backward(mul(a, b));
    CHECK(grads.grad_of(a).item() == 3.0);
    CHECK(grads.grad_of(b).item() == 2.0);

    CHECK_THROWS_AS(backward(Tensor::param({2}, {1, 2})), InvalidInputError);
}

TEST_CASE("backward leaves off the path read back as zero") {
    Tensor used = Tensor::param({2}, {1, 2});
    Tensor unused = Tensor::param({2}, {5, 6});
    const GradientMap grads = backward(sum(used));
    CHECK(grads.contains(used));
    CHECK(!grads.contains(unused));
    const Tensor g = grads.grad_of(unused);
    CHECK(g.at(0) == 0.0);
    CHECK(g.at(1) == 0.0);
}

TEST_CASE("tape replay is exhaustive and bit-stable") {
    Tensor a = Tensor::param({4}, {0.5, -1.5, 2.0, 3.0});
    const Tensor b = relu(a);
    const Tensor c = add(b, b);
    const Tensor loss = sum(c);

    BackwardStats stats;
    const GradientMap first = backward(loss, &stats);
    CHECK(stats.nodes_reached == 4);  // a, b, c, loss
    CHECK(stats.ops_replayed == 3);   // relu, add, sum

    const GradientMap second = backward(loss);
    const Tensor g1 = first.grad_of(a);
    const Tensor g2 = second.grad_of(a);
    for (std::size_t i = 0; i < 4; ++i) {
        CHECK(std::memcmp(&g1.data()[i], &g2.data()[i], sizeof(double)) == 0);
    }
}

TEST_CASE("two-layer MLP gradients match finite differences") {
    RngStream rng("mlp", 5);
    const Tensor x = Tensor::from_vector({3}, {0.7, -0.4, 0.9});
    std::vector<Tensor> params = {
        Tensor::param({4, 3}, random_values_off_kink(12, rng, 0.25, 1.25)),
        Tensor::param({4}, random_values_off_kink(4, rng, 0.25, 1.25)),
        Tensor::param({2, 4}, random_values_off_kink(8, rng, 0.25, 1.25)),
        Tensor::param({2}, random_values_off_kink(2, rng, 0.25, 1.25)),
    };
    auto fn = [&x](const std::vector<Tensor>& p) {
        const Tensor hidden = relu(add(matmul(p[0], x), p[1]));
        const Tensor out = relu(add(matmul(p[2], hidden), p[3]));
        return sum(out);
    };
    CHECK(max_grad_rel_error(fn, params) < 1e-4);
}

TEST_CASE("gradients of every differentiable op match finite differences") {
    // 100 seeds per op on small random tensors.
    for (std::uint64_t seed = 0; seed < 100; ++seed) {
        RngStream rng("fd", seed);
        const Tensor c23 = const_like({2, 3}, rng);
        const Tensor c4 = const_like({4}, rng);

        {  // add / sub / mul / scale
            std::vector<Tensor> ps = {Tensor::param({2, 3}, random_values(6, rng, -2, 2)),
                                      Tensor::param({2, 3}, random_values(6, rng, -2, 2))};
            auto fn_add = [&](const std::vector<Tensor>& p) { return sum(mul(add(p[0], p[1]), c23)); };
            auto fn_sub = [&](const std::vector<Tensor>& p) { return sum(mul(sub(p[0], p[1]), c23)); };
            auto fn_mul = [&](const std::vector<Tensor>& p) { return sum(mul(mul(p[0], p[1]), c23)); };
            auto fn_scale = [&](const std::vector<Tensor>& p) { return sum(mul(scale(p[0], 1.7), c23)); };
            CHECK(max_grad_rel_error(fn_add, ps) < 1e-4);
            CHECK(max_grad_rel_error(fn_sub, ps) < 1e-4);
            CHECK(max_grad_rel_error(fn_mul, ps) < 1e-4);
            CHECK(max_grad_rel_error(fn_scale, ps) < 1e-4);
        }
        {  // matmul (matrix and vector right-hand sides), matmul_nt, dot
            const Tensor c32 = const_like({3, 2}, rng);
            const Tensor c3 = const_like({3}, rng);
            const Tensor c35 = const_like({3, 5}, rng);
            std::vector<Tensor> ps = {Tensor::param({3, 4}, random_values(12, rng, -1.5, 1.5)),
                                      Tensor::param({4, 2}, random_values(8, rng, -1.5, 1.5)),
                                      Tensor::param({4}, random_values(4, rng, -1.5, 1.5)),
                                      Tensor::param({5, 4}, random_values(20, rng, -1.5, 1.5))};
            auto fn_mm = [&](const std::vector<Tensor>& p) { return sum(mul(matmul(p[0], p[1]), c32)); };
            auto fn_mv = [&](const std::vector<Tensor>& p) { return sum(mul(matmul(p[0], p[2]), c3)); };
            auto fn_nt = [&](const std::vector<Tensor>& p) { return sum(mul(matmul_nt(p[0], p[3]), c35)); };
            auto fn_dot = [&](const std::vector<Tensor>& p) { return dot(p[2], p[2]); };
            CHECK(max_grad_rel_error(fn_mm, ps) < 1e-4);
            CHECK(max_grad_rel_error(fn_mv, ps) < 1e-4);
            CHECK(max_grad_rel_error(fn_nt, ps) < 1e-4);
            CHECK(max_grad_rel_error(fn_dot, ps) < 1e-4);
        }
        {  // relu (inputs off the kink), exp, sqrt, softmax
            std::vector<Tensor> ps = {
                Tensor::param({2, 3}, random_values_off_kink(6, rng, 0.05, 2.0)),
                Tensor::param({2, 3}, random_values(6, rng, -1.5, 1.5)),
                Tensor::param({2, 3}, random_values(6, rng, 0.2, 2.0)),
            };
            auto fn_relu = [&](const std::vector<Tensor>& p) { return sum(mul(relu(p[0]), c23)); };
            auto fn_exp = [&](const std::vector<Tensor>& p) { return sum(mul(cngcf::exp(p[1]), c23)); };
            auto fn_sqrt = [&](const std::vector<Tensor>& p) { return sum(mul(cngcf::sqrt(p[2]), c23)); };
            auto fn_softmax = [&](const std::vector<Tensor>& p) { return sum(mul(softmax(p[1]), c23)); };
            CHECK(max_grad_rel_error(fn_relu, ps) < 1e-4);
            CHECK(max_grad_rel_error(fn_exp, ps) < 1e-4);
            CHECK(max_grad_rel_error(fn_sqrt, ps) < 1e-4);
            CHECK(max_grad_rel_error(fn_softmax, ps) < 1e-4);
        }
        {  // reductions and structural ops
            const Tensor c5 = const_like({5}, rng);
            const Tensor c7 = const_like({7}, rng);
            const Tensor c43 = const_like({4, 3}, rng);
            const Tensor c73 = const_like({7, 3}, rng);
            const Tensor c33 = const_like({3, 3}, rng);
            std::vector<Tensor> ps = {
                Tensor::param({5, 3}, random_values(15, rng, -2, 2)),
                Tensor::param({3}, random_values(3, rng, -2, 2)),
                Tensor::param({4}, random_values(4, rng, -2, 2)),
                Tensor::param({2, 3}, random_values(6, rng, -2, 2)),
            };
            const std::vector<std::uint32_t> idx = {2, 0, 2, 3};
            const std::vector<std::uint32_t> seg = {0, 0, 2, 1, 2};
            auto fn_sum = [&](const std::vector<Tensor>& p) { return sum(p[0]); };
            auto fn_rowsum = [&](const std::vector<Tensor>& p) { return sum(mul(row_sum(p[0]), c5)); };
            auto fn_concat = [&](const std::vector<Tensor>& p) { return sum(mul(concat(p[1], p[2]), c7)); };
            auto fn_vstack = [&](const std::vector<Tensor>& p) { return sum(mul(vstack(p[3], p[0]), c73)); };
            auto fn_slice = [&](const std::vector<Tensor>& p) { return sum(mul(slice_rows(p[0], 1, 4), c33)); };
            auto fn_gather = [&](const std::vector<Tensor>& p) { return sum(mul(gather_rows(p[0], idx), c43)); };
            auto fn_segsum = [&](const std::vector<Tensor>& p) { return sum(mul(segment_sum(p[0], seg, 3), c33)); };
            auto fn_rowbc = [&](const std::vector<Tensor>& p) { return sum(mul(add_row_broadcast(p[3], p[1]), c23)); };
            CHECK(max_grad_rel_error(fn_sum, ps) < 1e-4);
            CHECK(max_grad_rel_error(fn_rowsum, ps) < 1e-4);
            CHECK(max_grad_rel_error(fn_concat, ps) < 1e-4);
            CHECK(max_grad_rel_error(fn_vstack, ps) < 1e-4);
            CHECK(max_grad_rel_error(fn_slice, ps) < 1e-4);
            CHECK(max_grad_rel_error(fn_gather, ps) < 1e-4);
            CHECK(max_grad_rel_error(fn_segsum, ps) < 1e-4);
            CHECK(max_grad_rel_error(fn_rowbc, ps) < 1e-4);
        }
        {  // model-facing primitives
            const Tensor noise = Tensor::from_vector({2, 3}, random_values(6, rng, -1.5, 1.5));
            std::vector<double> ybits(10);
            for (double& v : ybits) v = rng.bernoulli(0.4) ? 1.0 : 0.0;
            const Tensor y = Tensor::from_vector({2, 5}, std::move(ybits));
            std::vector<Tensor> ps = {
                Tensor::param({2, 3}, random_values(6, rng, -2, 2)),          // mu
                Tensor::param({2, 3}, random_values(6, rng, 0.2, 2.0)),       // sigma / sigma_sq
                Tensor::param({2, 5}, random_values(10, rng, -4.0, 4.0)),     // e scores
            };
            auto fn_gauss = [&](const std::vector<Tensor>& p) {
                return sum(mul(gaussian_sample(p[0], p[1], noise), c23));
            };
            auto fn_kl = [&](const std::vector<Tensor>& p) { return kl_diag_normal(p[0], p[1]); };
            const std::uint64_t mask_seed = seed;
            auto fn_dropout = [&, mask_seed](const std::vector<Tensor>& p) {
                RngStream mask_rng("mask", mask_seed);
                return sum(mul(dropout(p[0], 0.35, true, mask_rng), c23));
            };
            auto fn_logll = [&](const std::vector<Tensor>& p) { return logistic_log_likelihood(y, p[2]); };
            auto fn_multi = [&](const std::vector<Tensor>& p) { return multinomial_log_likelihood(y, p[2]); };
            CHECK(max_grad_rel_error(fn_gauss, ps) < 1e-4);
            CHECK(max_grad_rel_error(fn_kl, ps) < 1e-4);
            CHECK(max_grad_rel_error(fn_dropout, ps) < 1e-4);
            CHECK(max_grad_rel_error(fn_logll, ps) < 1e-4);
            CHECK(max_grad_rel_error(fn_multi, ps) < 1e-4);
        }
    }
}

TEST_CASE("logistic log-likelihood values") {
    // y=1, e=0 -> log 0.5
    CHECK(logistic_log_likelihood(Tensor::from_vector({1}, {1.0}), Tensor::zeros({1})).item() ==
          doctest::Approx(std::log(0.5)).epsilon(1e-12));
    // y=0, e -> -inf saturates at log(1) = 0
    CHECK(logistic_log_likelihood(Tensor::from_vector({1}, {0.0}),
                                  Tensor::from_vector({1}, {-40.0}))
              .item() == doctest::Approx(0.0).epsilon(1e-12));
    CHECK_THROWS_AS(
        logistic_log_likelihood(Tensor::from_vector({1}, {0.5}), Tensor::zeros({1})),
        InvalidInputError);
}

namespace {

// Independent Adam oracle, written directly from the update equations.
struct ReferenceAdam {
    double lr, b1, b2, eps;
    std::vector<double> m, v;
    int t{0};

    explicit ReferenceAdam(std::size_t n, double lr_, double b1_, double b2_, double eps_)
        : lr(lr_), b1(b1_), b2(b2_), eps(eps_), m(n, 0.0), v(n, 0.0) {}

    void step(std::vector<double>& w, const std::vector<double>& g) {
        ++t;
        for (std::size_t i = 0; i < w.size(); ++i) {
            m[i] = b1 * m[i] + (1.0 - b1) * g[i];
            v[i] = b2 * v[i] + (1.0 - b2) * g[i] * g[i];
            const double m_hat = m[i] / (1.0 - std::pow(b1, t));
            const double v_hat = v[i] / (1.0 - std::pow(b2, t));
            w[i] -= lr * m_hat / (std::sqrt(v_hat) + eps);
        }
    }
};

}  // namespace

TEST_CASE("adam against an independent reference trace") {
    const AdamConfig cfg{0.05, 0.9, 0.999, 1e-8};
    std::vector<Tensor> params = {Tensor::param({3}, {1.0, -2.0, 0.5})};
    AdamState state(params, cfg);

    std::vector<double> ref_w = {1.0, -2.0, 0.5};
    ReferenceAdam ref(3, cfg.learning_rate, cfg.beta1, cfg.beta2, cfg.epsilon);

    for (int step = 0; step < 10; ++step) {
        // loss = sum(w * w); gradient 2w on both routes
        const GradientMap grads = backward(sum(mul(params[0], params[0])));
        std::vector<double> ref_g(3);
        for (std::size_t i = 0; i < 3; ++i) ref_g[i] = 2.0 * ref_w[i];
        adam_step(params, grads, state);
        ref.step(ref_w, ref_g);
        for (std::size_t i = 0; i < 3; ++i) {
            CHECK(params[0].at(i) == doctest::Approx(ref_w[i]).epsilon(1e-12));
        }
    }
    CHECK(state.step_count() == 10);
}

TEST_CASE("adam zero-gradient and descent behaviour") {
    {  // gradient-free leaf stays put on the first step
        std::vector<Tensor> params = {Tensor::param({2}, {1.5, -0.5})};
        AdamState state(params, AdamConfig{});
        Tensor other = Tensor::param({2}, {1.0, 1.0});
        const GradientMap grads = backward(sum(other));
        adam_step(params, grads, state);
        CHECK(params[0].at(0) == 1.5);
        CHECK(params[0].at(1) == -0.5);
    }
    {  // one step on f(w) = w^2 from w=1 decreases w
        std::vector<Tensor> params = {Tensor::param({}, {1.0})};
        AdamState state(params, AdamConfig{0.1, 0.9, 0.999, 1e-8});
        const GradientMap grads = backward(mul(params[0], params[0]));
        adam_step(params, grads, state);
        CHECK(params[0].item() < 1.0);
    }
    {  // lr = 0 leaves parameters bit-identical
        std::vector<Tensor> params = {Tensor::param({3}, {0.25, -1.75, 3.5})};
        const std::vector<double> before(params[0].data().begin(), params[0].data().end());
        AdamState state(params, AdamConfig{0.0, 0.9, 0.999, 1e-8});
        for (int i = 0; i < 5; ++i) {
            const GradientMap grads = backward(sum(mul(params[0], params[0])));
            adam_step(params, grads, state);
        }
        for (std::size_t i = 0; i < 3; ++i) {
            CHECK(std::memcmp(&before[i], &params[0].data()[i], sizeof(double)) == 0);
        }
    }
}

TEST_CASE("rng streams are deterministic and independent") {
    RngStream a("root", 42);
    RngStream b("root", 42);
    for (int i = 0; i < 100; ++i) CHECK(a.normal() == b.normal());

    RngStream parent("root", 42);
    RngStream child1 = parent.derive("z", 1);
    RngStream child2 = parent.derive("z", 2);
    CHECK(child1.uniform01() != child2.uniform01());
    CHECK(parent.draw_count() == 0);  // deriving consumes nothing

    // unbiased-ish small-range sanity
    RngStream c("count", 9);
    std::vector<int> counts(5, 0);
    for (int i = 0; i < 5000; ++i) counts[c.uniform_int(5)]++;
    for (int k = 0; k < 5; ++k) CHECK(std::abs(counts[k] - 1000) < 150);
}
