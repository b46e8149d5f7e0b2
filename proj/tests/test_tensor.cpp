#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "evotext/errors.hpp"
#include "evotext/optim.hpp"
#include "evotext/rng.hpp"
#include "evotext/tensor.hpp"
#include "gradcheck.hpp"

using namespace evotext;

namespace {

TensorPtr random_tensor(std::vector<std::size_t> shape, Rng& rng, double lo = -1.0,
                        double hi = 1.0) {
    auto t = Tensor::create(std::move(shape));
    for (auto& v : t->data) v = rng.uniform(lo, hi);
    return t;
}

// Independent oracle: naive triple-loop product.
std::vector<double> naive_matmul(const Tensor& a, const Tensor& b) {
    std::vector<double> out(a.rows() * b.cols(), 0.0);
    for (std::size_t i = 0; i < a.rows(); ++i)
        for (std::size_t j = 0; j < b.cols(); ++j)
            for (std::size_t p = 0; p < a.cols(); ++p)
                out[i * b.cols() + j] += a.at(i, p) * b.at(p, j);
    return out;
}

}  // namespace

TEST_CASE("matmul identity and annihilator") {
    auto eye = Tensor::from({2, 2}, {1, 0, 0, 1});
    auto m = Tensor::from({2, 2}, {1, 2, 3, 4});
    auto c = matmul(eye, m);
    CHECK(c->data == std::vector<double>{1, 2, 3, 4});

    auto zero = Tensor::from({2, 2}, {0, 0, 0, 0});
    auto z = matmul(eye, zero);
    for (double v : z->data) CHECK(v == 0.0);
}

TEST_CASE("matmul matches naive triple-loop oracle") {
    Rng rng(42);
    auto a = random_tensor({3, 4}, rng);
    auto b = random_tensor({4, 2}, rng);
    auto c = matmul(a, b);
    auto expected = naive_matmul(*a, *b);
    for (std::size_t i = 0; i < expected.size(); ++i) {
        CHECK(c->data[i] == doctest::Approx(expected[i]).epsilon(1e-12));
    }
}

TEST_CASE("matmul shape mismatch names both shapes") {
    auto a = Tensor::create({2, 3});
    auto b = Tensor::create({2, 2});
    CHECK_THROWS_WITH_AS(matmul(a, b), doctest::Contains("[2x3]"), ShapeError);
}

TEST_CASE("softmax_rows trivial rows") {
    auto x = Tensor::from({2, 2}, {0, 0, 1000, 1000});
    auto y = softmax_rows(x);
    for (double v : y->data) CHECK(v == doctest::Approx(0.5).epsilon(1e-15));
    CHECK(std::isfinite(y->data[2]));
}

TEST_CASE("softmax_rows matches exp/sum oracle") {
    auto x = Tensor::from({1, 3}, {1, 2, 3});
    auto y = softmax_rows(x);
    long double denom = std::exp(1.0L) + std::exp(2.0L) + std::exp(3.0L);
    for (int j = 0; j < 3; ++j) {
        CHECK(y->data[j] ==
              doctest::Approx(static_cast<double>(std::exp(1.0L + j) / denom)).epsilon(1e-12));
    }
}

TEST_CASE("softmax rows sum to 1 for any finite input") {
    Rng rng(7);
    for (int trial = 0; trial < 20; ++trial) {
        auto x = random_tensor({4, 6}, rng, -50.0, 50.0);
        auto y = softmax_rows(x);
        for (std::size_t i = 0; i < 4; ++i) {
            double s = 0.0;
            for (std::size_t j = 0; j < 6; ++j) s += y->at(i, j);
            CHECK(s == doctest::Approx(1.0).epsilon(1e-12));
        }
    }
}

TEST_CASE("masked softmax zeroes disallowed entries; all-masked row rejected") {
    auto x = Tensor::from({2, 3}, {1, 2, 3, 1, 1, 1});
    AttnMask mask{2, 3, {1, 1, 0, 1, 1, 1}};
    auto y = softmax_rows(x, &mask);
    CHECK(y->at(0, 2) == 0.0);
    CHECK(y->at(0, 0) + y->at(0, 1) == doctest::Approx(1.0).epsilon(1e-12));

    AttnMask dead{2, 3, {0, 0, 0, 1, 1, 1}};
    CHECK_THROWS_AS(softmax_rows(x, &dead), ContractError);
}

TEST_CASE("layer_norm trivial cases") {
    double eps = 1e-5;
    auto gain = Tensor::from({3}, {1, 1, 1});
    auto bias = Tensor::from({3}, {0, 0, 0});

    auto constant = Tensor::from({1, 3}, {5, 5, 5});
    auto y = layer_norm(constant, gain, bias, eps);
    for (double v : y->data) CHECK(v == doctest::Approx(0.0).epsilon(1e-12));

    auto zero_gain = Tensor::from({3}, {0, 0, 0});
    auto b2 = Tensor::from({3}, {7, 8, 9});
    auto x = Tensor::from({2, 3}, {1, 2, 3, 4, 5, 6});
    auto y2 = layer_norm(x, zero_gain, b2, eps);
    CHECK(y2->data == std::vector<double>{7, 8, 9, 7, 8, 9});
}

TEST_CASE("layer_norm matches two-pass statistics oracle") {
    auto x = Tensor::from({1, 3}, {1, 2, 3});
    auto gain = Tensor::from({3}, {1, 1, 1});
    auto bias = Tensor::from({3}, {0, 0, 0});
    double eps = 1e-5;
    auto y = layer_norm(x, gain, bias, eps);
    // two-pass mean/variance
    double mean = (1 + 2 + 3) / 3.0;
    double var = ((1 - mean) * (1 - mean) + (2 - mean) * (2 - mean) + (3 - mean) * (3 - mean)) / 3.0;
    for (int j = 0; j < 3; ++j) {
        double expected = (x->data[j] - mean) / std::sqrt(var + eps);
        CHECK(y->data[j] == doctest::Approx(expected).epsilon(1e-9));
    }
}

TEST_CASE("layer_norm normalizes rows to mean 0 variance 1") {
    Rng rng(3);
    auto x = random_tensor({5, 8}, rng, -4.0, 4.0);
    auto gain = seeded_init({8}, InitScheme::ones, 0);
    auto bias = seeded_init({8}, InitScheme::zeros, 0);
    auto y = layer_norm(x, gain, bias, 1e-10);
    for (std::size_t i = 0; i < 5; ++i) {
        double m = 0, v = 0;
        for (std::size_t j = 0; j < 8; ++j) m += y->at(i, j);
        m /= 8;
        for (std::size_t j = 0; j < 8; ++j) v += (y->at(i, j) - m) * (y->at(i, j) - m);
        v /= 8;
        CHECK(m == doctest::Approx(0.0).epsilon(1e-9));
        CHECK(v == doctest::Approx(1.0).epsilon(1e-6));
    }
}

TEST_CASE("cross entropy uniform and saturated cases") {
    auto logits = Tensor::from({2, 4}, {0, 0, 0, 0, 1, 1, 1, 1});
    auto loss = cross_entropy_from_logits(logits, {0, 3});
    CHECK(loss->data[0] == doctest::Approx(std::log(4.0)).epsilon(1e-12));

    auto hot = Tensor::from({1, 3}, {50, 0, 0});
    auto l2 = cross_entropy_from_logits(hot, {0});
    CHECK(l2->data[0] < 1e-20);
}

TEST_CASE("cross entropy matches log-sum-exp oracle") {
    Rng rng(11);
    auto logits = random_tensor({5, 3}, rng, -2.0, 2.0);
    std::vector<std::size_t> targets{0, 2, 1, 1, 0};
    auto loss = cross_entropy_from_logits(logits, targets);
    long double total = 0.0L;
    for (std::size_t i = 0; i < 5; ++i) {
        long double lse = 0.0L;
        for (std::size_t j = 0; j < 3; ++j) lse += std::exp(static_cast<long double>(logits->at(i, j)));
        lse = std::log(lse);
        total += lse - logits->at(i, targets[i]);
    }
    CHECK(loss->data[0] == doctest::Approx(static_cast<double>(total / 5.0L)).epsilon(1e-10));
}

TEST_CASE("cross entropy rejects out-of-range target") {
    auto logits = Tensor::create({2, 3});
    CHECK_THROWS_AS(cross_entropy_from_logits(logits, {0, 3}), IndexError);
}

TEST_CASE("backward: sum gives all-ones grad; unused parameter stays zero") {
    auto x = Tensor::create({3, 2}, true);
    auto unused = Tensor::create({2, 2}, true);
    unused->ensure_grad();
    Tape tape;
    {
        TapeScope scope(tape);
        auto loss = tensor_sum(x);
        backward(loss, tape);
    }
    for (double g : x->grad) CHECK(g == 1.0);
    for (double g : unused->grad) CHECK(g == 0.0);
}

TEST_CASE("backward rejects non-scalar loss") {
    auto x = Tensor::create({2, 2}, true);
    Tape tape;
    TapeScope scope(tape);
    auto y = scale(x, 2.0);
    CHECK_THROWS_AS(backward(y, tape), ContractError);
}

TEST_CASE("backward accumulates across calls without reset") {
    auto x = Tensor::from({2}, {1, 2}, true);
    Tape tape;
    {
        TapeScope scope(tape);
        auto loss = tensor_sum(x);
        backward(loss, tape);
        backward(loss, tape);
    }
    for (double g : x->grad) CHECK(g == 2.0);
}

TEST_CASE("tape replay reproduces bit-identical outputs") {
    Rng rng(99);
    auto a = random_tensor({3, 3}, rng);
    auto b = random_tensor({3, 3}, rng);
    Tape tape;
    TensorPtr out;
    {
        TapeScope scope(tape);
        out = softmax_rows(matmul(gelu(a), b));
    }
    auto snapshot = out->data;
    std::fill(out->data.begin(), out->data.end(), -1.0);
    tape.replay();
    CHECK(out->data == snapshot);
}

TEST_CASE("gradients match central finite differences for every op") {
    Rng rng(1234);
    for (int trial = 0; trial < 5; ++trial) {
        auto a = random_tensor({3, 4}, rng);
        auto b = random_tensor({4, 3}, rng);
        CHECK(gradcheck::max_rel_err({a, b}, [&] { return tensor_sum(matmul(a, b)); }) < 1e-4);

        auto x = random_tensor({3, 5}, rng);
        CHECK(gradcheck::max_rel_err({x}, [&] { return tensor_sum(softmax_rows(x)); }) < 1e-4);
        CHECK(gradcheck::max_rel_err({x}, [&] { return tensor_sum(gelu(x)); }) < 1e-4);
        CHECK(gradcheck::max_rel_err({x}, [&] { return tensor_sum(transpose(x)); }) < 1e-4);

        auto gain = random_tensor({5}, rng, 0.5, 1.5);
        auto bias = random_tensor({5}, rng);
        CHECK(gradcheck::max_rel_err({x, gain, bias}, [&] {
                  return tensor_sum(layer_norm(x, gain, bias, 1e-5));
              }) < 1e-4);

        std::vector<std::size_t> targets{1, 0, 4};
        CHECK(gradcheck::max_rel_err({x}, [&] {
                  return cross_entropy_from_logits(x, targets);
              }) < 1e-4);

        auto table = random_tensor({6, 4}, rng);
        std::vector<std::size_t> idx{0, 3, 3, 5};
        CHECK(gradcheck::max_rel_err({table}, [&] {
                  return tensor_sum(softmax_rows(embed_rows(table, idx)));
              }) < 1e-4);

        auto p = random_tensor({3, 2}, rng);
        auto q = random_tensor({3, 3}, rng);
        CHECK(gradcheck::max_rel_err({p, q}, [&] {
                  return tensor_sum(gelu(concat_cols({p, q})));
              }) < 1e-4);

        std::vector<std::uint8_t> sel{1, 0, 1};
        CHECK(gradcheck::max_rel_err({x}, [&] {
                  return tensor_sum(mean_rows(x, sel));
              }) < 1e-4);

        auto bias_row = random_tensor({5}, rng);
        CHECK(gradcheck::max_rel_err({x, bias_row}, [&] {
                  return tensor_sum(softmax_rows(add_row_broadcast(x, bias_row)));
              }) < 1e-4);

        auto y2 = random_tensor({3, 5}, rng);
        CHECK(gradcheck::max_rel_err({x, y2}, [&] {
                  return tensor_sum(mul_elems(x, y2));
              }) < 1e-4);
    }
}

TEST_CASE("sgd step: direct formula and zero-grad behavior") {
    auto p = Tensor::scalar(1.0, true);
    p->ensure_grad();
    p->grad[0] = 2.0;
    Optimizer opt(OptimizerKind::sgd, {p}, 0.1);
    opt.step();
    CHECK(p->data[0] == doctest::Approx(0.8).epsilon(1e-15));
    CHECK(p->grad[0] == 0.0);
    CHECK(opt.step_count() == 1);

    // zero grad: parameter unchanged, step_count still increments
    opt.step();
    CHECK(p->data[0] == doctest::Approx(0.8).epsilon(1e-15));
    CHECK(opt.step_count() == 2);
}

TEST_CASE("adam single step matches scalar hand-rolled oracle") {
    auto p = Tensor::scalar(0.0, true);
    p->ensure_grad();
    p->grad[0] = 1.0;
    AdamHyper hp;
    Optimizer opt(OptimizerKind::adam, {p}, 1e-3, hp);
    opt.step();
    // scalar oracle, one step from zero moments
    double m = (1 - hp.beta1) * 1.0;
    double v = (1 - hp.beta2) * 1.0;
    double mhat = m / (1 - hp.beta1);
    double vhat = v / (1 - hp.beta2);
    double expected = -1e-3 * mhat / (std::sqrt(vhat) + hp.eps);
    CHECK(p->data[0] == doctest::Approx(expected).epsilon(1e-12));
    CHECK(std::abs(p->data[0] + 1e-3) < 1e-10);
}

TEST_CASE("optimizer requires populated grads") {
    auto p = Tensor::scalar(1.0, true);
    Optimizer opt(OptimizerKind::sgd, {p}, 0.1);
    CHECK_THROWS_AS(opt.step(), ContractError);
}

TEST_CASE("seeded_init determinism and schemes") {
    auto z = seeded_init({3, 3}, InitScheme::zeros, 5);
    for (double v : z->data) CHECK(v == 0.0);
    auto o = seeded_init({2}, InitScheme::ones, 5);
    for (double v : o->data) CHECK(v == 1.0);

    auto a = seeded_init({4, 4}, InitScheme::uniform_scaled, 17);
    auto b = seeded_init({4, 4}, InitScheme::uniform_scaled, 17);
    CHECK(a->data == b->data);
    auto c = seeded_init({4, 4}, InitScheme::uniform_scaled, 18);
    CHECK(a->data != c->data);
}

TEST_CASE("uniform_scaled sample statistics: mean within 3 sigma of 0") {
    auto t = seeded_init({100, 100}, InitScheme::uniform_scaled, 2024);
    double bound = 1.0 / 10.0;  // fan_in = 100
    double sum = 0.0;
    for (double v : t->data) {
        CHECK(v >= -bound);
        CHECK(v < bound);
        sum += v;
    }
    double mean = sum / 1e4;
    double sigma_mean = (bound / std::sqrt(3.0)) / 100.0;  // sd of U(-b,b) over sqrt(n)
    CHECK(std::abs(mean) < 3.0 * sigma_mean);
}

TEST_CASE("identical seeds give bit-identical forward, gradients, and updates") {
    auto run = [](std::uint64_t seed) {
        Rng rng(seed);
        auto w = seeded_init({4, 4}, InitScheme::uniform_scaled, seed);
        w->requires_grad = true;
        auto x = random_tensor({2, 4}, rng);
        Tape tape;
        TensorPtr loss;
        {
            TapeScope scope(tape);
            loss = cross_entropy_from_logits(matmul(x, w), {0, 2});
            backward(loss, tape);
        }
        Optimizer opt(OptimizerKind::adam, {w}, 1e-2);
        opt.step();
        return std::make_pair(loss->data[0], w->data);
    };
    auto [l1, w1] = run(31);
    auto [l2, w2] = run(31);
    CHECK(l1 == l2);
    CHECK(w1 == w2);
}
