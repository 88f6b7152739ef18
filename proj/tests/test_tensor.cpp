#include <doctest.h>

#include <cmath>
#include <vector>

#include "holoqa/tensor.hpp"
#include "support.hpp"

using holoqa::Tensor;
using holoqa::Tape;
using holoqa::Shape;

TEST_SUITE("tensor") {

TEST_CASE("construction validates shape against data length") {
  CHECK_NOTHROW(Tensor<double>(Shape{2, 3}, std::vector<double>(6, 0.0)));
  CHECK_THROWS_AS(Tensor<double>(Shape{2, 3}, std::vector<double>(5, 0.0)),
                  holoqa::DimensionError);
  auto s = Tensor<double>::scalar(4.0);
  CHECK(s.item() == 4.0);
  auto v = Tensor<double>::vector({1.0, 2.0});
  CHECK_THROWS_AS(v.item(), holoqa::ContractError);
}

TEST_CASE("elementwise add / sub / mul") {
  auto a = Tensor<double>::vector({1.0, 2.0, 3.0});
  auto b = Tensor<double>::vector({4.0, 5.0, 6.0});
  CHECK(holoqa::add(a, b).values() == std::vector<double>{5.0, 7.0, 9.0});
  CHECK(holoqa::sub(a, b).values() == std::vector<double>{-3.0, -3.0, -3.0});
  CHECK(holoqa::mul(a, b).values() == std::vector<double>{4.0, 10.0, 18.0});
  auto c = Tensor<double>::vector({1.0, 2.0});
  CHECK_THROWS_AS(holoqa::add(a, c), holoqa::DimensionError);
}

TEST_CASE("matmul against a hand-computed product") {
  auto a = Tensor<double>::matrix(2, 2, {1.0, 2.0, 3.0, 4.0});
  auto b = Tensor<double>::matrix(2, 1, {5.0, 6.0});
  auto c = holoqa::matmul(a, b);
  CHECK(c.shape() == Shape{2, 1});
  CHECK(c.values() == std::vector<double>{17.0, 39.0});
  CHECK_THROWS_AS(holoqa::matmul(b, b), holoqa::DimensionError);
}

TEST_CASE("matvec and vecmat agree with matmul") {
  holoqa::Rng rng(11);
  auto m = testsupport::rand_vec<double>(rng, 12);
  auto x = testsupport::rand_vec<double>(rng, 4);
  auto A = Tensor<double>::matrix(3, 4, m);
  auto xv = Tensor<double>::vector(x);
  auto y = holoqa::matvec(A, xv);
  auto ref = holoqa::matmul(A, Tensor<double>::matrix(4, 1, x));
  CHECK(testsupport::max_abs_diff(y.values(), ref.values()) < 1e-12);

  auto z = holoqa::vecmat(xv, Tensor<double>::matrix(4, 3, m));
  auto ref2 = holoqa::matmul(Tensor<double>::matrix(1, 4, x),
                             Tensor<double>::matrix(4, 3, m));
  CHECK(testsupport::max_abs_diff(z.values(), ref2.values()) < 1e-12);
}

TEST_CASE("scalar nonlinearities hit reference values") {
  auto x = Tensor<double>::vector({1.0});
  CHECK(holoqa::sigmoid(x).at(0) == doctest::Approx(0.7310585786300049).epsilon(1e-12));
  CHECK(holoqa::tanh_op(x).at(0) == doctest::Approx(0.7615941559557649).epsilon(1e-12));
  CHECK(holoqa::log_op(x).at(0) == doctest::Approx(0.0));
  CHECK_THROWS_AS(holoqa::log_op(Tensor<double>::vector({0.0})), holoqa::NumericError);
  CHECK_THROWS_AS(holoqa::log_op(Tensor<double>::vector({-1.0})), holoqa::NumericError);
}

TEST_CASE("softmax normalizes, stabilizes, and rejects non-finite logits") {
  auto p = holoqa::softmax(Tensor<double>::vector({std::log(3.0), 0.0}));
  CHECK(p.at(0) == doctest::Approx(0.75).epsilon(1e-12));
  CHECK(p.at(1) == doctest::Approx(0.25).epsilon(1e-12));

  auto big = holoqa::softmax(Tensor<double>::vector({1000.0, 1000.0}));
  CHECK(big.at(0) == doctest::Approx(0.5));

  holoqa::Rng rng(7);
  for (int rep = 0; rep < 20; ++rep) {
    auto v = testsupport::rand_vec<double>(rng, 5, -30.0, 30.0);
    auto sm = holoqa::softmax(Tensor<double>::vector(v));
    double total = 0;
    for (std::size_t i = 0; i < sm.numel(); ++i) {
      CHECK(sm.at(i) >= 0.0);
      total += sm.at(i);
    }
    CHECK(total == doctest::Approx(1.0).epsilon(1e-12));
  }

  const double inf = std::numeric_limits<double>::infinity();
  CHECK_THROWS_AS(holoqa::softmax(Tensor<double>::vector({inf, 0.0})),
                  holoqa::NumericError);
  CHECK_THROWS_AS(holoqa::softmax(Tensor<double>::vector({std::nan(""), 0.0})),
                  holoqa::NumericError);
}

TEST_CASE("add_bias broadcasts over rows only") {
  auto m = Tensor<double>::matrix(2, 3, {1, 2, 3, 4, 5, 6});
  auto b = Tensor<double>::vector({10, 20, 30});
  auto r = holoqa::add_bias(m, b);
  CHECK(r.values() == std::vector<double>{11, 22, 33, 14, 25, 36});
  CHECK_THROWS_AS(holoqa::add_bias(m, Tensor<double>::vector({1.0, 2.0})),
                  holoqa::DimensionError);
}

TEST_CASE("concat, stack_rows, row, element route values") {
  auto a = Tensor<double>::vector({1, 2});
  auto b = Tensor<double>::vector({3});
  auto c = holoqa::concat<double>({a, b});
  CHECK(c.values() == std::vector<double>{1, 2, 3});

  auto m = holoqa::stack_rows<double>({a, Tensor<double>::vector({4, 5})});
  CHECK(m.shape() == Shape{2, 2});
  CHECK(holoqa::row(m, 1).values() == std::vector<double>{4, 5});
  CHECK(holoqa::element(c, 2).item() == 3.0);
  CHECK_THROWS_AS(holoqa::element(c, 3), holoqa::DimensionError);
  CHECK_THROWS_AS(holoqa::row(m, 2), holoqa::DimensionError);
}

TEST_CASE("backward accumulates gradients through a small graph") {
  // f = sum((a+b) * a) => df/da = 2a + b, df/db = a
  auto a = Tensor<double>::vector({1.0, 2.0}, true);
  auto b = Tensor<double>::vector({3.0, 4.0}, true);
  {
    Tape<double> tape;
    auto f = holoqa::sum(holoqa::mul(holoqa::add(a, b), a));
    tape.backward(f);
  }
  CHECK(a.grad() == std::vector<double>{5.0, 8.0});
  CHECK(b.grad() == std::vector<double>{1.0, 2.0});
}

TEST_CASE("tape rejects misuse") {
  auto a = Tensor<double>::vector({1.0}, true);
  {
    Tape<double> tape;
    auto wide = Tensor<double>::vector({1.0, 2.0}, true);
    auto f = holoqa::add(wide, wide);  // non-scalar
    CHECK_THROWS_AS(tape.backward(f), holoqa::ContractError);
  }
  {
    Tape<double> tape;
    CHECK_THROWS_AS((Tape<double>()), holoqa::ContractError);  // nested
    auto f = holoqa::sum(holoqa::add(a, a));
    tape.backward(f);
    CHECK_THROWS_AS(tape.backward(f), holoqa::ContractError);  // consumed
  }
  {
    Tape<double> tape;
    CHECK_THROWS_AS(tape.backward(Tensor<double>::scalar(0.0)),
                    holoqa::ContractError);  // empty tape
  }
  a.clear_grad();
  CHECK_THROWS_AS(a.grad(), holoqa::ContractError);
}

TEST_CASE("ops outside a tape build no graph") {
  auto a = Tensor<double>::vector({1.0, 2.0}, true);
  auto f = holoqa::sum(holoqa::mul(a, a));
  CHECK_FALSE(f.requires_grad());
  CHECK(f.node()->parents.empty());
}

TEST_CASE("clamp passes gradient only strictly inside the interval") {
  auto x = Tensor<double>::vector({-2.0, 0.5, 2.0}, true);
  {
    Tape<double> tape;
    auto f = holoqa::sum(holoqa::clamp(x, -1.0, 1.0));
    tape.backward(f);
  }
  CHECK(x.grad() == std::vector<double>{0.0, 1.0, 0.0});
}

TEST_CASE("gradients match finite differences on a dense tanh chain") {
  holoqa::Rng rng(23);
  auto W = Tensor<double>::matrix(3, 4, testsupport::rand_vec<double>(rng, 12), true);
  auto b = Tensor<double>::vector(testsupport::rand_vec<double>(rng, 3), true);
  auto x = Tensor<double>::vector(testsupport::rand_vec<double>(rng, 4), true);
  auto f = [&] {
    auto h = holoqa::tanh_op(holoqa::add(holoqa::matvec(W, x), b));
    return holoqa::sum(holoqa::mul(h, h));
  };
  const double worst =
      holoqa::finite_difference_check_params<double>(f, {W, b, x}, 1e-5);
  CHECK(worst < 1e-6);
}

TEST_CASE("gradients match finite differences across every primitive") {
  holoqa::Rng rng(29);
  auto A = Tensor<double>::matrix(2, 3, testsupport::rand_vec<double>(rng, 6), true);
  auto B = Tensor<double>::matrix(3, 2, testsupport::rand_vec<double>(rng, 6), true);
  auto u = Tensor<double>::vector(testsupport::rand_vec<double>(rng, 2), true);
  auto v = Tensor<double>::vector(testsupport::rand_vec<double>(rng, 2), true);
  auto f = [&] {
    auto M = holoqa::matmul(A, B);                       // [2x2]
    auto r0 = holoqa::row(M, 0);
    auto r1 = holoqa::row(M, 1);
    auto s = holoqa::sigmoid(holoqa::sub(r0, r1));
    auto conc = holoqa::concat<double>({s, u});
    auto st = holoqa::stack_rows<double>({conc, conc});  // [2x4]
    auto bias = holoqa::add_bias(st, holoqa::concat<double>({v, v}));
    auto flat = holoqa::concat<double>(
        {holoqa::row(bias, 0), holoqa::row(bias, 1)});
    auto sm = holoqa::softmax(holoqa::scale(flat, 0.5));
    auto picked = holoqa::element(sm, 1);
    auto lg = holoqa::log_op(holoqa::clamp(sm, 1e-9, 1.0));
    return holoqa::add(holoqa::sum(lg),
                       holoqa::add(picked, holoqa::dot(u, v)));
  };
  const double worst =
      holoqa::finite_difference_check_params<double>(f, {A, B, u, v}, 1e-5);
  CHECK(worst < 1e-6);
}

TEST_CASE("finite-difference harness rejects non-deterministic functions") {
  int calls = 0;
  auto f = [&] { return Tensor<double>::scalar(static_cast<double>(calls++)); };
  CHECK_THROWS_AS(
      holoqa::finite_difference_check_params<double>(f, {}, 1e-5),
      holoqa::ContractError);
  CHECK_THROWS_AS(holoqa::finite_difference_check_params<double>(
                      [] { return Tensor<double>::scalar(0.0); }, {}, 0.0),
                  holoqa::ContractError);
}

TEST_CASE("float instantiation works end to end") {
  auto a = Tensor<float>::vector({1.0f, 2.0f}, true);
  auto b = Tensor<float>::vector({3.0f, 4.0f}, true);
  {
    Tape<float> tape;
    auto f = holoqa::sum(holoqa::mul(a, b));
    tape.backward(f);
  }
  CHECK(a.grad() == std::vector<float>{3.0f, 4.0f});
  CHECK(b.grad() == std::vector<float>{1.0f, 2.0f});
}

TEST_CASE("dot is symmetric and matches the sum of products") {
  holoqa::Rng rng(31);
  for (int rep = 0; rep < 10; ++rep) {
    auto av = testsupport::rand_vec<double>(rng, 6);
    auto bv = testsupport::rand_vec<double>(rng, 6);
    auto a = Tensor<double>::vector(av);
    auto b = Tensor<double>::vector(bv);
    double ref = 0;
    for (std::size_t i = 0; i < av.size(); ++i) ref += av[i] * bv[i];
    CHECK(holoqa::dot(a, b).item() == doctest::Approx(ref).epsilon(1e-12));
    CHECK(holoqa::dot(a, b).item() == holoqa::dot(b, a).item());
  }
}

}  // TEST_SUITE
