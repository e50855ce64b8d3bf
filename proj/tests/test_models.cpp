#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "mmselab/models.hpp"

using namespace mmselab;

namespace {

std::shared_ptr<const ModelSpec> spec_of(PriorSpec prior, BaseModel base, WeightDist w = WeightDist::Gaussian) {
  ModelSpec s;
  s.prior = std::move(prior);
  s.base = std::move(base);
  s.weights = w;
  return make_model(std::move(s));
}

SnrMatrix test_snr(int K, double s) {
  SymMatrix b(K);
  for (int l = 0; l < K; ++l) {
    b.set(l, l, 2.0 * K + 0.5);
    for (int lp = l + 1; lp < K; ++lp) b.set(l, lp, 1.5);
  }
  return SnrMatrix(s, b);
}

// Reference committee written independently of the library.
double committee_ref(const SignalMatrix& x, const Matrix& theta, int mu) {
  double total = 0.0;
  for (int k = 0; k < x.cols(); ++k) {
    double a = 0.0;
    for (int i = 0; i < x.rows(); ++i) a += theta(mu, i) * x(i, k);
    total += a >= 0 ? 1.0 : -1.0;
  }
  return total >= 0 ? 1.0 : -1.0;
}

}  // namespace

TEST_CASE("prior sampling") {
  Rng rng(3);
  SignalMatrix x = sample_prior(PriorSpec::rademacher(3), 500, rng);
  CHECK(x.rows() == 500);
  CHECK(x.cols() == 3);
  for (int i = 0; i < x.rows(); ++i)
    for (int k = 0; k < 3; ++k) CHECK(std::abs(x(i, k)) == 1.0);

  const int N = 20000;
  SignalMatrix u = sample_prior(PriorSpec::uniform_box(1, 2.0), N, rng);
  CHECK(u.maxCoeff() <= 2.0);
  CHECK(u.minCoeff() >= -2.0);
  // Var of U(-2,2) is 4/3.
  double se = std::sqrt(4.0 / 3.0 / N);
  CHECK(std::abs(u.mean()) < 3 * se);

  Vector one = Vector::Ones(2);
  SignalMatrix single = sample_prior(PriorSpec::discrete({one}, {1.0}, 1.0), 7, rng);
  CHECK(single == SignalMatrix::Ones(7, 2));
}

TEST_CASE("prior validation") {
  Vector a = Vector::Ones(1);
  CHECK_THROWS_AS(PriorSpec::discrete({}, {}, 1.0), std::invalid_argument);
  CHECK_THROWS_AS(PriorSpec::discrete({a}, {0.5}, 1.0), std::invalid_argument);
  CHECK_THROWS_AS(PriorSpec::discrete({a, -a}, {0.5}, 1.0), std::invalid_argument);
  CHECK_THROWS_AS(PriorSpec::discrete({a * 3.0}, {1.0}, 1.0), std::invalid_argument);
  PriorSpec b = PriorSpec::binary(2, 0.75);
  CHECK(b.support_size() == 4);
  CHECK(b.mean()(0) == doctest::Approx(0.5));
  CHECK(b.second_moment()(0, 0) == doctest::Approx(1.0));
  CHECK(b.second_moment()(0, 1) == doctest::Approx(0.25));
  RowVector r(2);
  r << 1, 1;
  CHECK(b.log_density(r) == doctest::Approx(std::log(0.5625)));
  r << 1, 0.5;
  CHECK(b.log_density(r) == -std::numeric_limits<double>::infinity());
  PriorSpec u = PriorSpec::uniform_box(2, 1.0);
  CHECK(u.second_moment()(0, 0) == doctest::Approx(1.0 / 3.0));
  CHECK(u.log_density(r) == doctest::Approx(-2.0 * std::log(2.0)));
}

TEST_CASE("spiked tensor: noise-free order 2 example") {
  SignalMatrix x = SignalMatrix::Ones(2, 1);
  SymTensor y = tensor_mean(x, 2);
  CHECK(y.size() == 3);
  for (std::size_t e = 0; e < y.size(); ++e) CHECK(y.value(e) == doctest::Approx(1.0 / std::sqrt(2.0)));
  CHECK(y.dense2()(1, 0) == doctest::Approx(1.0 / std::sqrt(2.0)));
  Rng rng(1);
  CHECK_THROWS_AS(tensor_forward(x, 1, rng), std::invalid_argument);
}

TEST_CASE("spiked tensor: pure noise when the signal is zero") {
  Rng rng(4);
  SignalMatrix x = SignalMatrix::Zero(40, 2);
  SymTensor y = tensor_forward(x, 3, rng);
  double sum = 0, sq = 0;
  for (std::size_t e = 0; e < y.size(); ++e) {
    sum += y.value(e);
    sq += y.value(e) * y.value(e);
  }
  const double N = static_cast<double>(y.size());
  CHECK(std::abs(sum / N) < 3.0 / std::sqrt(N));
  CHECK(std::abs(sq / N - 1.0) < 3.0 * std::sqrt(2.0 / N));
}

TEST_CASE("spiked tensor: storage layout and mean part against brute force") {
  const int n = 5, p = 3, K = 2;
  Rng rng(8);
  SignalMatrix x = sample_prior(PriorSpec::uniform_box(K, 1.0), n, rng);
  SymTensor y = tensor_mean(x, p);
  // C(n+p-1, p) multisets
  CHECK(y.size() == 35);
  // Brute force over all ordered tuples, grouped by their sorted multiset.
  std::vector<double> acc(y.size(), 0.0);
  std::vector<int> mult(y.size(), 0);
  for (int a = 0; a < n; ++a)
    for (int b = 0; b < n; ++b)
      for (int c = 0; c < n; ++c) {
        int t[3] = {a, b, c};
        std::sort(t, t + 3);
        std::size_t e = y.index_of(std::span<const int>(t, 3));
        auto stored = y.tuple(e);
        CHECK(std::equal(stored.begin(), stored.end(), t));
        double v = 0.0;
        for (int k = 0; k < K; ++k) v += x(a, k) * x(b, k) * x(c, k);
        acc[e] += v / n;  // n^{(1-p)/2} = 1/n for p = 3
        mult[e] += 1;
      }
  for (std::size_t e = 0; e < y.size(); ++e) CHECK(y.value(e) == doctest::Approx(acc[e] / mult[e]).epsilon(1e-12));
}

TEST_CASE("glm forward") {
  Rng rng(2);
  SignalMatrix x = SignalMatrix::Zero(4, 2);
  Matrix theta = Matrix::Random(6, 4);
  Matrix a = activations(theta, x);
  CHECK(a.isZero());
  KernelSpec ks;
  ks.name = "committee";
  Matrix y = glm_forward(x, theta, *make_kernel(ks, 2), rng);
  for (int mu = 0; mu < 6; ++mu) CHECK(y(mu, 0) == 1.0);  // sign(0) = +1

  SignalMatrix z = sample_prior(PriorSpec::rademacher(2), 4, rng);
  Vector w(2);
  w << 0.5, -1.0;
  Matrix yg = glm_forward(z, theta, *gaussian_kernel(w, 1e-12), rng);
  Matrix az = activations(theta, z);
  for (int mu = 0; mu < 6; ++mu) {
    double want = 0.5 * az(mu, 0) - az(mu, 1);
    CHECK(yg(mu, 0) == doctest::Approx(want).epsilon(1e-9));
  }
  CHECK_THROWS_AS(glm_forward(z, Matrix::Ones(3, 5), *gaussian_kernel(w, 1.0), rng), std::invalid_argument);
}

TEST_CASE("committee forward matches a brute-force reference") {
  Rng rng(11);
  for (int t = 0; t < 50; ++t) {
    SignalMatrix x = sample_prior(PriorSpec::rademacher(3), 3, rng);
    Matrix theta(5, 3);
    for (int r = 0; r < 5; ++r)
      for (int c = 0; c < 3; ++c) theta(r, c) = rng.normal();
    Vector y = committee_forward(x, theta);
    for (int mu = 0; mu < 5; ++mu) CHECK(y(mu) == committee_ref(x, theta, mu));
    // odd K and continuous weights: flipping X flips every label
    Vector flipped = committee_forward(-x, theta);
    CHECK(flipped == -y);
  }
  SignalMatrix one = SignalMatrix::Ones(2, 1);
  Matrix pos = Matrix::Ones(3, 2);
  CHECK(committee_forward(one, pos) == Vector::Ones(3));
}

TEST_CASE("multilayer composition") {
  const int n = 4;
  Rng rng(5);
  SignalMatrix x0 = sample_prior(PriorSpec::rademacher(1), n, rng);
  Matrix w1 = Matrix::Random(3, n), w2 = Matrix::Random(2, 3);
  KernelPtr id = identity_kernel();
  LayerStack stack = multilayer_forward(x0, {{w1, id}, {w2, id}}, rng);
  CHECK(stack.hidden.size() == 1);
  CHECK((stack.data - w2 * w1 * x0).norm() < 1e-12);

  // Single layer equals the glm channel when the streams agree.
  KernelPtr ns = noisy_sign_kernel(0.2);
  Rng a(99), b(99);
  LayerStack single = multilayer_forward(x0, {{w1, ns}}, a);
  Matrix direct = glm_forward(x0, w1, *ns, b);
  CHECK(single.data == direct);

  // Two steps by hand.
  Rng c(7), d(7);
  LayerStack two = multilayer_forward(x0, {{w1, ns}, {w2, ns}}, c);
  Matrix h = glm_forward(x0, w1, *ns, d);
  Matrix out = glm_forward(SignalMatrix(h), w2, *ns, d);
  CHECK(two.hidden[0] == SignalMatrix(h));
  CHECK(two.data == out);
}

TEST_CASE("side channel") {
  Rng rng(6);
  SnrMatrix snr = test_snr(2, 0.7);
  SignalMatrix x = sample_prior(PriorSpec::rademacher(2), 10, rng);
  SignalMatrix zero = SignalMatrix::Zero(10, 2);
  CHECK((perturb_with_noise(x, snr, zero) - x * snr.sqrt().dense()).norm() < 1e-14);
  auto [y, z] = perturb(x, snr, rng);
  CHECK((y - x * snr.sqrt().dense() - z).norm() < 1e-12);

  SnrMatrix scalar = test_snr(1, 2.0);
  SignalMatrix x1 = SignalMatrix::Ones(3, 1);
  CHECK(perturb_with_noise(x1, scalar, SignalMatrix::Zero(3, 1))(0, 0) == doctest::Approx(std::sqrt(5.0)));

  // vanishing SNR: Y is the noise with unit moments
  const int N = 20000;
  SymMatrix tiny = SymMatrix::identity(1).scaled(1e-16);
  SnrMatrix weak = SnrMatrix::general(tiny);
  SignalMatrix xs = sample_prior(PriorSpec::rademacher(1), N, rng);
  auto [yw, zw] = perturb(xs, weak, rng);
  CHECK(std::abs(yw.mean()) < 3.0 / std::sqrt(N));
  CHECK(std::abs(yw.squaredNorm() / N - 1.0) < 3.0 * std::sqrt(2.0 / N));
  CHECK((yw - zw).norm() < 1e-5);
}

TEST_CASE("draw_instance and with_snr") {
  auto model = spec_of(PriorSpec::rademacher(2), SpikedTensorModel{2});
  Rng r1(10), r2(10);
  QuenchedInstance a = draw_instance(model, 6, test_snr(2, 1.0), r1);
  QuenchedInstance b = draw_instance(model, 6, test_snr(2, 1.0), r2);
  CHECK(a.signal == b.signal);
  CHECK(a.observation.side == b.observation.side);
  QuenchedInstance none = a.with_snr(std::nullopt);
  CHECK_FALSE(none.has_side_channel());
  CHECK(none.observation.side.isZero());
  QuenchedInstance back = none.with_snr(test_snr(2, 1.0));
  CHECK((back.observation.side - a.observation.side).norm() < 1e-14);
  CHECK_THROWS_AS(draw_instance(model, 6, test_snr(1, 1.0), r1), std::invalid_argument);
  CHECK_THROWS_AS(draw_instance(model, 0, std::nullopt, r1), std::invalid_argument);
}

TEST_CASE("log posterior weight") {
  Rng rng(12);
  auto model = spec_of(PriorSpec::rademacher(2), CommitteeModel{});
  SnrMatrix snr = test_snr(2, 0.5);
  QuenchedInstance inst = draw_instance(model, 5, snr, rng);
  QuenchedInstance clean = inst;
  clean.noise.setZero();
  clean = clean.with_snr(snr);
  // x = X and Z = 0: the committee likelihood is 1 and H = -1/2 ||X lambda^{1/2}||^2
  double h = -0.5 * (inst.signal * snr.sqrt().dense()).squaredNorm();
  CHECK(side_hamiltonian(inst.signal, clean) == doctest::Approx(h).epsilon(1e-12));
  CHECK(log_likelihood(inst.signal, clean) == 0.0);
  CHECK(log_posterior_weight(inst.signal, clean) == doctest::Approx(5 * std::log(0.25) - h).epsilon(1e-12));

  // Flip one row until the labels break: weight becomes -inf.
  bool found = false;
  for (int i = 0; i < 5 && !found; ++i) {
    SignalMatrix x = inst.signal;
    x.row(i) *= -1.0;
    if (committee_forward(x, inst.hyper.weights[0]) != committee_forward(inst.signal, inst.hyper.weights[0])) {
      CHECK(log_posterior_weight(x, inst) == -std::numeric_limits<double>::infinity());
      found = true;
    }
  }
  SignalMatrix outside = inst.signal;
  outside(0, 0) = 0.5;
  CHECK(log_posterior_weight(outside, inst) == -std::numeric_limits<double>::infinity());
  CHECK_THROWS_AS(log_prior(SignalMatrix::Ones(4, 2), inst), std::invalid_argument);
}

TEST_CASE("log posterior weight without data is the prior") {
  Rng rng(13);
  auto model = spec_of(PriorSpec::binary(1, 0.75), NoBaseModel{});
  QuenchedInstance inst = draw_instance(model, 3, std::nullopt, rng);
  SignalMatrix x = SignalMatrix::Ones(3, 1);
  x(1, 0) = -1;
  CHECK(log_posterior_weight(x, inst) == doctest::Approx(2 * std::log(0.75) + std::log(0.25)));
}

TEST_CASE("tensor likelihood matches a dense reference and is permutation equivariant") {
  Rng rng(14);
  const int n = 6;
  auto model = spec_of(PriorSpec::rademacher(2), SpikedTensorModel{2});
  QuenchedInstance inst = draw_instance(model, n, test_snr(2, 0.4), rng);
  const Matrix& Y = std::get<SymTensor>(inst.observation.base).dense2();
  SignalMatrix x = sample_prior(PriorSpec::rademacher(2), n, rng);
  double ref = 0.0;
  for (int i = 0; i < n; ++i)
    for (int j = i; j < n; ++j) {
      double m = x.row(i).dot(x.row(j)) / std::sqrt(static_cast<double>(n));
      ref += Y(i, j) * m - 0.5 * m * m;
    }
  CHECK(log_likelihood(x, inst) == doctest::Approx(ref).epsilon(1e-12));

  // Relabel rows consistently in signal, data and candidate.
  std::vector<int> perm(n);
  std::iota(perm.begin(), perm.end(), 0);
  std::reverse(perm.begin(), perm.end());
  std::swap(perm[0], perm[2]);
  QuenchedInstance p = inst;
  SymTensor t(n, 2);
  for (std::size_t e = 0; e < t.size(); ++e) {
    auto tup = t.tuple(e);
    t.set_value(e, Y(perm[tup[0]], perm[tup[1]]));
  }
  p.observation.base = t;
  SignalMatrix xp(n, 2), yp(n, 2);
  for (int i = 0; i < n; ++i) {
    xp.row(i) = x.row(perm[i]);
    yp.row(i) = inst.observation.side.row(perm[i]);
  }
  p.observation.side = yp;
  CHECK(log_posterior_weight(xp, p) == doctest::Approx(log_posterior_weight(x, inst)).epsilon(1e-12));
}

TEST_CASE("side channel contribution separates from the base weight") {
  Rng rng(15);
  auto model = spec_of(PriorSpec::rademacher(1), SpikedTensorModel{3});
  QuenchedInstance inst = draw_instance(model, 5, test_snr(1, 1.0), rng);
  QuenchedInstance base = inst.with_snr(std::nullopt);
  SignalMatrix x = sample_prior(PriorSpec::rademacher(1), 5, rng);
  double diff = log_posterior_weight(x, inst) - log_posterior_weight(x, base);
  CHECK(diff == doctest::Approx(-side_hamiltonian(x, inst)).epsilon(1e-12));
  const double lam = inst.observation.snr->value()(0, 0);
  double h = 0.0;
  for (int i = 0; i < 5; ++i) h += 0.5 * lam * x(i, 0) * x(i, 0) - inst.observation.side(i, 0) * std::sqrt(lam) * x(i, 0);
  CHECK(side_hamiltonian(x, inst) == doctest::Approx(h).epsilon(1e-12));
}

TEST_CASE("multilayer likelihood marginalises the hidden layer") {
  Rng rng(16);
  ModelSpec s;
  s.prior = PriorSpec::rademacher(1);
  MultiLayerModel ml;
  LayerModel l1, l2;
  l1.ratio = 1.0;
  l1.kernel.name = "noisy_sign";
  l1.kernel.flip = 0.2;
  l2.ratio = 1.0;
  l2.kernel.name = "gaussian";
  l2.kernel.sigma = 0.7;
  ml.layers = {l1, l2};
  s.base = ml;
  auto model = make_model(s);
  const int n = 3;
  QuenchedInstance inst = draw_instance(model, n, std::nullopt, rng);
  const Matrix& w1 = inst.hyper.weights[0];
  const Matrix& w2 = inst.hyper.weights[1];
  const Matrix& data = std::get<LayerStack>(inst.observation.base).data;
  KernelPtr k1 = noisy_sign_kernel(0.2);
  KernelPtr k2 = gaussian_kernel(Vector::Ones(1), 0.7);
  SignalMatrix x = sample_prior(PriorSpec::rademacher(1), n, rng);
  double total = 0.0;
  for (int code = 0; code < (1 << n); ++code) {
    SignalMatrix h(n, 1);
    for (int i = 0; i < n; ++i) h(i, 0) = (code >> i) & 1 ? 1.0 : -1.0;
    Matrix a1 = activations(w1, x), a2 = activations(w2, h);
    double lp = 0.0;
    for (int r = 0; r < n; ++r) {
      lp += k1->log_density(h.row(r).transpose(), a1.row(r).transpose());
      lp += k2->log_density(data.row(r).transpose(), a2.row(r).transpose());
    }
    total += std::exp(lp);
  }
  CHECK(log_likelihood(x, inst) == doctest::Approx(std::log(total)).epsilon(1e-10));
}

TEST_CASE("generative prior is normalised over the output alphabet") {
  Rng rng(17);
  ModelSpec s;
  s.prior = PriorSpec::rademacher(1);
  s.base = SpikedTensorModel{2};
  GenerativePrior g;
  g.input_ratio = 1.0;
  g.kernel.name = "noisy_sign";
  g.kernel.flip = 0.1;
  s.generative = g;
  auto model = make_model(s);
  const int n = 3;
  QuenchedInstance inst = draw_instance(model, n, std::nullopt, rng);
  double total = 0.0;
  for (int code = 0; code < (1 << n); ++code) {
    SignalMatrix x(n, 1);
    for (int i = 0; i < n; ++i) x(i, 0) = (code >> i) & 1 ? 1.0 : -1.0;
    total += std::exp(log_prior(x, inst));
  }
  CHECK(total == doctest::Approx(1.0).epsilon(1e-12));
}
