#include "mmselab/kernels.hpp"

#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>

namespace mmselab {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

double flip_log_prob(bool agree, double flip) {
  if (agree) return std::log1p(-flip);
  return flip > 0.0 ? std::log(flip) : kNegInf;
}

void check_flip(double flip) {
  if (!(flip >= 0.0 && flip < 0.5)) throw std::invalid_argument("kernel flip probability must be in [0, 0.5)");
}

class CommitteeKernel final : public OutputKernel {
 public:
  explicit CommitteeKernel(double flip) : flip_(flip) { check_flip(flip); }

  std::string name() const override { return "committee"; }
  int out_dim(int) const override { return 1; }
  bool deterministic() const override { return flip_ == 0.0; }

  Vector sample(const Vector& a, Rng& rng) const override {
    double y = vote(a);
    if (flip_ > 0.0 && rng.bernoulli(flip_)) y = -y;
    return Vector::Constant(1, y);
  }

  double log_density(const Vector& y, const Vector& a) const override {
    return flip_log_prob(y(0) == vote(a), flip_);
  }

  std::vector<Vector> finite_outputs(int) const override { return {Vector::Constant(1, -1.0), Vector::Constant(1, 1.0)}; }

 private:
  static double vote(const Vector& a) {
    double s = 0.0;
    for (Eigen::Index k = 0; k < a.size(); ++k) s += sign_pos(a(k));
    return sign_pos(s);
  }

  double flip_;
};

class NoisySignKernel final : public OutputKernel {
 public:
  explicit NoisySignKernel(double flip) : flip_(flip) { check_flip(flip); }

  std::string name() const override { return "noisy_sign"; }
  int out_dim(int K) const override { return K; }
  bool deterministic() const override { return flip_ == 0.0; }

  Vector sample(const Vector& a, Rng& rng) const override {
    Vector y(a.size());
    for (Eigen::Index k = 0; k < a.size(); ++k) {
      y(k) = sign_pos(a(k));
      if (flip_ > 0.0 && rng.bernoulli(flip_)) y(k) = -y(k);
    }
    return y;
  }

  double log_density(const Vector& y, const Vector& a) const override {
    double lp = 0.0;
    for (Eigen::Index k = 0; k < a.size(); ++k) lp += flip_log_prob(y(k) == sign_pos(a(k)), flip_);
    return lp;
  }

  std::vector<Vector> finite_outputs(int K) const override {
    std::vector<Vector> out;
    for (int code = 0; code < (1 << K); ++code) {
      Vector v(K);
      for (int k = 0; k < K; ++k) v(k) = ((code >> k) & 1) ? 1.0 : -1.0;
      out.push_back(v);
    }
    return out;
  }

 private:
  double flip_;
};

class GaussianKernel final : public OutputKernel {
 public:
  GaussianKernel(Vector readout, double sigma) : readout_(std::move(readout)), sigma_(sigma) {
    if (!(sigma > 0.0)) throw std::invalid_argument("gaussian kernel: sigma must be positive");
  }

  std::string name() const override { return "gaussian"; }
  int out_dim(int) const override { return 1; }
  bool deterministic() const override { return false; }

  Vector sample(const Vector& a, Rng& rng) const override {
    return Vector::Constant(1, w(a.size()).dot(a) + sigma_ * rng.normal());
  }

  double log_density(const Vector& y, const Vector& a) const override {
    double r = (y(0) - w(a.size()).dot(a)) / sigma_;
    return -0.5 * r * r - std::log(sigma_) - 0.5 * std::log(2.0 * std::numbers::pi);
  }

 private:
  Vector w(Eigen::Index K) const {
    if (readout_.size() == 0) return Vector::Ones(K);
    if (readout_.size() != K) throw std::invalid_argument("gaussian kernel: readout dimension mismatch");
    return readout_;
  }

  Vector readout_;
  double sigma_;
};

class IdentityKernel final : public OutputKernel {
 public:
  std::string name() const override { return "identity"; }
  int out_dim(int K) const override { return K; }
  bool deterministic() const override { return true; }
  Vector sample(const Vector& a, Rng&) const override { return a; }
  double log_density(const Vector& y, const Vector& a) const override {
    double tol = 1e-9 * (1.0 + a.cwiseAbs().maxCoeff());
    return (y - a).cwiseAbs().maxCoeff() <= tol ? 0.0 : kNegInf;
  }
};

}  // namespace

KernelPtr committee_kernel(double flip) { return std::make_shared<CommitteeKernel>(flip); }
KernelPtr noisy_sign_kernel(double flip) { return std::make_shared<NoisySignKernel>(flip); }
KernelPtr gaussian_kernel(Vector readout, double sigma) { return std::make_shared<GaussianKernel>(std::move(readout), sigma); }
KernelPtr identity_kernel() { return std::make_shared<IdentityKernel>(); }

KernelPtr make_kernel(const KernelSpec& spec, int K) {
  if (spec.name == "committee") return committee_kernel(spec.flip);
  if (spec.name == "noisy_sign") return noisy_sign_kernel(spec.flip);
  if (spec.name == "identity") return identity_kernel();
  if (spec.name == "gaussian") {
    Vector w;
    if (!spec.readout.empty()) {
      if (static_cast<int>(spec.readout.size()) != K) throw std::invalid_argument("gaussian kernel: readout must have K entries");
      w = Eigen::Map<const Vector>(spec.readout.data(), K);
    }
    return gaussian_kernel(w, spec.sigma);
  }
  throw std::invalid_argument("unknown kernel '" + spec.name + "'");
}

}  // namespace mmselab
