#include "sr/sregular.hpp"

#include <cmath>
#include <stdexcept>

namespace sr {

const char* transition_mode_name(TransitionMode m) {
  switch (m) {
    case TransitionMode::Sampled: return "sampled";
    case TransitionMode::SoftArgmax: return "soft_argmax";
    case TransitionMode::Gumbel: return "gumbel";
    case TransitionMode::Mixture: return "mixture";
  }
  return "?";
}

TransitionMode transition_mode_from_name(const std::string& name) {
  if (name == "sampled") return TransitionMode::Sampled;
  if (name == "soft_argmax") return TransitionMode::SoftArgmax;
  if (name == "gumbel") return TransitionMode::Gumbel;
  if (name == "mixture") return TransitionMode::Mixture;
  throw std::invalid_argument("unknown transition mode '" + name + "'");
}

Mat init_centroids(int d, int k, Rng& rng) {
  if (d <= 0 || k <= 0) throw std::invalid_argument("init_centroids: d and k must be positive");
  Mat s(d, k);
  for (int i = 0; i < d; ++i)
    for (int j = 0; j < k; ++j) s(i, j) = rng.uniform(-0.5, 0.5);
  return s;
}

Vec stable_softmax(const Vec& scores) {
  double m = scores.maxCoeff();
  Eigen::ArrayXd e = (scores.array() - m).exp();
  return (e / e.sum()).matrix();
}

int argmax_lowest(const Vec& v) {
  int best = 0;
  for (int i = 1; i < v.size(); ++i)
    if (v(i) > v(best)) best = i;
  return best;
}

namespace {

void check_config(const SRConfig& c, const Vec& u) {
  if (c.tau <= 0.0) throw std::invalid_argument("transition: tau must be > 0");
  if (c.k <= 0 || c.centroids.cols() != c.k)
    throw std::invalid_argument("transition: centroid count and k disagree");
  if (c.centroids.rows() != u.size())
    throw std::invalid_argument("transition: centroid dimension and u disagree");
}

void check_alpha(const SRConfig& c, const Vec& alpha) {
  if (c.tau <= 0.0) throw std::invalid_argument("transition: tau must be > 0");
  if (alpha.size() != c.k || c.centroids.cols() != c.k)
    throw std::invalid_argument("transition: alpha length and k disagree");
}

int inverse_cdf(const Vec& alpha, double u) {
  double acc = 0.0;
  for (int i = 0; i < alpha.size(); ++i) {
    acc += alpha(i);
    if (u < acc) return i;
  }
  return static_cast<int>(alpha.size()) - 1;
}

}  // namespace

Vec transition_distribution(const SRConfig& c, const Vec& u) {
  check_config(c, u);
  Vec scores = c.centroids.transpose() * u;
  return stable_softmax(scores / c.tau);
}

Transition transition_sampled(const SRConfig& c, const Vec& alpha, Rng& rng) {
  check_alpha(c, alpha);
  int j = inverse_cdf(alpha, rng.uniform());
  return Transition{c.centroids.col(j), j};
}

Transition transition_soft_argmax(const SRConfig& c, const Vec& u) {
  Vec alpha = transition_distribution(c, u);
  return Transition{c.centroids * alpha, argmax_lowest(alpha)};
}

Vec draw_gumbel_noise(int k, Rng& rng) {
  Vec g(k);
  for (int i = 0; i < k; ++i) {
    double u = rng.uniform();
    u = std::min(std::max(u, 1e-12), 1.0 - 1e-12);
    g(i) = -std::log(-std::log(u));
  }
  return g;
}

GumbelTransition transition_gumbel(const SRConfig& c, const Vec& u, Rng& rng) {
  return transition_gumbel_with_noise(c, u, draw_gumbel_noise(c.k, rng));
}

GumbelTransition transition_gumbel_with_noise(const SRConfig& c, const Vec& u, const Vec& noise) {
  check_config(c, u);
  if (noise.size() != c.k)
    throw std::invalid_argument("transition_gumbel: noise length and k disagree");
  Vec perturbed = (c.centroids.transpose() * u) + noise;
  GumbelTransition t;
  t.alpha = stable_softmax(perturbed / c.tau);
  t.index = argmax_lowest(perturbed);
  t.h = c.centroids * t.alpha;
  return t;
}

Vec transition_mixture(const SRConfig& c, const Vec& alpha) {
  check_alpha(c, alpha);
  return c.centroids * alpha;
}

Expr sr_scores(Graph& g, Expr centroids, Expr u) {
  (void)g;
  return matmul(transpose(centroids), u);
}

Expr sr_alpha_from_scores(Graph& g, Expr scores, double tau) {
  (void)g;
  if (tau <= 0.0) throw std::invalid_argument("sr_alpha: tau must be > 0");
  return softmax(scale(scores, 1.0 / tau));
}

Expr sr_alpha(Graph& g, Expr centroids, Expr u, double tau) {
  return sr_alpha_from_scores(g, sr_scores(g, centroids, u), tau);
}

Expr sr_alpha_gumbel(Graph& g, Expr centroids, Expr u, const Vec& noise, double tau) {
  if (tau <= 0.0) throw std::invalid_argument("sr_alpha_gumbel: tau must be > 0");
  Expr scores = sr_scores(g, centroids, u);
  if (noise.size() != scores.rows())
    throw std::invalid_argument("sr_alpha_gumbel: noise length and k disagree");
  Expr noisy = scores + g.constant(noise);
  return sr_alpha_from_scores(g, noisy, tau);
}

Expr sr_mixture(Graph& g, Expr centroids, Expr alpha) {
  (void)g;
  return matmul(centroids, alpha);
}

}  // namespace sr
