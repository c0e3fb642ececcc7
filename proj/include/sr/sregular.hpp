#pragma once

#include <string>

#include "sr/rng.hpp"
#include "sr/tape.hpp"

namespace sr {

// How the hidden state is pushed through the centroids after each cell step.
enum class TransitionMode { Sampled, SoftArgmax, Gumbel, Mixture };

const char* transition_mode_name(TransitionMode m);
TransitionMode transition_mode_from_name(const std::string& name);

struct SRConfig {
  int k = 0;          // number of centroids
  double tau = 1.0;   // temperature, > 0
  TransitionMode mode = TransitionMode::Mixture;
  Mat centroids;      // d x k, learnable
};

// Centroids uniform in [-0.5, 0.5], column per centroid, row-major draw order.
Mat init_centroids(int d, int k, Rng& rng);

// Max-subtracted softmax of a score vector.
Vec stable_softmax(const Vec& scores);

// First index achieving the maximum (ties resolve to the lowest index).
int argmax_lowest(const Vec& v);

// alpha_i = exp((u . s_i)/tau) / sum_j exp((u . s_j)/tau)
Vec transition_distribution(const SRConfig& c, const Vec& u);

struct Transition {
  Vec h;      // next hidden state
  int index;  // centroid picked / argmax
};

// One inverse-CDF draw against alpha; h is bit-equal to the centroid column.
Transition transition_sampled(const SRConfig& c, const Vec& alpha, Rng& rng);

// Mixture at the configured temperature plus the argmax index; approaches the
// argmax centroid as tau -> 0.
Transition transition_soft_argmax(const SRConfig& c, const Vec& u);

struct GumbelTransition {
  Vec h;
  int index;  // argmax_i(score_i + g_i)
  Vec alpha;  // softmax((scores + g)/tau)
};

// Gumbel noise g = -log(-log(U)), U clamped to (1e-12, 1 - 1e-12).
Vec draw_gumbel_noise(int k, Rng& rng);
GumbelTransition transition_gumbel(const SRConfig& c, const Vec& u, Rng& rng);
// Test hook / deterministic variant: caller supplies the noise vector.
GumbelTransition transition_gumbel_with_noise(const SRConfig& c, const Vec& u, const Vec& noise);

// h = sum_i alpha_i s_i
Vec transition_mixture(const SRConfig& c, const Vec& alpha);

// --- graph builders ---------------------------------------------------------

// centroids^T u, the pre-temperature scores.
Expr sr_scores(Graph& g, Expr centroids, Expr u);
Expr sr_alpha_from_scores(Graph& g, Expr scores, double tau);
Expr sr_alpha(Graph& g, Expr centroids, Expr u, double tau);
// softmax((centroids^T u + noise)/tau); noise enters as a constant node.
Expr sr_alpha_gumbel(Graph& g, Expr centroids, Expr u, const Vec& noise, double tau);
Expr sr_mixture(Graph& g, Expr centroids, Expr alpha);

}  // namespace sr
