#pragma once

// The three-level graphical model: parameters, replicate latents, forward
// simulation, the implied moments and correlations, and the extended
// (data-augmented) log-likelihood.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "qvfgm/common.hpp"
#include "qvfgm/family.hpp"

namespace qvfgm {

struct ModelParams {
  FamilyKind family = FamilyKind::Normal;
  double s0 = 0.0;
  double c0 = 1.0;
  /// Symmetric, zero diagonal, nonnegative. Integer valued for beta and
  /// inverse beta.
  Eigen::MatrixXd edge_intensity;

  int nodes() const { return static_cast<int>(edge_intensity.rows()); }

  /// c0 + sum_{k != j} c_jk
  double c_star(int j) const { return c0 + edge_intensity.row(j).sum(); }

  void validate() const {
    const auto& c = edge_intensity;
    if (c.rows() != c.cols() || c.rows() < 2) {
      throw std::invalid_argument("edge intensity matrix must be square with at least 2 nodes");
    }
    if (!admissible(family, s0, c0)) {
      throw DomainError("inadmissible (s0, c0) for family " + std::string(to_string(family)));
    }
    for (int j = 0; j < c.rows(); ++j) {
      if (c(j, j) != 0.0) throw std::invalid_argument("edge intensity diagonal must be zero");
      for (int k = j + 1; k < c.cols(); ++k) {
        if (c(j, k) != c(k, j)) throw std::invalid_argument("edge intensity matrix must be symmetric");
        if (!(c(j, k) >= 0.0) || !std::isfinite(c(j, k))) {
          throw std::invalid_argument("edge intensities must be finite and nonnegative");
        }
        if (integer_intensity(family) && std::floor(c(j, k)) != c(j, k)) {
          throw DomainError("beta / inverse beta edge intensities must be integers");
        }
      }
    }
  }
};

/// Builds a symmetric p x p intensity matrix with every off-diagonal entry set
/// to `value`.
inline Eigen::MatrixXd uniform_intensity(int p, double value) {
  Eigen::MatrixXd c = Eigen::MatrixXd::Constant(p, p, value);
  c.diagonal().setZero();
  return c;
}

inline void set_edge(Eigen::MatrixXd& c, int j, int k, double value) {
  c(j, k) = value;
  c(k, j) = value;
}

struct ReplicateLatents {
  double w = 0.0;
  /// Symmetric link matrix; the diagonal is unused and kept at zero.
  Eigen::MatrixXd links;
};

struct Dataset {
  Eigen::MatrixXd y;  // replicates x nodes
  std::vector<std::string> node_names;

  int replicates() const { return static_cast<int>(y.rows()); }
  int nodes() const { return static_cast<int>(y.cols()); }

  void validate(FamilyKind family) const {
    if (y.rows() < 1 || y.cols() < 2) throw std::invalid_argument("dataset needs n >= 1 and p >= 2");
    if (!node_names.empty() && static_cast<int>(node_names.size()) != y.cols()) {
      throw std::invalid_argument("node name count does not match column count");
    }
    for (int i = 0; i < y.rows(); ++i) {
      for (int j = 0; j < y.cols(); ++j) {
        if (!in_mean_space(family, y(i, j))) {
          throw DomainError("observation at row " + std::to_string(i + 1) + ", column " +
                            std::to_string(j + 1) + " outside the " + std::string(to_string(family)) +
                            " support");
        }
      }
    }
  }
};

inline std::vector<std::string> default_node_names(int p) {
  std::vector<std::string> names;
  for (int j = 0; j < p; ++j) names.push_back("Y" + std::to_string(j + 1));
  return names;
}

struct Simulation {
  Dataset data;
  std::vector<ReplicateLatents> latents;
};

namespace detail {

inline void simulate_replicate(const ModelParams& params, Rng& rng, ReplicateLatents& latent,
                               Eigen::Ref<Eigen::RowVectorXd, 0, Eigen::InnerStride<>> y) {
  const int p = params.nodes();
  const auto f = params.family;
  latent.w = sample_w(f, params.s0, params.c0, rng);
  latent.links = Eigen::MatrixXd::Zero(p, p);
  for (int j = 0; j < p; ++j) {
    for (int k = j + 1; k < p; ++k) {
      const double s = sample_link(f, latent.w, params.edge_intensity(j, k), rng);
      latent.links(j, k) = s;
      latent.links(k, j) = s;
    }
  }
  for (int j = 0; j < p; ++j) {
    y(j) = sample_w(f, params.s0 + latent.links.row(j).sum(), params.c_star(j), rng);
  }
}

}  // namespace detail

/// Forward simulation. Replicate i uses sub-stream (seed, i), so the result
/// does not depend on the number of worker threads.
inline Simulation simulate(const ModelParams& params, int n, std::uint64_t seed, unsigned threads = 0) {
  params.validate();
  if (n < 1) throw std::invalid_argument("simulate: n must be at least 1");
  Simulation out;
  out.data.y.resize(n, params.nodes());
  out.data.node_names = default_node_names(params.nodes());
  out.latents.resize(static_cast<std::size_t>(n));
  if (threads == 0) threads = std::max(1u, std::thread::hardware_concurrency());
  threads = std::min<unsigned>(threads, static_cast<unsigned>(n));

  auto work = [&](int begin, int end) {
    for (int i = begin; i < end; ++i) {
      Rng rng = substream(seed, static_cast<std::uint64_t>(i));
      detail::simulate_replicate(params, rng, out.latents[static_cast<std::size_t>(i)], out.data.y.row(i));
    }
  };
  if (threads <= 1) {
    work(0, n);
    return out;
  }
  std::vector<std::thread> pool;
  std::vector<std::exception_ptr> errors(threads);
  const int chunk = (n + static_cast<int>(threads) - 1) / static_cast<int>(threads);
  for (unsigned t = 0; t < threads; ++t) {
    const int begin = static_cast<int>(t) * chunk;
    const int end = std::min(n, begin + chunk);
    pool.emplace_back([&, t, begin, end] {
      try {
        work(begin, end);
      } catch (...) {
        errors[t] = std::current_exception();
      }
    });
  }
  for (auto& th : pool) th.join();
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
  return out;
}

struct Moments {
  double mean;
  double variance;
};

/// Every node shares the anchor's marginal: mean s0/c0 and variance
/// V(s0/c0) / (c0 - nu2).
inline Moments marginal_moments(const ModelParams& params) {
  params.validate();
  const double nu2 = variance_coefficients(params.family).nu2;
  if (params.c0 <= nu2) {
    throw InfiniteVarianceError("marginal variance is infinite when c0 <= nu2");
  }
  const double mean = params.s0 / params.c0;
  return {mean, variance_function(params.family, mean) / (params.c0 - nu2)};
}

inline double pairwise_correlation(const ModelParams& params, int j, int k) {
  const int p = params.nodes();
  if (j == k || j < 0 || k < 0 || j >= p || k >= p) {
    throw std::out_of_range("pairwise_correlation: invalid node pair");
  }
  const auto& c = params.edge_intensity;
  const double sj = c.row(j).sum();
  const double sk = c.row(k).sum();
  return (params.c0 * c(j, k) + sj * sk) / ((params.c0 + sj) * (params.c0 + sk));
}

inline Eigen::MatrixXd correlation_matrix(const ModelParams& params) {
  params.validate();
  const int p = params.nodes();
  Eigen::MatrixXd r = Eigen::MatrixXd::Identity(p, p);
  for (int j = 0; j < p; ++j) {
    for (int k = j + 1; k < p; ++k) {
      r(j, k) = r(k, j) = pairwise_correlation(params, j, k);
    }
  }
  return r;
}

struct PrecisionCheck {
  double determinant_factor;
  Eigen::Matrix3d precision;
};

/// Closed-form 3 x 3 precision from the cofactor expansion of the
/// correlation matrix scaled by 1/c0. Verification only.
inline PrecisionCheck precision_check_3x3(const ModelParams& params) {
  if (params.nodes() != 3) throw std::invalid_argument("precision_check_3x3 requires p = 3");
  const Eigen::MatrixXd r = correlation_matrix(params);
  const double r12 = r(0, 1), r13 = r(0, 2), r23 = r(1, 2);
  const double d = 1.0 + 2.0 * r12 * r13 * r23 - r12 * r12 - r13 * r13 - r23 * r23;
  if (d <= 1e-12) throw DomainError("correlation matrix is singular (D <= 1e-12)");
  Eigen::Matrix3d cof;
  cof << 1.0 - r23 * r23, r23 * r13 - r12, r12 * r23 - r13,  //
      r23 * r13 - r12, 1.0 - r13 * r13, r12 * r13 - r23,     //
      r12 * r23 - r13, r12 * r13 - r23, 1.0 - r12 * r12;
  return {d, (params.c0 / d) * cof};
}

/// Row sums of a replicate's link matrix: s*_j - s0.
inline Eigen::VectorXd link_sums(const ReplicateLatents& latent) { return latent.links.rowwise().sum(); }

/// log f(y, s, w | s0, c0, c): node terms, link terms (j < k) and the anchor
/// term summed over replicates. Any support violation gives -infinity.
inline double log_extended_likelihood(const ModelParams& params, const Dataset& data,
                                      const std::vector<ReplicateLatents>& latents) {
  const int p = params.nodes();
  if (data.nodes() != p || static_cast<int>(latents.size()) != data.replicates()) {
    throw std::invalid_argument("log_extended_likelihood: shape mismatch");
  }
  const auto f = params.family;
  if (!admissible(f, params.s0, params.c0)) return kNegInf;
  Eigen::VectorXd c_star(p);
  for (int j = 0; j < p; ++j) c_star(j) = params.c_star(j);

  double total = 0.0;
  try {
    for (int i = 0; i < data.replicates(); ++i) {
      const auto& lat = latents[static_cast<std::size_t>(i)];
      if (!in_mean_space(f, lat.w)) return kNegInf;
      for (int j = 0; j < p; ++j) {
        for (int k = j + 1; k < p; ++k) {
          const double s = lat.links(j, k);
          const double c = params.edge_intensity(j, k);
          if (lat.links(k, j) != s) return kNegInf;
          if (c > 0.0 && !in_link_support(f, s)) return kNegInf;
          if (f == FamilyKind::Beta && s > c) return kNegInf;
          total += log_link_density(f, s, lat.w, c);
        }
      }
      for (int j = 0; j < p; ++j) {
        const double s_star = params.s0 + lat.links.row(j).sum();
        if (!admissible(f, s_star, c_star(j)) || !in_mean_space(f, data.y(i, j))) return kNegInf;
        total += log_w_density(f, data.y(i, j), s_star, c_star(j));
      }
      total += log_w_density(f, lat.w, params.s0, params.c0);
    }
  } catch (const DomainError&) {
    return kNegInf;
  }
  return std::isnan(total) ? kNegInf : total;
}

}  // namespace qvfgm

namespace qvfgm {

/// Five regions where only (1,3), (1,5) and (3,4) are not neighbours:
/// neighbours get intensity e^2, non-neighbours e^-2, with s0 = 6, c0 = 10
/// under the inverse gamma family.
inline ModelParams five_region_params() {
  ModelParams params;
  params.family = FamilyKind::InverseGamma;
  params.s0 = 6.0;
  params.c0 = 10.0;
  params.edge_intensity = uniform_intensity(5, std::exp(2.0));
  for (auto [j, k] : {std::pair{0, 2}, std::pair{0, 4}, std::pair{2, 3}}) set_edge(params.edge_intensity, j, k, std::exp(-2.0));
  return params;
}

}  // namespace qvfgm
