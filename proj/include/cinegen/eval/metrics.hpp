#pragma once

#include <string>
#include <vector>

#include "cinegen/audio/embeddings.hpp"
#include "cinegen/core/tensor.hpp"

namespace cinegen::eval {

/// Headline scores reported by the full-scale system this desk-scale pipeline
/// mirrors. Stub-extractor results are NOT comparable to these; they are kept
/// only as reference constants.
inline constexpr double kReferenceFvd = 317.52;
inline constexpr double kReferenceClipSim = 0.3058;

struct FeatureSet {
  MatrixX features;  // [n_samples, feat_dim]
  std::string extractor_id;
};

struct GaussianStats {
  VectorX mean;
  MatrixX cov;  // unbiased sample covariance
};

/// Sample mean and unbiased covariance; needs at least two rows.
GaussianStats gaussian_stats(const FeatureSet& fs);

/// ||mu_a - mu_b||^2 + Tr(Sa + Sb - 2 (Sa Sb)^{1/2}), the matrix square root
/// taken by symmetric eigendecomposition of sqrt(Sb) Sa sqrt(Sb) with
/// negative eigenvalues clamped to zero.
double frechet_distance(const GaussianStats& a, const GaussianStats& b);

/// Mean cosine between per-pair text and video embeddings; in [-1, 1].
double clipsim(const std::vector<std::string>& scene_texts,
               const std::vector<Tensor>& clips,
               const audio::TextEmbedClient& text_embedder,
               const audio::VideoEmbedClient& video_embedder);

/// Mean absolute inter-frame difference of a clip [F, C, H, W]; frames >= 2.
double motion_energy(const Tensor& clip);

/// Builds a feature set from clips with the stub video embedder.
FeatureSet stub_features(const std::vector<Tensor>& clips, Eigen::Index dim);

}  // namespace cinegen::eval
