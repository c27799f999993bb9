#include "cinegen/eval/metrics.hpp"

#include <Eigen/Eigenvalues>

#include <cmath>

namespace cinegen::eval {

GaussianStats gaussian_stats(const FeatureSet& fs) {
  const Eigen::Index n = fs.features.rows();
  check(n >= 2, "gaussian_stats: need at least 2 samples");
  check(fs.features.allFinite(), "gaussian_stats: non-finite features");
  GaussianStats s;
  s.mean = fs.features.colwise().mean();
  const MatrixX centered = fs.features.rowwise() - s.mean.transpose();
  s.cov = centered.transpose() * centered / static_cast<double>(n - 1);
  s.cov = 0.5 * (s.cov + s.cov.transpose().eval());
  return s;
}

namespace {

constexpr double kEigClamp = 1e-10;  // sample covariances go rank-deficient

MatrixX psd_sqrt(const MatrixX& m) {
  Eigen::SelfAdjointEigenSolver<MatrixX> es(m);
  check(es.info() == Eigen::Success, "frechet: eigendecomposition failed");
  VectorX ev = es.eigenvalues();
  for (Eigen::Index i = 0; i < ev.size(); ++i)
    ev[i] = ev[i] > kEigClamp ? std::sqrt(ev[i]) : 0.0;
  return es.eigenvectors() * ev.asDiagonal() * es.eigenvectors().transpose();
}

}  // namespace

double frechet_distance(const GaussianStats& a, const GaussianStats& b) {
  check_as<ShapeError>(a.mean.size() == b.mean.size() &&
                           a.cov.rows() == b.cov.rows() &&
                           a.cov.cols() == b.cov.cols(),
                       "frechet_distance: dimension mismatch");
  const double mean_term = (a.mean - b.mean).squaredNorm();

  const MatrixX sqrt_b = psd_sqrt(b.cov);
  MatrixX inner = sqrt_b * a.cov * sqrt_b;
  inner = 0.5 * (inner + inner.transpose().eval());
  Eigen::SelfAdjointEigenSolver<MatrixX> es(inner);
  check(es.info() == Eigen::Success, "frechet: eigendecomposition failed");
  double tr_sqrt = 0.0;
  for (Eigen::Index i = 0; i < es.eigenvalues().size(); ++i) {
    const double ev = es.eigenvalues()[i];
    if (ev > kEigClamp) tr_sqrt += std::sqrt(ev);
  }

  const double d = mean_term + a.cov.trace() + b.cov.trace() - 2.0 * tr_sqrt;
  check(std::isfinite(d), "frechet_distance: non-finite result");
  return d;
}

double clipsim(const std::vector<std::string>& scene_texts,
               const std::vector<Tensor>& clips,
               const audio::TextEmbedClient& text_embedder,
               const audio::VideoEmbedClient& video_embedder) {
  check(scene_texts.size() == clips.size(), "clipsim: list length mismatch");
  check(!clips.empty(), "clipsim: empty input");
  check_as<ShapeError>(text_embedder.dim() == video_embedder.dim(),
                       "clipsim: embedders must share dim");
  double acc = 0.0;
  for (size_t i = 0; i < clips.size(); ++i)
    acc += audio::cosine(text_embedder.embed(scene_texts[i]),
                         video_embedder.embed(clips[i]));
  return acc / static_cast<double>(clips.size());
}

double motion_energy(const Tensor& clip) {
  check_as<ShapeError>(clip.rank() == 4, "motion_energy: expects [F, C, H, W]");
  const Eigen::Index F = clip.dim(0);
  check(F >= 2, "motion_energy: needs at least 2 frames");
  const Eigen::Index per = clip.numel() / F;
  double acc = 0.0;
  for (Eigen::Index f = 0; f + 1 < F; ++f) {
    Eigen::Map<const ArrayX> a(clip.data() + f * per, per);
    Eigen::Map<const ArrayX> b(clip.data() + (f + 1) * per, per);
    acc += (b - a).abs().mean();
  }
  return acc / static_cast<double>(F - 1);
}

FeatureSet stub_features(const std::vector<Tensor>& clips, Eigen::Index dim) {
  check(!clips.empty(), "stub_features: empty clip list");
  const audio::FrameStatsVideoEmbedder embedder(dim);
  FeatureSet fs;
  fs.extractor_id = "stub-frame-stats";
  fs.features = MatrixX(static_cast<Eigen::Index>(clips.size()), dim);
  for (size_t i = 0; i < clips.size(); ++i)
    fs.features.row(static_cast<Eigen::Index>(i)) =
        embedder.embed(clips[i]).values.matrix().transpose();
  return fs;
}

}  // namespace cinegen::eval
