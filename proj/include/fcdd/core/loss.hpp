#pragma once

#include <cmath>
#include <vector>

#include "fcdd/core/types.hpp"

namespace fcdd {

namespace detail {

/// Numerically stable -log(1 - exp(-a)) for a > 0.
template <typename Scalar>
Scalar neg_log_one_minus_exp_neg(Scalar a) {
  constexpr double kLn2 = 0.6931471805599453;
  if (a > Scalar(kLn2)) {
    return -std::log1p(-std::exp(-a));
  }
  return -std::log(-std::expm1(-a));
}

/// Mean map response, accumulated in row-major cell order.
template <typename Scalar>
Scalar mean_response(const Mat<Scalar>& map) {
  Scalar sum = Scalar(0);
  for (Index x = 0; x < map.rows(); ++x) {
    for (Index y = 0; y < map.cols(); ++y) {
      sum += map(x, y);
    }
  }
  return sum / Scalar(map.size());
}

}  // namespace detail

/// Per-cell smoothed response H(z) = sqrt(|z|^2 + 1) - 1, where z is the
/// channel vector of a receptive-field cell. Quadratic near zero, linear in
/// the tails, and nonnegative everywhere.
template <typename Scalar>
ReceptiveFieldMap<Scalar> pseudo_huber_map(const FeatureVolume<Scalar>& features) {
  detail::require_valid_volume(features);
  const Vec<Scalar> cell = (features.values.rowwise().squaredNorm().array() + Scalar(1))
                               .sqrt()
                               .matrix() -
                           Vec<Scalar>::Ones(features.cells());
  ReceptiveFieldMap<Scalar> map;
  map.image_id = features.image_id;
  map.values.resize(features.rows_u, features.cols_v);
  for (Index x = 0; x < features.rows_u; ++x) {
    for (Index y = 0; y < features.cols_v; ++y) {
      map.values(x, y) = cell(x * features.cols_v + y);
    }
  }
  return map;
}

/// One-sample objective on a response map. Normal samples (label 0) pay the
/// mean response A; anomalous samples (label 1) pay -log(1 - exp(-A)), with
/// A clamped to at least cfg.stability_floor so the log stays finite.
template <typename Scalar>
Scalar huber_bce_loss(const ReceptiveFieldMap<Scalar>& map, int label,
                      const SVDDConfig<Scalar>& cfg) {
  detail::require_valid_map(map);
  detail::require_label(label);
  if (cfg.stability_floor <= Scalar(0)) {
    throw InvalidInputError("stability_floor must be positive");
  }
  const Scalar mean = detail::mean_response(map.values);
  if (label == 0) {
    return mean;
  }
  const Scalar clamped = std::max(mean, cfg.stability_floor);
  return detail::neg_log_one_minus_exp_neg(clamped);
}

/// Spatial one-class objective over a batch: the arithmetic mean of
/// huber_bce_loss over the batch's samples.
template <typename Scalar>
Scalar fcdd_spatial_loss(const LabeledSampleBatch<Scalar>& batch,
                         const SVDDConfig<Scalar>& cfg) {
  if (batch.features.empty()) {
    throw InvalidInputError("batch is empty");
  }
  if (batch.features.size() != batch.labels.size()) {
    throw InvalidInputError("batch features and labels differ in length");
  }
  const auto& first = batch.features.front();
  Scalar sum = Scalar(0);
  for (std::size_t i = 0; i < batch.features.size(); ++i) {
    const auto& volume = batch.features[i];
    if (volume.rows_u != first.rows_u || volume.cols_v != first.cols_v ||
        volume.channels() != first.channels()) {
      throw InvalidInputError("batch volumes do not share one shape");
    }
    sum += huber_bce_loss(pseudo_huber_map(volume), batch.labels[i], cfg);
  }
  return sum / Scalar(batch.features.size());
}

/// Image-level baseline objective on embedding vectors: each embedding is
/// measured against the hypersphere center (zero when cfg.center is empty).
template <typename Scalar>
Scalar deep_svdd_loss(const std::vector<Vec<Scalar>>& embeddings,
                      const std::vector<int>& labels,
                      const SVDDConfig<Scalar>& cfg) {
  if (embeddings.empty() || embeddings.size() != labels.size()) {
    throw InvalidInputError("embeddings and labels must be nonempty and equal length");
  }
  if (cfg.stability_floor <= Scalar(0)) {
    throw InvalidInputError("stability_floor must be positive");
  }
  const Index dim = embeddings.front().size();
  if (cfg.center.size() != 0 && cfg.center.size() != dim) {
    throw InvalidInputError("center length does not match embedding dimension");
  }
  Scalar sum = Scalar(0);
  for (std::size_t i = 0; i < embeddings.size(); ++i) {
    detail::require_label(labels[i]);
    const auto& e = embeddings[i];
    if (e.size() != dim) {
      throw InvalidInputError("embeddings differ in dimension");
    }
    if (!e.allFinite()) {
      throw InvalidInputError("embedding contains non-finite entries");
    }
    const Scalar sq = cfg.center.size() == 0 ? e.squaredNorm()
                                             : (e - cfg.center).squaredNorm();
    const Scalar h = std::sqrt(sq + Scalar(1)) - Scalar(1);
    if (labels[i] == 0) {
      sum += h;
    } else {
      sum += detail::neg_log_one_minus_exp_neg(std::max(h, cfg.stability_floor));
    }
  }
  return sum / Scalar(embeddings.size());
}

/// Image anomaly score: the sum of all receptive-field responses,
/// accumulated in row-major cell order.
template <typename Scalar>
Scalar anomaly_score(const ReceptiveFieldMap<Scalar>& map) {
  detail::require_valid_map(map);
  Scalar sum = Scalar(0);
  for (Index x = 0; x < map.values.rows(); ++x) {
    for (Index y = 0; y < map.values.cols(); ++y) {
      sum += map.values(x, y);
    }
  }
  return sum;
}

/// Exact gradient of fcdd_spatial_loss with respect to every feature entry.
/// Returns one (u*v) x C matrix per sample, aligned with FeatureVolume rows.
///
/// With A_i the mean response of sample i over u*v cells and n the batch
/// size, the loss term depends on A_i alone, so
///   d loss / d z = (d loss / d A_i) * (1 / (u*v)) * z / sqrt(|z|^2 + 1)
/// where d loss / d A_i is 1/n for normal samples and -1/(n * (exp(A_i)-1))
/// for anomalous ones. A clamped anomalous mean has zero gradient.
template <typename Scalar>
std::vector<Mat<Scalar>> loss_gradients(const LabeledSampleBatch<Scalar>& batch,
                                        const SVDDConfig<Scalar>& cfg) {
  if (batch.features.empty() || batch.features.size() != batch.labels.size()) {
    throw InvalidInputError("batch is empty or mislabeled");
  }
  const Scalar n = Scalar(batch.features.size());
  std::vector<Mat<Scalar>> grads;
  grads.reserve(batch.features.size());
  for (std::size_t i = 0; i < batch.features.size(); ++i) {
    const auto& volume = batch.features[i];
    detail::require_valid_volume(volume);
    detail::require_label(batch.labels[i]);
    const Index cells = volume.cells();
    const Vec<Scalar> root =
        (volume.values.rowwise().squaredNorm().array() + Scalar(1)).sqrt();
    Scalar dA;
    if (batch.labels[i] == 0) {
      dA = Scalar(1) / n;
    } else {
      Scalar mean = Scalar(0);
      for (Index r = 0; r < cells; ++r) mean += root(r) - Scalar(1);
      mean /= Scalar(cells);
      if (mean < cfg.stability_floor) {
        dA = Scalar(0);  // clamp active: loss locally constant
      } else {
        dA = Scalar(-1) / (n * std::expm1(mean));
      }
    }
    const Scalar scale = dA / Scalar(cells);
    grads.push_back(volume.values.array().colwise() *
                    (scale / root.array()));
  }
  return grads;
}

}  // namespace fcdd
