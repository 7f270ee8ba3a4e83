#pragma once

#include <Eigen/Core>

#include <string>
#include <vector>

#include "fcdd/util/errors.hpp"

namespace fcdd {

using Index = Eigen::Index;

template <typename Scalar>
using Mat = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

template <typename Scalar>
using Vec = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

/// Backbone output for one image: a u x v grid of C-channel activations.
/// Stored as a (u*v) x C matrix; spatial cell (x, y) maps to row x*v + y,
/// so rows enumerate cells in row-major order and row r is the channel
/// vector of one receptive-field cell.
template <typename Scalar>
struct FeatureVolume {
  Index rows_u = 0;
  Index cols_v = 0;
  Mat<Scalar> values;  // (u*v) x C
  std::string image_id;

  Index channels() const { return values.cols(); }
  Index cells() const { return rows_u * cols_v; }

  bool shape_valid() const {
    return rows_u >= 1 && cols_v >= 1 && values.cols() >= 1 &&
           values.rows() == rows_u * cols_v;
  }
};

/// Per-cell nonnegative responses over the u x v receptive field.
template <typename Scalar>
struct ReceptiveFieldMap {
  Mat<Scalar> values;  // u x v
  std::string image_id;
};

/// A batch of feature volumes with 0 (normal) / 1 (anomalous) labels.
template <typename Scalar>
struct LabeledSampleBatch {
  std::vector<FeatureVolume<Scalar>> features;
  std::vector<int> labels;
};

/// Hypersphere configuration for the data-description losses. An empty
/// center means the zero vector. stability_floor clamps the mean response
/// inside the anomalous log term away from its singularity at zero.
template <typename Scalar>
struct SVDDConfig {
  Vec<Scalar> center;
  Scalar stability_floor = Scalar(1e-6);
};

namespace detail {

template <typename Scalar>
void require_valid_volume(const FeatureVolume<Scalar>& volume) {
  if (!volume.shape_valid()) {
    throw InvalidInputError("feature volume has invalid shape");
  }
  if (!volume.values.allFinite()) {
    throw InvalidInputError("feature volume contains non-finite entries");
  }
}

template <typename Scalar>
void require_valid_map(const ReceptiveFieldMap<Scalar>& map) {
  if (map.values.size() == 0) {
    throw InvalidInputError("receptive-field map is empty");
  }
  if (!map.values.allFinite()) {
    throw InvalidInputError("receptive-field map contains non-finite entries");
  }
  if ((map.values.array() < Scalar(0)).any()) {
    throw InvalidInputError("receptive-field map contains negative entries");
  }
}

inline void require_label(int label) {
  if (label != 0 && label != 1) {
    throw InvalidInputError("label must be 0 (normal) or 1 (anomalous)");
  }
}

}  // namespace detail

}  // namespace fcdd
