#pragma once

#include <Eigen/Core>

#include <string>

namespace eaaslab {

using MatF = Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using VecF = Eigen::RowVectorXf;

enum class FeatureSource { direct, eaas };

// N x feature_dim block of feature vectors, as produced by an encoder or
// returned by the service API (possibly defense-perturbed).
struct FeatureBatch {
  MatF vectors;
  FeatureSource source = FeatureSource::direct;
  std::string defense_applied;  // empty = none

  Eigen::Index rows() const { return vectors.rows(); }
  Eigen::Index dim() const { return vectors.cols(); }
  bool all_finite() const { return vectors.allFinite(); }
};

}  // namespace eaaslab
