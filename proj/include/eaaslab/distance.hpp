#pragma once

#include <cmath>
#include <string>

#include "eaaslab/errors.hpp"
#include "eaaslab/nn.hpp"

namespace eaaslab {

enum class Metric { l2, l1, cosine };

inline Metric metric_from_name(const std::string& s) {
  if (s == "l2") return Metric::l2;
  if (s == "l1") return Metric::l1;
  if (s == "cosine") return Metric::cosine;
  throw ConfigError("unknown distance metric: " + s);
}

inline std::string metric_name(Metric m) {
  switch (m) {
    case Metric::l2: return "l2";
    case Metric::l1: return "l1";
    case Metric::cosine: return "cosine";
  }
  return "?";
}

// Distance between two feature vectors: Euclidean, sum of absolute
// differences, or minus cosine similarity (range [-1,1]). Optionally returns
// the gradient with respect to v; both metrics are symmetric, so the
// gradient with respect to u is feature_distance(m, v, u, &gu).
template <class T>
T feature_distance(Metric m, const Eigen::Matrix<T, 1, Eigen::Dynamic>& u,
                   const Eigen::Matrix<T, 1, Eigen::Dynamic>& v,
                   Eigen::Matrix<T, 1, Eigen::Dynamic>* grad_v = nullptr) {
  if (u.size() != v.size()) throw PreconditionError("feature_distance: dimension mismatch");
  switch (m) {
    case Metric::l2: {
      Eigen::Matrix<T, 1, Eigen::Dynamic> diff = v - u;
      const T d = diff.norm();
      if (grad_v) {
        if (d > T(0))
          *grad_v = diff / d;
        else
          grad_v->setZero(u.size());
      }
      return d;
    }
    case Metric::l1: {
      Eigen::Matrix<T, 1, Eigen::Dynamic> diff = v - u;
      if (grad_v) *grad_v = diff.array().sign().matrix();
      return diff.array().abs().sum();
    }
    case Metric::cosine: {
      const T nu = u.norm(), nv = v.norm();
      if (nu == T(0) || nv == T(0))
        throw PreconditionError("cosine distance undefined for a zero vector");
      const T c = u.dot(v) / (nu * nv);
      if (grad_v) *grad_v = -(u / (nu * nv) - (c / (nv * nv)) * v);
      return -c;
    }
  }
  throw std::logic_error("unreachable");
}

using RowVecF = Eigen::Matrix<float, 1, Eigen::Dynamic>;

}  // namespace eaaslab
