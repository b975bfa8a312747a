#include "trgan/svc.hpp"

#include <Eigen/SVD>

namespace trgan {

nn::Tensor singular_value_clip(const nn::Tensor& weight) {
  if (weight.rank() < 2) return weight;
  using Mat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
  const int rows = weight.dim(0);
  const int cols = static_cast<int>(weight.size()) / rows;
  Eigen::Map<const Mat> w(weight.ptr(), rows, cols);
  Eigen::JacobiSVD<Mat> svd(w, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const auto& sv = svd.singularValues();
  if (sv.size() == 0 || sv.maxCoeff() <= 1.0) return weight;

  const Eigen::VectorXd capped = sv.cwiseMin(1.0);
  nn::Tensor out(weight.shape());
  Eigen::Map<Mat>(out.ptr(), rows, cols) = svd.matrixU() * capped.asDiagonal() * svd.matrixV().transpose();
  return out;
}

void singular_value_clip(nn::ParamStore& params) {
  for (const auto& [name, p] : params.entries()) {
    if (p->value.rank() < 2) continue;
    p->value = singular_value_clip(p->value);
    nn::round_to_float(p->value);
  }
}

}  // namespace trgan
