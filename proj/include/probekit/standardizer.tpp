#pragma once

#include "probekit/error.hpp"

namespace probekit {

template <typename Scalar>
Standardizer<Scalar> Standardizer<Scalar>::fit(const Matrix& rows) {
  if (rows.rows() == 0) throw ValidationError("cannot fit a standardizer on an empty set");
  Standardizer s;
  s.mean_ = rows.colwise().mean();
  const Matrix centered = rows.rowwise() - s.mean_;
  s.scale_ = (centered.array().square().colwise().sum() / static_cast<Scalar>(rows.rows())).sqrt().matrix();
  for (Eigen::Index j = 0; j < s.scale_.size(); ++j)
    if (s.scale_(j) < Scalar(1e-12)) s.scale_(j) = Scalar(1);
  return s;
}

template <typename Scalar>
auto Standardizer<Scalar>::apply(const Matrix& rows) const -> Matrix {
  if (rows.cols() != mean_.size()) throw ValidationError("standardizer width mismatch");
  return (rows.rowwise() - mean_).array().rowwise() / scale_.array();
}

template <typename Scalar>
auto Standardizer<Scalar>::apply_row(const RowVector& row) const -> RowVector {
  if (row.size() != mean_.size()) throw ValidationError("standardizer width mismatch");
  return (row - mean_).array() / scale_.array();
}

}  // namespace probekit
