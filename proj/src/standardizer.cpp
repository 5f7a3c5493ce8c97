#include "dtpm/standardizer.hpp"

#include "dtpm/errors.hpp"

#include <cmath>

namespace dtpm {

Standardizer Standardizer::fit(const Matrix& train) {
    if (train.rows() == 0 || train.cols() == 0) {
        throw DataError("cannot fit a standardizer on an empty matrix");
    }
    const double n = static_cast<double>(train.rows());
    Standardizer s;
    s.mean = train.colwise().mean().transpose();
    s.std.resize(train.cols());
    for (Eigen::Index c = 0; c < train.cols(); ++c) {
        const double var = (train.col(c).array() - s.mean[c]).square().sum() / n;
        const double sd = std::sqrt(var);
        s.std[c] = sd > 0.0 ? sd : 1.0;
    }
    return s;
}

Matrix Standardizer::apply(const Matrix& x) const {
    if (x.cols() != mean.size()) {
        throw DimensionError("standardizer width does not match input width");
    }
    Matrix out = x;
    out.rowwise() -= mean.transpose();
    out.array().rowwise() /= std.transpose().array();
    return out;
}

Vector Standardizer::apply(const Vector& x) const {
    if (x.size() != mean.size()) {
        throw DimensionError("standardizer width does not match input width");
    }
    return ((x - mean).array() / std.array()).matrix();
}

Matrix Standardizer::invert(const Matrix& z) const {
    if (z.cols() != mean.size()) {
        throw DimensionError("standardizer width does not match input width");
    }
    Matrix out = z;
    out.array().rowwise() *= std.transpose().array();
    out.rowwise() += mean.transpose();
    return out;
}

Vector Standardizer::invert(const Vector& z) const {
    if (z.size() != mean.size()) {
        throw DimensionError("standardizer width does not match input width");
    }
    return (z.array() * std.array()).matrix() + mean;
}

}  // namespace dtpm
