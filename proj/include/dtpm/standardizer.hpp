#ifndef DTPM_STANDARDIZER_HPP
#define DTPM_STANDARDIZER_HPP

#include "dtpm/types.hpp"

namespace dtpm {

/// Per-feature centering and scaling fit on training rows only.
struct Standardizer {
    Vector mean;
    Vector std;  // population std; zero-variance features get 1

    /// Throws DataError on an empty matrix.
    static Standardizer fit(const Matrix& train);

    int dim() const { return static_cast<int>(mean.size()); }

    /// (x - mean) / std per column. Throws DimensionError on width mismatch.
    Matrix apply(const Matrix& x) const;
    Vector apply(const Vector& x) const;
    Matrix invert(const Matrix& z) const;
    Vector invert(const Vector& z) const;
};

}  // namespace dtpm

#endif
