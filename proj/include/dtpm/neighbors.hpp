#ifndef DTPM_NEIGHBORS_HPP
#define DTPM_NEIGHBORS_HPP

#include "dtpm/types.hpp"

#include <cstddef>
#include <vector>

namespace dtpm {

struct KnnResult {
    std::vector<std::size_t> indices;
    std::vector<double> squared_distances;  // nondecreasing
};

/**
 * @brief Exact k-nearest-neighbor search by brute-force scan.
 *
 * Distances are squared Euclidean. Ties are broken by row index, so results
 * are fully deterministic.
 */
class KnnIndex {
  public:
    /// Throws DataError for an empty or non-finite matrix.
    explicit KnnIndex(Matrix points);

    std::size_t size() const { return static_cast<std::size_t>(points_.rows()); }
    int dim() const { return static_cast<int>(points_.cols()); }
    const Matrix& points() const { return points_; }

    /// Throws ConfigError unless 1 <= k <= size(), DimensionError on width mismatch.
    KnnResult query(const Vector& x, int k) const;

    /// One query per row of `queries`.
    std::vector<KnnResult> query_batch(const Matrix& queries, int k) const;

  private:
    Matrix points_;
};

double squared_distance(const Eigen::Ref<const Vector>& a, const Eigen::Ref<const Vector>& b);

}  // namespace dtpm

#endif
