#include "dtpm/neighbors.hpp"

#include "dtpm/errors.hpp"

#include <algorithm>
#include <queue>
#include <string>
#include <utility>

namespace dtpm {

double squared_distance(const Eigen::Ref<const Vector>& a, const Eigen::Ref<const Vector>& b) {
    double total = 0.0;
    for (Eigen::Index i = 0; i < a.size(); ++i) {
        const double diff = a[i] - b[i];
        total += diff * diff;
    }
    return total;
}

KnnIndex::KnnIndex(Matrix points) : points_(std::move(points)) {
    if (points_.rows() == 0 || points_.cols() == 0) {
        throw DataError("cannot build a neighbor index over an empty matrix");
    }
    if (!points_.allFinite()) {
        throw DataError("neighbor index points contain NaN or Inf");
    }
}

KnnResult KnnIndex::query(const Vector& x, int k) const {
    if (k < 1 || static_cast<std::size_t>(k) > size()) {
        throw ConfigError("k = " + std::to_string(k) + " must lie in [1, " + std::to_string(size()) + "]");
    }
    if (x.size() != points_.cols()) {
        throw DimensionError("query width does not match index width");
    }

    // Max-heap on (distance, index) holding the k best candidates seen so far.
    using Entry = std::pair<double, std::size_t>;
    std::priority_queue<Entry> best;
    for (Eigen::Index r = 0; r < points_.rows(); ++r) {
        const Entry candidate{squared_distance(points_.row(r).transpose(), x), static_cast<std::size_t>(r)};
        if (best.size() < static_cast<std::size_t>(k)) {
            best.push(candidate);
        } else if (candidate < best.top()) {
            best.pop();
            best.push(candidate);
        }
    }

    KnnResult out;
    out.indices.resize(best.size());
    out.squared_distances.resize(best.size());
    for (std::size_t i = best.size(); i-- > 0;) {
        out.squared_distances[i] = best.top().first;
        out.indices[i] = best.top().second;
        best.pop();
    }
    return out;
}

std::vector<KnnResult> KnnIndex::query_batch(const Matrix& queries, int k) const {
    std::vector<KnnResult> out;
    out.reserve(static_cast<std::size_t>(queries.rows()));
    for (Eigen::Index r = 0; r < queries.rows(); ++r) {
        out.push_back(query(queries.row(r).transpose(), k));
    }
    return out;
}

}  // namespace dtpm
