#include "cbm/knn.hpp"

#include <array>
#include <limits>
#include <stdexcept>

namespace cbm {

Knn fit_3nn(const Matrix& points, const std::vector<int>& labels) {
    if (points.rows() < 3) throw std::invalid_argument("fit_3nn: need at least 3 points");
    if (static_cast<std::size_t>(points.rows()) != labels.size()) {
        throw std::invalid_argument("fit_3nn: point/label count mismatch");
    }
    for (int y : labels) {
        if (y != 0 && y != 1) throw std::invalid_argument("fit_3nn: labels must be 0 or 1");
    }
    return Knn{points, labels, 3};
}

std::vector<int> predict_3nn(const Knn& knn, const Matrix& queries) {
    if (queries.cols() != knn.points.cols()) {
        throw std::invalid_argument("predict_3nn: query width mismatch");
    }
    const Eigen::Index n = knn.points.rows();
    const Eigen::Index m = queries.rows();
    std::vector<int> out(static_cast<std::size_t>(m));

    // Brute-force scan on squared distances; (distance, index) pairs compare
    // lexicographically, which breaks exact ties by lowest stored index.
    struct Neighbour {
        double d2 = std::numeric_limits<double>::infinity();
        Eigen::Index idx = -1;
        bool operator<(const Neighbour& o) const {
            return d2 < o.d2 || (d2 == o.d2 && idx < o.idx);
        }
    };

    for (Eigen::Index q = 0; q < m; ++q) {
        std::array<Neighbour, 3> best;
        for (Eigen::Index i = 0; i < n; ++i) {
            const double d2 = (knn.points.row(i) - queries.row(q)).squaredNorm();
            Neighbour cand{d2, i};
            if (best[2] < cand) continue;
            best[2] = cand;
            if (best[2] < best[1]) std::swap(best[1], best[2]);
            if (best[1] < best[0]) std::swap(best[0], best[1]);
        }
        const int votes = knn.labels[static_cast<std::size_t>(best[0].idx)] +
                          knn.labels[static_cast<std::size_t>(best[1].idx)] +
                          knn.labels[static_cast<std::size_t>(best[2].idx)];
        out[static_cast<std::size_t>(q)] = votes >= 2 ? 1 : 0;
    }
    return out;
}

double accuracy(const std::vector<int>& predicted, const std::vector<int>& actual) {
    if (predicted.size() != actual.size()) {
        throw std::invalid_argument("accuracy: length mismatch");
    }
    if (predicted.empty()) throw std::invalid_argument("accuracy: empty input");
    std::size_t hits = 0;
    for (std::size_t i = 0; i < predicted.size(); ++i) {
        if (predicted[i] == actual[i]) ++hits;
    }
    return static_cast<double>(hits) / static_cast<double>(predicted.size());
}

}  // namespace cbm
