#pragma once

#include "cbm/mlp.hpp"

#include <vector>

namespace cbm {

// 3-nearest-neighbour target classifier f_{C->Y}. Lazy learner: fit stores
// the training data verbatim.
struct Knn {
    Matrix points;           // n x L concept representations
    std::vector<int> labels; // n, values in {0,1}
    int k = 3;
};

Knn fit_3nn(const Matrix& points, const std::vector<int>& labels);

// Euclidean (squared) distances; ties broken by lowest stored index; majority
// vote of the 3 nearest labels.
std::vector<int> predict_3nn(const Knn& knn, const Matrix& queries);

// Fraction of exact matches.
double accuracy(const std::vector<int>& predicted, const std::vector<int>& actual);

}  // namespace cbm
