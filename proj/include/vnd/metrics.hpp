#pragma once

#include <string>
#include <vector>

namespace vnd {

// P(score+ > score-) + 0.5 * P(score+ = score-) over all positive/negative
// pairs, computed by sort-and-rank in O(n log n). Requires both classes.
double roc_auc(const std::vector<double>& scores, const std::vector<int>& labels);

// Threshold maximizing Youden's J = TPR - FPR over the midpoints between
// adjacent distinct sorted scores plus +/-infinity; ties resolve toward the
// larger threshold. Predictions are score >= threshold.
double select_threshold(const std::vector<double>& scores, const std::vector<int>& labels);

// 1 iff the narration mentions at least one object and at least 60% of the
// mentioned objects are visible. Case-insensitive match on deduplicated sets.
int object_baseline(const std::vector<std::string>& narration_objects,
                    const std::vector<std::string>& visible_objects);

}  // namespace vnd
