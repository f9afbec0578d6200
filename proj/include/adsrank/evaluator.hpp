#pragma once

#include <map>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "adsrank/error.hpp"

namespace adsrank {

struct ImageOutcome {
  std::string id;
  std::size_t predicted = 0;
  bool correct = false;
};

/// Top-1 accuracy summary. Images whose gold positive set is empty are left
/// out of the denominator and listed in `excluded`.
struct EvalReport {
  std::size_t num_images = 0;
  std::size_t num_correct = 0;
  double accuracy = 0.0;
  std::vector<ImageOutcome> per_image;
  std::vector<std::string> excluded;
};

using Prediction = std::pair<std::string, std::size_t>;
using GoldSets = std::map<std::string, std::set<std::size_t>, std::less<>>;

/// An image is correct iff its top-ranked statement is one of its positives.
inline EvalReport accuracy(const std::vector<Prediction>& predictions,
                           const GoldSets& gold) {
  EvalReport report;
  for (const auto& [id, top] : predictions) {
    auto it = gold.find(id);
    if (it == gold.end()) throw NotFoundError("unknown image id '" + id + "'");
    if (it->second.empty()) {
      report.excluded.push_back(id);
      continue;
    }
    const bool correct = it->second.count(top) != 0;
    report.per_image.push_back({id, top, correct});
    ++report.num_images;
    if (correct) ++report.num_correct;
  }
  report.accuracy = report.num_images == 0
                        ? 0.0
                        : static_cast<double>(report.num_correct) /
                              static_cast<double>(report.num_images);
  return report;
}

/// Fraction of images on which two rankers pick the same top statement.
inline double agreement(const std::vector<std::size_t>& tops_a,
                        const std::vector<std::size_t>& tops_b) {
  if (tops_a.size() != tops_b.size()) {
    throw DimensionError("agreement: " + std::to_string(tops_a.size()) + " vs " +
                         std::to_string(tops_b.size()) + " images");
  }
  if (tops_a.empty()) return 1.0;
  std::size_t same = 0;
  for (std::size_t i = 0; i < tops_a.size(); ++i) {
    if (tops_a[i] == tops_b[i]) ++same;
  }
  return static_cast<double>(same) / static_cast<double>(tops_a.size());
}

}  // namespace adsrank
