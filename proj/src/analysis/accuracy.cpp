#include "fscil/analysis/accuracy.hpp"

#include <stdexcept>
#include <string>

namespace fscil::analysis {

AccuracyDecomposition accuracy_decomposition(std::span<const Prediction> predictions,
                                             int base_count, int session) {
  if (predictions.empty()) throw std::invalid_argument("accuracy_decomposition: no predictions");
  std::size_t base_hit = 0, novel_hit = 0, nn_hit = 0;
  AccuracyDecomposition out;
  for (const Prediction& p : predictions) {
    const bool correct = p.predicted == p.label;
    if (p.label < base_count) {
      ++out.base_samples;
      base_hit += correct;
      continue;
    }
    ++out.novel_samples;
    novel_hit += correct;
    if (session >= 1) {
      if (!p.novel_only) {
        throw std::invalid_argument("accuracy_decomposition: novel sample lacks a novel-only prediction");
      }
      nn_hit += *p.novel_only == p.label;
    }
  }
  if (session >= 1 && out.novel_samples == 0) {
    throw std::invalid_argument("accuracy_decomposition: empty novel test set in session " +
                                std::to_string(session));
  }
  const auto frac = [](std::size_t hit, std::size_t n) {
    return n == 0 ? 0.0 : static_cast<double>(hit) / static_cast<double>(n);
  };
  out.ba = frac(base_hit, out.base_samples);
  out.aa = frac(base_hit + novel_hit, predictions.size());
  if (session >= 1) {
    out.na = frac(novel_hit, out.novel_samples);
    out.nn = frac(nn_hit, out.novel_samples);
    out.gap = *out.nn - *out.na;
  }
  return out;
}

}  // namespace fscil::analysis
