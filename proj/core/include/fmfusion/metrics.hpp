#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <span>
#include <string>

#include "fmfusion/fusion_net.hpp"
#include "fmfusion/synth.hpp"

namespace fmf {

struct MetricReport {
  double precision = 0.0;
  double recall = 0.0;
  double f_score = 0.0;
  double iou = 0.0;
  double ap = 0.0;
  std::uint64_t pixels = 0;
};

struct ConfusionCounts {
  std::uint64_t tp = 0, fp = 0, fn = 0, tn = 0;
};

/// Pixels with probability > threshold count as road.
ConfusionCounts confusion(std::span<const double> probabilities, std::span<const double> mask,
                          double threshold);

/// PRE, REC, F, IoU at `threshold`; AP as the trapezoid area under the
/// precision-recall curve traced over thresholds 1.00, 0.99, ..., 0.00, with
/// precision 1 where nothing is predicted. A ratio whose denominator is zero
/// has nothing to get wrong and is reported as 1.
MetricReport compute_metrics(std::span<const double> probabilities, std::span<const double> mask,
                             double threshold = 0.5);

struct EvaluationReport {
  std::map<SceneKind, MetricReport> per_kind;
  MetricReport overall;

  /// {"UM": {...}, "UMM": {...}, "UU": {...}, "overall": {...}}
  std::string to_json() const;
};

/// Inference over `test` (no tape is touched) and pooled metrics per scene
/// kind and overall.
EvaluationReport evaluate(const FusionNetwork& net, std::span<const ScenePair> test,
                          double threshold = 0.5);

}  // namespace fmf
