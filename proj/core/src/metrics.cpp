#include "fmfusion/metrics.hpp"

#include <cmath>
#include <stdexcept>
#include <utility>
#include <vector>

#include <json.hpp>

#include "fmfusion/tape.hpp"

namespace fmf {

namespace {

constexpr int kApThresholds = 101;

double ratio(std::uint64_t num, std::uint64_t den) {
  return den == 0 ? 1.0 : static_cast<double>(num) / static_cast<double>(den);
}

nlohmann::ordered_json metric_json(const MetricReport& m) {
  return {{"precision", m.precision}, {"recall", m.recall}, {"f_score", m.f_score},
          {"iou", m.iou},             {"ap", m.ap},         {"pixels", m.pixels}};
}

}  // namespace

ConfusionCounts confusion(std::span<const double> probabilities, std::span<const double> mask,
                          double threshold) {
  if (probabilities.size() != mask.size()) {
    throw ShapeError("confusion: " + std::to_string(probabilities.size()) + " predictions vs " +
                     std::to_string(mask.size()) + " labels");
  }
  ConfusionCounts c;
  for (std::size_t i = 0; i < mask.size(); ++i) {
    const bool pred = probabilities[i] > threshold;
    const bool truth = mask[i] > 0.5;
    if (pred && truth) ++c.tp;
    else if (pred) ++c.fp;
    else if (truth) ++c.fn;
    else ++c.tn;
  }
  return c;
}

MetricReport compute_metrics(std::span<const double> probabilities, std::span<const double> mask,
                             double threshold) {
  MetricReport m;
  m.pixels = mask.size();
  const ConfusionCounts c = confusion(probabilities, mask, threshold);
  m.precision = ratio(c.tp, c.tp + c.fp);
  m.recall = ratio(c.tp, c.tp + c.fn);
  m.f_score = m.precision + m.recall > 0.0
                  ? 2.0 * m.precision * m.recall / (m.precision + m.recall)
                  : 0.0;
  m.iou = ratio(c.tp, c.tp + c.fp + c.fn);

  // walked from the highest threshold down, so recall never decreases
  std::vector<std::pair<double, double>> curve;  // (recall, precision)
  curve.reserve(kApThresholds);
  for (int k = kApThresholds - 1; k >= 0; --k) {
    const ConfusionCounts ck = confusion(probabilities, mask, k / 100.0);
    curve.emplace_back(ratio(ck.tp, ck.tp + ck.fn), ratio(ck.tp, ck.tp + ck.fp));
  }
  double area = 0.0;
  for (std::size_t i = 1; i < curve.size(); ++i) {
    area += (curve[i].first - curve[i - 1].first) * 0.5 * (curve[i].second + curve[i - 1].second);
  }
  m.ap = area;
  return m;
}

std::string EvaluationReport::to_json() const {
  nlohmann::ordered_json j;
  for (const auto& [kind, m] : per_kind) j[std::string(scene_kind_name(kind))] = metric_json(m);
  j["overall"] = metric_json(overall);
  return j.dump(2);
}

EvaluationReport evaluate(const FusionNetwork& net, std::span<const ScenePair> test,
                          double threshold) {
  if (test.empty()) throw std::invalid_argument("evaluate: empty test set");
  NoGradScope no_grad;
  std::map<SceneKind, std::pair<std::vector<double>, std::vector<double>>> pooled;
  std::vector<double> all_probs, all_mask;
  for (const ScenePair& scene : test) {
    const std::size_t h = scene.rgb.dim(1), w = scene.rgb.dim(2);
    const Tensor logits =
        net.forward(scene.rgb.reshaped({1, 3, h, w}), scene.depth.reshaped({1, 1, h, w})).logits;
    auto& [probs, mask] = pooled[scene.kind];
    for (double z : logits.data()) {
      const double p = 1.0 / (1.0 + std::exp(-z));
      probs.push_back(p);
      all_probs.push_back(p);
    }
    mask.insert(mask.end(), scene.mask.data().begin(), scene.mask.data().end());
    all_mask.insert(all_mask.end(), scene.mask.data().begin(), scene.mask.data().end());
  }
  EvaluationReport report;
  for (const auto& [kind, pm] : pooled) {
    report.per_kind[kind] = compute_metrics(pm.first, pm.second, threshold);
  }
  report.overall = compute_metrics(all_probs, all_mask, threshold);
  return report;
}

}  // namespace fmf
