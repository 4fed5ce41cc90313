#include "adasiam/eval.hpp"

#include "adasiam/errors.hpp"
#include "adasiam/geometry.hpp"
#include "adasiam/io.hpp"

namespace adasiam {

namespace {

void check_lengths(std::span<const Box> pred, std::span<const Box> gt) {
  if (pred.size() != gt.size()) {
    throw ConfigError("evaluation: " + std::to_string(pred.size()) + " predictions for " +
                      std::to_string(gt.size()) + " ground-truth frames");
  }
  if (gt.empty()) throw ConfigError("evaluation: empty sequence");
}

}  // namespace

double success_threshold(std::size_t i) {
  return static_cast<double>(i) / static_cast<double>(kSuccessThresholds - 1);
}

std::vector<double> precision_curve(std::span<const Box> pred, std::span<const Box> gt) {
  check_lengths(pred, gt);
  std::vector<double> curve(kPrecisionThresholds, 0.0);
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const double d = center_distance(pred[i], gt[i]);
    for (std::size_t t = 0; t < kPrecisionThresholds; ++t) curve[t] += d <= static_cast<double>(t);
  }
  for (double& v : curve) v /= static_cast<double>(pred.size());
  return curve;
}

std::vector<double> success_curve(std::span<const Box> pred, std::span<const Box> gt) {
  check_lengths(pred, gt);
  std::vector<double> curve(kSuccessThresholds, 0.0);
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const double o = iou(pred[i], gt[i]);
    for (std::size_t t = 0; t < kSuccessThresholds; ++t) curve[t] += o > success_threshold(t);
  }
  for (double& v : curve) v /= static_cast<double>(pred.size());
  return curve;
}

EvalResult evaluate(std::span<const Box> pred, std::span<const Box> gt, std::string name) {
  EvalResult r;
  r.name = std::move(name);
  r.precision = precision_curve(pred, gt);
  r.success = success_curve(pred, gt);
  r.dp20 = r.precision[20];
  double sum = 0.0;
  for (double v : r.success) sum += v;
  r.auc = sum / static_cast<double>(kSuccessThresholds);
  return r;
}

EvalResult failed_result(std::string name) {
  EvalResult r;
  r.name = std::move(name);
  r.precision.assign(kPrecisionThresholds, 0.0);
  r.success.assign(kSuccessThresholds, 0.0);
  r.failed = true;
  return r;
}

EvalResult aggregate(std::span<const EvalResult> results, std::string name) {
  if (results.empty()) throw ConfigError("aggregate: no results");
  EvalResult out;
  out.name = std::move(name);
  out.precision.assign(kPrecisionThresholds, 0.0);
  out.success.assign(kSuccessThresholds, 0.0);
  const double n = static_cast<double>(results.size());
  for (const EvalResult& r : results) {
    for (std::size_t t = 0; t < kPrecisionThresholds; ++t) out.precision[t] += r.precision[t];
    for (std::size_t t = 0; t < kSuccessThresholds; ++t) out.success[t] += r.success[t];
    out.dp20 += r.dp20;
    out.auc += r.auc;
    out.failed = out.failed || r.failed;
  }
  for (double& v : out.precision) v /= n;
  for (double& v : out.success) v /= n;
  out.dp20 /= n;
  out.auc /= n;
  return out;
}

std::string summary_line(const EvalResult& r) {
  return "DP20=" + format_double(r.dp20) + ",AUC=" + format_double(r.auc);
}

std::string eval_csv(const EvalResult& r) {
  std::string out = "curve,threshold,value\n";
  for (std::size_t t = 0; t < r.precision.size(); ++t)
    out += "precision," + std::to_string(t) + "," + format_double(r.precision[t]) + "\n";
  for (std::size_t t = 0; t < r.success.size(); ++t)
    out += "success," + format_double(success_threshold(t)) + "," + format_double(r.success[t]) + "\n";
  return out;
}

}  // namespace adasiam
