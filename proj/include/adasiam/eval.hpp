#pragma once

#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "adasiam/box.hpp"

namespace adasiam {

inline constexpr std::size_t kPrecisionThresholds = 51;  // 0..50 px
inline constexpr std::size_t kSuccessThresholds = 21;    // 0, 0.05, ..., 1

struct EvalResult {
  std::string name;
  std::vector<double> precision;  // fraction with center error <= threshold
  std::vector<double> success;    // fraction with IoU > threshold
  double dp20 = 0.0;
  double auc = 0.0;
  bool failed = false;
};

double success_threshold(std::size_t i);

std::vector<double> precision_curve(std::span<const Box> pred, std::span<const Box> gt);
std::vector<double> success_curve(std::span<const Box> pred, std::span<const Box> gt);

/// Throws ConfigError on length mismatch or empty input.
EvalResult evaluate(std::span<const Box> pred, std::span<const Box> gt, std::string name = {});
/// All-zero curves, flagged as a failed run.
EvalResult failed_result(std::string name);
/// Unweighted mean of the curves and summary values.
EvalResult aggregate(std::span<const EvalResult> results, std::string name = "aggregate");

std::string summary_line(const EvalResult& r);  // "DP20=<v>,AUC=<v>"
/// Rows "curve,threshold,value" for both curves.
std::string eval_csv(const EvalResult& r);

}  // namespace adasiam
