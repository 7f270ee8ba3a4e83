#pragma once

#include <string>
#include <vector>

#include "fcdd/data/manifest.hpp"
#include "fcdd/io/checkpoint.hpp"

namespace fcdd {

struct ScoreRecord {
  std::string id;
  std::string path;
  double score = 0.0;
  int label = 0;
  int predicted = -1;  // -1 until a threshold has been applied
};

/// Precision, recall, and f1 fall back to 0 when their denominator is
/// empty; the matching flag records that the value is a fallback, not a
/// measurement. auc_defined is false when only one class was present.
struct MetricsReport {
  double auc = 0.0;
  double f1 = 0.0;
  double precision = 0.0;
  double recall = 0.0;
  double threshold = 0.0;
  Index tp = 0, fp = 0, fn = 0, tn = 0, n = 0;
  bool auc_defined = false;
  bool precision_defined = false;
  bool recall_defined = false;
  bool f1_defined = false;
};

/// Scores every record of the split: load at the backbone's input size,
/// eval-mode forward, pseudo-Huber response map, sum. Order follows the
/// manifest. The checkpoint tensors must exactly match the backbone's
/// declared manifest.
std::vector<ScoreRecord> score_dataset(const Checkpoint& ckpt, const DatasetManifest& m,
                                       Split split);

/// Rank AUC with half-credit for ties: (wins + 0.5 * ties) / (n_a * n_n)
/// over all anomalous/normal pairs, computed from exact integer counts.
double roc_auc(const std::vector<ScoreRecord>& records);

/// F1-maximizing candidate over midpoints of consecutive distinct scores
/// plus the two infinite sentinels, under the decision rule S >= t. Ties
/// resolve to the smallest candidate.
double calibrate_threshold(const std::vector<ScoreRecord>& records);

/// Applies predicted = (score >= threshold) in place and tallies the
/// report. AUC is attached when both classes are present.
MetricsReport classification_metrics(std::vector<ScoreRecord>& records, double threshold);

/// Tab-separated: id, path, score, label, predicted.
void save_scores(const std::string& path, const std::vector<ScoreRecord>& records);

/// Fixed keys in order: auc, f1, precision, recall, threshold, tp, fp, fn,
/// tn, n; one "key\tvalue" line each.
void save_metrics(const std::string& path, const MetricsReport& report);

}  // namespace fcdd
