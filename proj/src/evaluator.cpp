#include "fcdd/eval/evaluator.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <limits>

#include "fcdd/core/loss.hpp"
#include "fcdd/net/builders.hpp"
#include "fcdd/net/forward.hpp"
#include "fcdd/util/errors.hpp"

namespace fcdd {

namespace {

void require_finite_scores(const std::vector<ScoreRecord>& records) {
  for (const ScoreRecord& r : records) {
    if (!std::isfinite(r.score)) {
      throw InvalidInputError("non-finite score for record " + r.id);
    }
  }
}

struct PairCounts {
  std::int64_t wins = 0;  // anomalous strictly above normal
  std::int64_t ties = 0;
  std::int64_t normals = 0;
  std::int64_t anomalous = 0;
};

PairCounts count_pairs(const std::vector<ScoreRecord>& records) {
  PairCounts c;
  std::vector<double> normal_scores;
  for (const ScoreRecord& r : records) {
    if (r.label == 1) {
      ++c.anomalous;
    } else {
      ++c.normals;
      normal_scores.push_back(r.score);
    }
  }
  std::sort(normal_scores.begin(), normal_scores.end());
  for (const ScoreRecord& r : records) {
    if (r.label != 1) continue;
    const auto lo = std::lower_bound(normal_scores.begin(), normal_scores.end(), r.score);
    const auto hi = std::upper_bound(lo, normal_scores.end(), r.score);
    c.wins += lo - normal_scores.begin();
    c.ties += hi - lo;
  }
  return c;
}

double f1_at(const std::vector<ScoreRecord>& records, double threshold) {
  Index tp = 0, fp = 0, fn = 0;
  for (const ScoreRecord& r : records) {
    const bool positive = r.score >= threshold;
    if (r.label == 1 && positive) ++tp;
    if (r.label == 0 && positive) ++fp;
    if (r.label == 1 && !positive) ++fn;
  }
  const Index denom = 2 * tp + fp + fn;
  return denom == 0 ? 0.0 : 2.0 * double(tp) / double(denom);
}

}  // namespace

std::vector<ScoreRecord> score_dataset(const Checkpoint& ckpt, const DatasetManifest& m,
                                       Split split) {
  const BackboneSpec spec = backbone_spec(ckpt.config.backbone);
  ParamState<float> params;
  params.tensors = ckpt.tensors;
  {
    const auto expected = tensor_manifest(init_params<float>(spec, 0));
    const auto got = tensor_manifest(params);
    if (expected != got) {
      throw WeightLoadError("checkpoint tensors do not match backbone " +
                            ckpt.config.backbone);
    }
  }
  const auto records = m.in_split(split);
  if (records.empty()) {
    throw InvalidInputError(std::string("split ") + split_name(split) + " is empty");
  }

  std::vector<ScoreRecord> out;
  out.reserve(records.size());
  constexpr std::size_t kChunk = 16;
  for (std::size_t at = 0; at < records.size(); at += kChunk) {
    const std::size_t end = std::min(records.size(), at + kChunk);
    const std::vector<const SampleRecord*> chunk(records.begin() + std::ptrdiff_t(at),
                                                 records.begin() + std::ptrdiff_t(end));
    LoadedBatch loaded = load_batch(chunk, spec.input.h, spec.input.w);
    const auto features = forward_eval(spec, params, std::move(loaded.images));
    for (std::size_t i = 0; i < chunk.size(); ++i) {
      ScoreRecord r;
      r.id = chunk[i]->id;
      r.path = chunk[i]->path;
      r.label = chunk[i]->label;
      r.score = double(anomaly_score(pseudo_huber_map(features[i])));
      out.push_back(std::move(r));
    }
  }
  return out;
}

double roc_auc(const std::vector<ScoreRecord>& records) {
  require_finite_scores(records);
  const PairCounts c = count_pairs(records);
  if (c.normals == 0 || c.anomalous == 0) {
    throw UndefinedMetricError("roc_auc needs both classes");
  }
  return (double(c.wins) + 0.5 * double(c.ties)) / (double(c.normals) * double(c.anomalous));
}

double calibrate_threshold(const std::vector<ScoreRecord>& records) {
  require_finite_scores(records);
  bool has_normal = false, has_anomalous = false;
  std::vector<double> distinct;
  distinct.reserve(records.size());
  for (const ScoreRecord& r : records) {
    (r.label == 1 ? has_anomalous : has_normal) = true;
    distinct.push_back(r.score);
  }
  if (!has_normal || !has_anomalous) {
    throw UndefinedMetricError("calibrate_threshold needs both classes");
  }
  std::sort(distinct.begin(), distinct.end());
  distinct.erase(std::unique(distinct.begin(), distinct.end()), distinct.end());

  std::vector<double> candidates;
  candidates.push_back(-std::numeric_limits<double>::infinity());
  for (std::size_t i = 0; i + 1 < distinct.size(); ++i) {
    candidates.push_back(0.5 * (distinct[i] + distinct[i + 1]));
  }
  candidates.push_back(std::numeric_limits<double>::infinity());

  double best_threshold = candidates.front();
  double best_f1 = -1.0;
  for (double t : candidates) {
    const double f1 = f1_at(records, t);
    if (f1 > best_f1) {
      best_f1 = f1;
      best_threshold = t;
    }
  }
  return best_threshold;
}

MetricsReport classification_metrics(std::vector<ScoreRecord>& records, double threshold) {
  if (records.empty()) throw InvalidInputError("classification_metrics on an empty list");
  require_finite_scores(records);
  MetricsReport report;
  report.threshold = threshold;
  report.n = Index(records.size());
  for (ScoreRecord& r : records) {
    r.predicted = r.score >= threshold ? 1 : 0;
    if (r.label == 1) {
      (r.predicted == 1 ? report.tp : report.fn) += 1;
    } else {
      (r.predicted == 1 ? report.fp : report.tn) += 1;
    }
  }
  report.precision_defined = report.tp + report.fp > 0;
  if (report.precision_defined) {
    report.precision = double(report.tp) / double(report.tp + report.fp);
  }
  report.recall_defined = report.tp + report.fn > 0;
  if (report.recall_defined) {
    report.recall = double(report.tp) / double(report.tp + report.fn);
  }
  report.f1_defined = report.precision_defined && report.recall_defined &&
                      report.precision + report.recall > 0.0;
  if (report.f1_defined) {
    report.f1 =
        2.0 * report.precision * report.recall / (report.precision + report.recall);
  }
  const bool both_classes = report.tp + report.fn > 0 && report.fp + report.tn > 0;
  report.auc_defined = both_classes;
  if (both_classes) report.auc = roc_auc(records);
  return report;
}

void save_scores(const std::string& path, const std::vector<ScoreRecord>& records) {
  std::ofstream out(path);
  if (!out) throw FileWriteError("cannot open " + path + " for writing");
  out << "id\tpath\tscore\tlabel\tpredicted\n";
  out.precision(17);
  for (const ScoreRecord& r : records) {
    out << r.id << '\t' << r.path << '\t' << r.score << '\t' << r.label << '\t' << r.predicted
        << '\n';
  }
  out.close();
  if (!out) throw FileWriteError("failed writing " + path);
}

void save_metrics(const std::string& path, const MetricsReport& report) {
  std::ofstream out(path);
  if (!out) throw FileWriteError("cannot open " + path + " for writing");
  out.precision(17);
  out << "auc\t" << report.auc << '\n';
  out << "f1\t" << report.f1 << '\n';
  out << "precision\t" << report.precision << '\n';
  out << "recall\t" << report.recall << '\n';
  out << "threshold\t" << report.threshold << '\n';
  out << "tp\t" << report.tp << '\n';
  out << "fp\t" << report.fp << '\n';
  out << "fn\t" << report.fn << '\n';
  out << "tn\t" << report.tn << '\n';
  out << "n\t" << report.n << '\n';
  out.close();
  if (!out) throw FileWriteError("failed writing " + path);
}

}  // namespace fcdd
