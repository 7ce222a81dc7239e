#include "ctscreen/evalm.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include <nlohmann/json.hpp>

namespace ctscreen {

using nlohmann::json;

void SegAccumulator::add(const LabelVolume& pred, const LabelVolume& gt) {
  if (pred.dims != gt.dims) throw validation_error("iou: prediction/ground-truth dims differ");
  std::array<int64_t, kNumClasses> pred_count{}, gt_count{}, inter{};
  for (size_t i = 0; i < pred.data.size(); i++) {
    pred_count[pred.data[i]]++;
    gt_count[gt.data[i]]++;
    if (pred.data[i] == gt.data[i]) inter[pred.data[i]]++;
  }
  for (int c = 0; c < kNumClasses; c++) {
    intersection[c] += inter[c];
    union_[c] += pred_count[c] + gt_count[c] - inter[c];
  }
}

SegScore SegAccumulator::score() const {
  SegScore s;
  double sum = 0.0;
  for (int c = 0; c < kNumClasses; c++) {
    s.iou[c] = union_[c] == 0 ? 1.0 : static_cast<double>(intersection[c]) / static_cast<double>(union_[c]);
    sum += s.iou[c];
  }
  s.mean_iou = sum / kNumClasses;
  return s;
}

SegScore iou(const LabelVolume& pred, const LabelVolume& gt) {
  SegAccumulator acc;
  acc.add(pred, gt);
  return acc.score();
}

namespace {

int64_t overlap_count(const std::vector<int64_t>& a, const std::vector<int64_t>& b) {
  // both sorted
  int64_t n = 0;
  size_t i = 0, j = 0;
  while (i < a.size() && j < b.size()) {
    if (a[i] < b[j])
      i++;
    else if (a[i] > b[j])
      j++;
    else {
      n++;
      i++;
      j++;
    }
  }
  return n;
}

}  // namespace

std::vector<MatchPair> match(const DetectionSet& dets, const DetectionSet& gt_objects, MatchCriterion criterion) {
  if (!dets.detections.empty() && !gt_objects.detections.empty() && dets.dims != gt_objects.dims)
    throw validation_error("match: detection/ground-truth dims differ");
  struct Cand {
    int64_t overlap;
    int det, gt;
  };
  std::vector<Cand> cands;
  for (int di = 0; di < static_cast<int>(dets.detections.size()); di++) {
    const Detection& d = dets.detections[static_cast<size_t>(di)];
    if (d.voxels.empty()) throw validation_error("match needs detection voxel sets (save with RLE sidecar)");
    for (int gi = 0; gi < static_cast<int>(gt_objects.detections.size()); gi++) {
      const Detection& g = gt_objects.detections[static_cast<size_t>(gi)];
      if (criterion == MatchCriterion::kClassRequired && d.cls != g.cls) continue;
      const int64_t ov = overlap_count(d.voxels, g.voxels);
      if (ov * 2 > g.voxel_count) cands.push_back({ov, di, gi});  // |det∩gt|/|gt| > 0.5
    }
  }
  std::sort(cands.begin(), cands.end(), [](const Cand& a, const Cand& b) {
    if (a.overlap != b.overlap) return a.overlap > b.overlap;
    if (a.det != b.det) return a.det < b.det;
    return a.gt < b.gt;
  });
  std::vector<uint8_t> det_used(dets.detections.size(), 0), gt_used(gt_objects.detections.size(), 0);
  std::vector<MatchPair> out;
  for (const Cand& c : cands) {
    if (det_used[static_cast<size_t>(c.det)] || gt_used[static_cast<size_t>(c.gt)]) continue;
    det_used[static_cast<size_t>(c.det)] = gt_used[static_cast<size_t>(c.gt)] = 1;
    out.push_back({c.det, c.gt, c.overlap});
  }
  return out;
}

void DetAccumulator::add(const DetectionSet& dets, const DetectionSet& gt_objects) {
  const auto class_matches = match(dets, gt_objects, MatchCriterion::kClassRequired);
  const auto agnostic_matches = match(dets, gt_objects, MatchCriterion::kClassAgnostic);

  std::array<int64_t, kNumClasses> det_count{}, gt_count{}, matched{};
  for (const Detection& d : dets.detections) det_count[d.cls]++;
  for (const Detection& g : gt_objects.detections) gt_count[g.cls]++;
  for (const MatchPair& m : class_matches) matched[dets.detections[static_cast<size_t>(m.det_index)].cls]++;
  for (int c = 1; c < kNumClasses; c++) {
    tp[c] += matched[c];
    fp[c] += det_count[c] - matched[c];
    fn[c] += gt_count[c] - matched[c];
    gt_total[c] += gt_count[c];
  }
  for (const MatchPair& m : agnostic_matches) gt_matched[gt_objects.detections[static_cast<size_t>(m.gt_index)].cls]++;
  det_total += static_cast<int64_t>(dets.detections.size());
  det_matched += static_cast<int64_t>(agnostic_matches.size());
}

DetScore DetAccumulator::score() const {
  DetScore s;
  int64_t tp_all = 0, fp_all = 0, fn_all = 0, gt_all = 0, gt_hit = 0;
  for (int c = 1; c < kNumClasses; c++) {
    ClassPR& pr = s.per_class[c];
    pr.tp = tp[c];
    pr.fp = fp[c];
    pr.fn = fn[c];
    if (tp[c] + fp[c] > 0) pr.precision = 100.0 * tp[c] / static_cast<double>(tp[c] + fp[c]);
    if (tp[c] + fn[c] > 0) pr.recall = 100.0 * tp[c] / static_cast<double>(tp[c] + fn[c]);
    if (gt_total[c] > 0) s.pd[c] = 100.0 * gt_matched[c] / static_cast<double>(gt_total[c]);
    tp_all += tp[c];
    fp_all += fp[c];
    fn_all += fn[c];
    gt_all += gt_total[c];
    gt_hit += gt_matched[c];
  }
  if (tp_all + fp_all > 0) s.overall_precision = 100.0 * tp_all / static_cast<double>(tp_all + fp_all);
  if (tp_all + fn_all > 0) s.overall_recall = 100.0 * tp_all / static_cast<double>(tp_all + fn_all);
  if (gt_all > 0) s.overall_pd = 100.0 * gt_hit / static_cast<double>(gt_all);
  // PFA over total detections; defined as 0 when nothing was detected
  s.pfa = det_total == 0 ? 0.0 : 100.0 * (det_total - det_matched) / static_cast<double>(det_total);
  return s;
}

DetScore score_detections(const DetectionSet& dets, const DetectionSet& gt_objects) {
  DetAccumulator acc;
  acc.add(dets, gt_objects);
  DetScore s = acc.score();
  s.class_matches = match(dets, gt_objects, MatchCriterion::kClassRequired);
  s.agnostic_matches = match(dets, gt_objects, MatchCriterion::kClassAgnostic);
  return s;
}

std::string score_report_json(const SegScore& seg, const DetScore& det, const std::string& config_hash) {
  static const char* kClassNames[kNumClasses] = {"background", "saline", "rubber", "clay"};
  json j;
  auto opt = [](const std::optional<double>& v) { return v ? json(*v) : json(nullptr); };
  json per_class = json::object();
  for (int c = 0; c < kNumClasses; c++) {
    json e;
    e["iou"] = seg.iou[c];
    if (c > 0) {
      e["precision"] = opt(det.per_class[c].precision);
      e["recall"] = opt(det.per_class[c].recall);
      e["pd"] = opt(det.pd[c]);
    }
    per_class[kClassNames[c]] = std::move(e);
  }
  j["per_class"] = std::move(per_class);
  j["mean_iou"] = seg.mean_iou;
  j["overall"] = {{"precision", opt(det.overall_precision)},
                  {"recall", opt(det.overall_recall)},
                  {"pd", opt(det.overall_pd)},
                  {"pfa", det.pfa}};
  j["matching_rule"] = kMatchRuleId;
  j["config_hash"] = config_hash;
  return j.dump(2) + "\n";
}

}  // namespace ctscreen
