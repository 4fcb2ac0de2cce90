#include "scenediff/change_detection.hpp"

#include <algorithm>
#include <limits>
#include <string>

#include "scenediff/error.hpp"
#include "scenediff/io.hpp"
#include "scenediff/parallel.hpp"

namespace scenediff {

namespace {

struct Candidate {
  std::uint32_t distance = 0;
  std::size_t slot = 0;
};

bool candidate_before(const Candidate& a, const Candidate& b, const ReferencePool& pool) {
  if (a.distance != b.distance) return a.distance < b.distance;
  const PoolFeature& fa = pool.features[a.slot];
  const PoolFeature& fb = pool.features[b.slot];
  if (fa.frame_id != fb.frame_id) return fa.frame_id < fb.frame_id;
  return fa.feature_id < fb.feature_id;
}

Candidate nearest_in_pool(const BinaryCode& query, const ReferencePool& pool) {
  require(!pool.empty(), ErrorKind::scoring, "reference pool is empty");
  Candidate best{std::numeric_limits<std::uint32_t>::max(), 0};
  for (std::size_t i = 0; i < pool.features.size(); ++i) {
    const Candidate c{hamming_distance(query, pool.features[i].code), i};
    if (i == 0 || candidate_before(c, best, pool)) best = c;
  }
  return best;
}

BinaryCode code_of(const LocalFeature& f, const ProjectionDictionary* dict) {
  if (const auto* dense = std::get_if<DenseVector>(&f.descriptor)) {
    require(dict != nullptr, ErrorKind::configuration,
            "dense descriptors need a projection dictionary");
    return binarize(*dense, *dict);
  }
  return std::get<BinaryCode>(f.descriptor);
}

}  // namespace

ReferencePool build_reference_pool(const ViewSequenceMap& map, std::span<const FrameId> frames,
                                   const ProjectionDictionary* dict) {
  ReferencePool pool;
  for (FrameId id : frames) {
    const Frame* frame = map.find_frame(id);
    require(frame != nullptr, ErrorKind::validation,
            "reference frame " + std::to_string(id) + " is not in the map");
    const std::size_t offset = pool.features.size();
    pool.features.resize(offset + frame->features.size());
    parallel_for(frame->features.size(), [&](std::size_t j) {
      const LocalFeature& f = frame->features[j];
      pool.features[offset + j] = {id, f.feature_id, f.keypoint, code_of(f, dict)};
    });
  }
  return pool;
}

std::uint32_t likelihood_eq1(const BinaryCode& query, const ReferencePool& pool) {
  return nearest_in_pool(query, pool).distance;
}

ChangeScore likelihood_eq3(FrameId query_frame, const LocalFeature& query_feature,
                           const BinaryCode& query_code, const ReferencePool& pool,
                           const MotionVocabulary* motion_vocab, bool query_anomaly_ego,
                           const ScoringOptions& options) {
  require(!pool.empty(), ErrorKind::scoring, "reference pool is empty");
  require(options.neighbours >= 1, ErrorKind::validation, "K must be at least 1");
  require(!options.use_motion || (motion_vocab != nullptr && !motion_vocab->empty()),
          ErrorKind::configuration, "motion term enabled without a motion vocabulary");

  std::vector<Candidate> candidates(pool.features.size());
  for (std::size_t i = 0; i < pool.features.size(); ++i) {
    candidates[i] = {hamming_distance(query_code, pool.features[i].code), i};
  }
  const std::size_t k = std::min<std::size_t>(options.neighbours, candidates.size());
  std::partial_sort(candidates.begin(), candidates.begin() + static_cast<std::ptrdiff_t>(k),
                    candidates.end(),
                    [&](const Candidate& a, const Candidate& b) { return candidate_before(a, b, pool); });
  candidates.resize(k);

  const bool motion_active = options.use_motion && !query_anomaly_ego;
  auto hypothesis = [&](const Candidate& c) {
    return MotionFeature{query_feature.keypoint, pool.features[c.slot].keypoint};
  };
  struct MotionCheck {
    bool anomaly = false;
    double distance = 0.0;
  };
  auto check = [&](const Candidate& c) {
    MotionCheck m;
    if (!motion_active) return m;
    m.distance = nearest_motion_distance(hypothesis(c), *motion_vocab);
    m.anomaly = m.distance > options.motion_threshold;
    return m;
  };

  const MotionCheck shared = options.motion_evaluation == MotionEvaluation::nearest_only
                                 ? check(candidates.front())
                                 : MotionCheck{};
  ChangeScore best;
  best.query_frame = query_frame;
  best.feature_id = query_feature.feature_id;
  best.keypoint = query_feature.keypoint;
  best.likelihood = std::numeric_limits<double>::infinity();
  for (const Candidate& c : candidates) {
    const MotionCheck m =
        options.motion_evaluation == MotionEvaluation::nearest_only ? shared : check(c);
    const double d = static_cast<double>(c.distance);
    const double score = options.motion_term == MotionTerm::literal
                             ? (m.anomaly ? 2.0 * d : d)
                             : d + (m.anomaly ? m.distance : 0.0);
    if (score < best.likelihood) {
      best.likelihood = score;
      best.matched_frame = pool.features[c.slot].frame_id;
      best.matched_feature = pool.features[c.slot].feature_id;
      best.anomaly_motion = m.anomaly;
    }
  }
  return best;
}

DetectionResult detect_changes(const Frame& query, const ViewSequenceMap& map,
                               const BolcfIndex& index, const ProjectionDictionary& dict,
                               const MotionVocabulary* motion_vocab,
                               const DetectionOptions& options) {
  const ScoringOptions& scoring = options.scoring;
  require(!scoring.use_motion || (motion_vocab != nullptr && !motion_vocab->empty()),
          ErrorKind::configuration, "motion term enabled without a motion vocabulary");

  DetectionResult result;
  result.localization = localize(query, index, options.top_r, options.localize);

  std::vector<FrameId> reference_ids;
  for (const RankedFrame& r : result.localization.ranked) {
    reference_ids.push_back(r.frame_id);
    if (options.scope == CandidateScope::top_reference) break;
  }
  const ReferencePool pool = build_reference_pool(map, reference_ids, &dict);
  require(!pool.empty(), ErrorKind::scoring, "retrieved reference frames hold no features");

  if (options.query_anomaly_ego) {
    result.query_anomaly_ego = *options.query_anomaly_ego;
  } else {
    const FrameId top = result.localization.ranked.front().frame_id;
    for (const EgoMotionSegmentLabel& l : options.map_labels) {
      if (l.frame_id == top) result.query_anomaly_ego = l.anomaly;
    }
  }

  result.scores.resize(query.features.size());
  parallel_for(query.features.size(), [&](std::size_t i) {
    const LocalFeature& f = query.features[i];
    const BinaryCode code = code_of(f, &dict);
    if (scoring.use_motion) {
      result.scores[i] =
          likelihood_eq3(query.frame_id, f, code, pool, motion_vocab, result.query_anomaly_ego, scoring);
      return;
    }
    const Candidate nearest = nearest_in_pool(code, pool);
    ChangeScore& s = result.scores[i];
    s.query_frame = query.frame_id;
    s.feature_id = f.feature_id;
    s.keypoint = f.keypoint;
    s.likelihood = static_cast<double>(nearest.distance);
    s.matched_frame = pool.features[nearest.slot].frame_id;
    s.matched_feature = pool.features[nearest.slot].feature_id;
  });
  std::sort(result.scores.begin(), result.scores.end(),
            [](const ChangeScore& a, const ChangeScore& b) { return a.feature_id < b.feature_id; });
  return result;
}

void write_change_scores(std::span<const ChangeScore> scores, const std::filesystem::path& file) {
  std::string text = std::string(kChangesHeader) + "\n";
  for (const ChangeScore& s : scores) {
    text += std::to_string(s.query_frame) + "," + std::to_string(s.feature_id) + "," +
            io::format_float(s.keypoint.x) + "," + io::format_float(s.keypoint.y) + "," +
            io::format_double(s.likelihood) + "," + std::to_string(s.matched_frame) + "," +
            std::to_string(s.matched_feature) + "," + (s.anomaly_motion ? "1" : "0") + "\n";
  }
  io::write_text(file, text);
}

std::vector<ChangeScore> read_change_scores(const std::filesystem::path& file) {
  std::vector<ChangeScore> scores;
  for (const auto& row : io::read_csv(file, kChangesHeader)) {
    ChangeScore s;
    s.query_frame = static_cast<FrameId>(io::parse_int(row[0]));
    s.feature_id = static_cast<FeatureId>(io::parse_int(row[1]));
    s.keypoint.x = static_cast<float>(io::parse_double(row[2]));
    s.keypoint.y = static_cast<float>(io::parse_double(row[3]));
    s.likelihood = io::parse_double(row[4]);
    require(s.likelihood >= 0.0, ErrorKind::validation, "negative likelihood in " + file.string());
    s.matched_frame = static_cast<FrameId>(io::parse_int(row[5]));
    s.matched_feature = static_cast<FeatureId>(io::parse_int(row[6]));
    s.anomaly_motion = io::parse_int(row[7]) != 0;
    scores.push_back(s);
  }
  return scores;
}

}  // namespace scenediff
