#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <vector>

#include "scenediff/types.hpp"
#include "scenediff/vocabulary.hpp"

namespace scenediff {

inline constexpr std::uint32_t kDefaultTopR = 10;

struct IndexedFrame {
  FrameId frame_id = 0;
  /// Word id of every feature, in feature order (a multiset).
  std::vector<WordId> words;

  friend bool operator==(const IndexedFrame&, const IndexedFrame&) = default;
};

/// Bag-of-words view of the map: each indexed frame reduced to the words of
/// its dense local features, plus the vocabulary that resolves exemplars.
struct BolcfIndex {
  std::shared_ptr<const Vocabulary> vocab;
  std::vector<IndexedFrame> frames;

  bool empty() const { return frames.empty(); }
};

struct RankedFrame {
  FrameId frame_id = 0;
  double distance = 0.0;

  friend bool operator==(const RankedFrame&, const RankedFrame&) = default;
};

/// Ascending by NBNN distance, ties to the smaller frame id.
struct LocalizationResult {
  std::vector<RankedFrame> ranked;
};

BolcfIndex build_index(const ViewSequenceMap& map, std::shared_ptr<const Vocabulary> vocab,
                       bool keyframes_only);

/// Sum over query features of the Euclidean distance to the nearest exemplar
/// among `reference_words`. Throws ErrorKind::retrieval for an empty word set.
double nbnn_distance(const Frame& query, const std::vector<WordId>& reference_words,
                     const Vocabulary& vocab);

struct LocalizeOptions {
  /// Restrict the exact scan to frames sharing at least one word with the
  /// query; falls back to the full scan when fewer than R frames qualify.
  bool inverted_shortlist = false;
};

LocalizationResult localize(const Frame& query, const BolcfIndex& index, std::uint32_t top_r,
                            const LocalizeOptions& options = {});

/// `index.bif`: "BIF1", u32 frame count, then per frame u32 frame id,
/// u32 word count, u32 word ids.
void write_index(const BolcfIndex& index, const std::filesystem::path& file);
BolcfIndex read_index(const std::filesystem::path& file, std::shared_ptr<const Vocabulary> vocab);

}  // namespace scenediff
