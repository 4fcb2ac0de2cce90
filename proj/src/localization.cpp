#include "scenediff/localization.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "scenediff/error.hpp"
#include "scenediff/io.hpp"
#include "scenediff/parallel.hpp"

namespace scenediff {

namespace {

const DenseVector& dense_descriptor(const LocalFeature& f, const Vocabulary& vocab) {
  const auto* dense = std::get_if<DenseVector>(&f.descriptor);
  require(dense != nullptr, ErrorKind::validation,
          "localization needs dense descriptors, got a binary one");
  require(dense->size() == vocab.dim(), ErrorKind::validation,
          "descriptor dimension " + std::to_string(dense->size()) +
              " does not match vocabulary dimension " + std::to_string(vocab.dim()));
  return *dense;
}

bool is_keyframe(const ViewSequenceMap& map, FrameId id) {
  return std::find(map.keyframe_ids.begin(), map.keyframe_ids.end(), id) != map.keyframe_ids.end();
}

bool ranks_before(const RankedFrame& a, const RankedFrame& b) {
  if (a.distance != b.distance) return a.distance < b.distance;
  return a.frame_id < b.frame_id;
}

}  // namespace

BolcfIndex build_index(const ViewSequenceMap& map, std::shared_ptr<const Vocabulary> vocab,
                       bool keyframes_only) {
  require(vocab != nullptr, ErrorKind::validation, "build_index needs a vocabulary");
  BolcfIndex index;
  index.vocab = vocab;
  std::vector<const Frame*> selected;
  for (const Frame& f : map.frames) {
    if (!keyframes_only || is_keyframe(map, f.frame_id)) selected.push_back(&f);
  }
  index.frames.resize(selected.size());
  parallel_for(selected.size(), [&](std::size_t i) {
    const Frame& frame = *selected[i];
    IndexedFrame& out = index.frames[i];
    out.frame_id = frame.frame_id;
    out.words.reserve(frame.features.size());
    for (const LocalFeature& f : frame.features) {
      out.words.push_back(quantize(dense_descriptor(f, *vocab), *vocab));
    }
  });
  return index;
}

double nbnn_distance(const Frame& query, const std::vector<WordId>& reference_words,
                     const Vocabulary& vocab) {
  require(!reference_words.empty(), ErrorKind::retrieval,
          "NBNN distance to an empty word set is undefined");
  for (WordId w : reference_words) {
    require(w < vocab.word_count(), ErrorKind::validation, "reference word id out of range");
  }
  double total = 0.0;
  for (const LocalFeature& f : query.features) {
    const DenseVector& d = dense_descriptor(f, vocab);
    double best = std::numeric_limits<double>::infinity();
    for (WordId w : reference_words) {
      best = std::min(best, std::sqrt(squared_distance(d, vocab.exemplar(w))));
    }
    total += best;
  }
  return total;
}

LocalizationResult localize(const Frame& query, const BolcfIndex& index, std::uint32_t top_r,
                            const LocalizeOptions& options) {
  require(top_r >= 1, ErrorKind::validation, "R must be at least 1");
  require(!index.empty(), ErrorKind::retrieval, "cannot localize against an empty index");
  require(index.vocab != nullptr, ErrorKind::validation, "index has no vocabulary");
  const Vocabulary& vocab = *index.vocab;

  std::vector<const DenseVector*> descriptors;
  descriptors.reserve(query.features.size());
  for (const LocalFeature& f : query.features) descriptors.push_back(&dense_descriptor(f, vocab));

  std::vector<const IndexedFrame*> candidates;
  for (const IndexedFrame& f : index.frames) {
    if (!f.words.empty()) candidates.push_back(&f);
  }
  if (options.inverted_shortlist) {
    std::vector<bool> query_words(vocab.word_count(), false);
    for (const DenseVector* d : descriptors) query_words[quantize(*d, vocab)] = true;
    std::vector<const IndexedFrame*> shortlist;
    for (const IndexedFrame* f : candidates) {
      if (std::any_of(f->words.begin(), f->words.end(), [&](WordId w) { return query_words[w]; })) {
        shortlist.push_back(f);
      }
    }
    if (shortlist.size() >= top_r) candidates = std::move(shortlist);
  }
  require(!candidates.empty(), ErrorKind::retrieval, "index holds no frame with features");

  // Distance from every query feature to every exemplar referenced by a
  // candidate frame, computed once and shared by all frames.
  constexpr std::uint32_t kUnused = std::numeric_limits<std::uint32_t>::max();
  std::vector<std::uint32_t> column(vocab.word_count(), kUnused);
  std::vector<WordId> words;
  for (const IndexedFrame* f : candidates) {
    for (WordId w : f->words) {
      require(w < vocab.word_count(), ErrorKind::validation, "indexed word id out of range");
      if (column[w] == kUnused) {
        column[w] = static_cast<std::uint32_t>(words.size());
        words.push_back(w);
      }
    }
  }
  const std::size_t nq = descriptors.size();
  const std::size_t nw = words.size();
  std::vector<double> table(nq * nw);
  parallel_for(nq, [&](std::size_t q) {
    for (std::size_t c = 0; c < nw; ++c) {
      table[q * nw + c] = std::sqrt(squared_distance(*descriptors[q], vocab.exemplar(words[c])));
    }
  });

  std::vector<RankedFrame> scored(candidates.size());
  parallel_for(candidates.size(), [&](std::size_t i) {
    const IndexedFrame& frame = *candidates[i];
    std::vector<std::uint32_t> cols;
    cols.reserve(frame.words.size());
    for (WordId w : frame.words) cols.push_back(column[w]);
    std::sort(cols.begin(), cols.end());
    cols.erase(std::unique(cols.begin(), cols.end()), cols.end());
    double total = 0.0;
    for (std::size_t q = 0; q < nq; ++q) {
      const double* row = table.data() + q * nw;
      double best = std::numeric_limits<double>::infinity();
      for (std::uint32_t c : cols) best = std::min(best, row[c]);
      total += best;
    }
    scored[i] = {frame.frame_id, total};
  });

  const std::size_t keep = std::min<std::size_t>(top_r, scored.size());
  std::partial_sort(scored.begin(), scored.begin() + static_cast<std::ptrdiff_t>(keep),
                    scored.end(), ranks_before);
  scored.resize(keep);
  return LocalizationResult{std::move(scored)};
}

void write_index(const BolcfIndex& index, const std::filesystem::path& file) {
  io::BinaryWriter out;
  out.magic("BIF1");
  out.u32(static_cast<std::uint32_t>(index.frames.size()));
  for (const IndexedFrame& f : index.frames) {
    out.u32(f.frame_id);
    out.u32(static_cast<std::uint32_t>(f.words.size()));
    for (WordId w : f.words) out.u32(w);
  }
  out.save(file);
}

BolcfIndex read_index(const std::filesystem::path& file, std::shared_ptr<const Vocabulary> vocab) {
  require(vocab != nullptr, ErrorKind::validation, "read_index needs a vocabulary");
  io::BinaryReader in(file);
  in.expect_magic("BIF1");
  BolcfIndex index;
  index.vocab = vocab;
  const std::uint32_t frames = in.u32();
  index.frames.reserve(frames);
  for (std::uint32_t i = 0; i < frames; ++i) {
    IndexedFrame f;
    f.frame_id = in.u32();
    const std::uint32_t count = in.u32();
    require(in.remaining() >= 4ull * count, ErrorKind::format, file.string() + ": truncated file");
    f.words.resize(count);
    for (WordId& w : f.words) {
      w = in.u32();
      require(w < vocab->word_count(), ErrorKind::validation,
              file.string() + ": word id exceeds the vocabulary");
    }
    index.frames.push_back(std::move(f));
  }
  in.expect_end();
  return index;
}

}  // namespace scenediff
