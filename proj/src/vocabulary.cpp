#include "scenediff/vocabulary.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>

#include "scenediff/error.hpp"
#include "scenediff/io.hpp"
#include "scenediff/parallel.hpp"
#include "scenediff/rng.hpp"

namespace scenediff {

Vocabulary::Vocabulary(std::uint32_t dim, std::vector<float> centroids, std::vector<float> exemplars)
    : dim_(dim), centroids_(std::move(centroids)), exemplars_(std::move(exemplars)) {
  require(dim_ > 0, ErrorKind::validation, "vocabulary dimension must be positive");
  require(centroids_.size() % dim_ == 0 && centroids_.size() == exemplars_.size(),
          ErrorKind::validation, "vocabulary centroid/exemplar tables are inconsistent");
  word_count_ = static_cast<std::uint32_t>(centroids_.size() / dim_);
  word_bits_ = word_count_ <= 1 ? 0 : static_cast<std::uint32_t>(std::bit_width(word_count_ - 1));
}

double squared_distance(std::span<const float> a, std::span<const float> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = static_cast<double>(a[i]) - static_cast<double>(b[i]);
    s += d * d;
  }
  return s;
}

namespace {

double squared_distance(std::span<const float> a, const double* b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = static_cast<double>(a[i]) - b[i];
    s += d * d;
  }
  return s;
}

std::size_t count_distinct(std::span<const DenseVector> points) {
  std::vector<std::size_t> order(points.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return points[a] < points[b]; });
  std::size_t distinct = 0;
  for (std::size_t i = 0; i < order.size(); ++i) {
    if (i == 0 || points[order[i]] != points[order[i - 1]]) ++distinct;
  }
  return distinct;
}

struct Assignment {
  std::uint32_t word = 0;
  double distance = 0.0;
};

void assign_points(std::span<const DenseVector> points, const std::vector<double>& centers,
                   std::size_t k, std::size_t dim, std::vector<Assignment>& out) {
  parallel_for(points.size(), [&](std::size_t i) {
    Assignment best{0, std::numeric_limits<double>::infinity()};
    for (std::size_t w = 0; w < k; ++w) {
      const double d = squared_distance(points[i], centers.data() + w * dim);
      if (d < best.distance) best = {static_cast<std::uint32_t>(w), d};
    }
    out[i] = best;
  });
}

std::vector<double> seed_plus_plus(std::span<const DenseVector> points, std::size_t k,
                                   std::size_t dim, PortableRng& rng) {
  const std::size_t n = points.size();
  std::vector<double> centers;
  centers.reserve(k * dim);
  std::vector<double> nearest(n, std::numeric_limits<double>::infinity());

  auto add_center = [&](std::size_t idx) {
    const std::size_t offset = centers.size();
    for (float c : points[idx]) centers.push_back(c);
    parallel_for(n, [&](std::size_t i) {
      nearest[i] = std::min(nearest[i], squared_distance(points[i], centers.data() + offset));
    });
  };

  add_center(static_cast<std::size_t>(rng.index(n)));
  while (centers.size() < k * dim) {
    double total = 0.0;
    for (double d : nearest) total += d;
    const double target = rng.uniform() * total;
    std::size_t chosen = n;
    std::size_t last_positive = n;
    double cumulative = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      if (nearest[i] <= 0.0) continue;
      last_positive = i;
      cumulative += nearest[i];
      if (cumulative > target) {
        chosen = i;
        break;
      }
    }
    if (chosen == n) chosen = last_positive;
    if (chosen == n) fail(ErrorKind::learning, "k-means++ ran out of distinct points");
    add_center(chosen);
  }
  return centers;
}

}  // namespace

Vocabulary learn_vocabulary(std::span<const DenseVector> training_features,
                            std::uint32_t word_count, std::uint64_t seed,
                            const KMeansOptions& options) {
  require(!training_features.empty(), ErrorKind::learning, "no training features");
  require(word_count >= 1, ErrorKind::learning, "word_count must be at least 1");
  const std::size_t dim = training_features.front().size();
  require(dim > 0, ErrorKind::validation, "training features must be non-empty vectors");
  for (const auto& f : training_features) {
    require(f.size() == dim, ErrorKind::validation, "training features differ in dimension");
  }
  const std::size_t distinct = count_distinct(training_features);
  require(word_count <= distinct, ErrorKind::learning,
          "word_count " + std::to_string(word_count) + " exceeds the " +
              std::to_string(distinct) + " distinct training features");

  const std::size_t n = training_features.size();
  const std::size_t k = word_count;
  PortableRng rng(seed);
  std::vector<double> centers = seed_plus_plus(training_features, k, dim, rng);

  std::vector<Assignment> assignment(n);
  std::vector<std::uint32_t> previous(n, std::numeric_limits<std::uint32_t>::max());
  std::vector<double> sums(k * dim);
  std::vector<std::size_t> counts(k);
  for (std::uint32_t iter = 0; iter < options.max_iterations; ++iter) {
    assign_points(training_features, centers, k, dim, assignment);
    bool changed = false;
    for (std::size_t i = 0; i < n; ++i) {
      changed |= assignment[i].word != previous[i];
      previous[i] = assignment[i].word;
    }
    if (!changed) break;

    std::fill(sums.begin(), sums.end(), 0.0);
    std::fill(counts.begin(), counts.end(), 0);
    for (std::size_t i = 0; i < n; ++i) {
      const std::size_t w = assignment[i].word;
      ++counts[w];
      for (std::size_t c = 0; c < dim; ++c) sums[w * dim + c] += training_features[i][c];
    }

    // Empty clusters take over the worst-fit points, farthest first.
    std::vector<bool> taken(n, false);
    double shift = 0.0;
    double norm = 0.0;
    for (std::size_t w = 0; w < k; ++w) {
      std::vector<double> updated(dim);
      if (counts[w] > 0) {
        for (std::size_t c = 0; c < dim; ++c) updated[c] = sums[w * dim + c] / counts[w];
      } else {
        std::size_t worst = n;
        for (std::size_t i = 0; i < n; ++i) {
          if (taken[i]) continue;
          if (worst == n || assignment[i].distance > assignment[worst].distance) worst = i;
        }
        taken[worst] = true;
        for (std::size_t c = 0; c < dim; ++c) updated[c] = training_features[worst][c];
      }
      for (std::size_t c = 0; c < dim; ++c) {
        const double old = centers[w * dim + c];
        shift += (updated[c] - old) * (updated[c] - old);
        norm += old * old;
        centers[w * dim + c] = updated[c];
      }
    }
    if (norm > 0.0 ? std::sqrt(shift / norm) < options.relative_tolerance : shift == 0.0) break;
  }

  std::vector<float> centroid_table(k * dim);
  for (std::size_t i = 0; i < k * dim; ++i) centroid_table[i] = static_cast<float>(centers[i]);

  std::vector<float> exemplar_table(k * dim);
  parallel_for(k, [&](std::size_t w) {
    const std::span<const float> c(centroid_table.data() + w * dim, dim);
    std::size_t best = 0;
    double best_d = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < n; ++i) {
      const double d = squared_distance(training_features[i], c);
      if (d < best_d) {
        best_d = d;
        best = i;
      }
    }
    std::copy(training_features[best].begin(), training_features[best].end(),
              exemplar_table.begin() + static_cast<std::ptrdiff_t>(w * dim));
  });
  return Vocabulary(static_cast<std::uint32_t>(dim), std::move(centroid_table),
                    std::move(exemplar_table));
}

WordId quantize(std::span<const float> descriptor, const Vocabulary& vocab) {
  require(descriptor.size() == vocab.dim(), ErrorKind::validation,
          "descriptor dimension " + std::to_string(descriptor.size()) +
              " does not match vocabulary dimension " + std::to_string(vocab.dim()));
  require(vocab.word_count() > 0, ErrorKind::validation, "empty vocabulary");
  WordId best = 0;
  double best_d = std::numeric_limits<double>::infinity();
  for (WordId w = 0; w < vocab.word_count(); ++w) {
    const double d = squared_distance(descriptor, vocab.centroid(w));
    if (d < best_d) {
      best_d = d;
      best = w;
    }
  }
  return best;
}

std::span<const float> exemplar_of(WordId word, const Vocabulary& vocab) {
  require(word < vocab.word_count(), ErrorKind::validation,
          "word id " + std::to_string(word) + " out of range for " +
              std::to_string(vocab.word_count()) + " words");
  return vocab.exemplar(word);
}

void write_vocabulary(const Vocabulary& vocab, const std::filesystem::path& file) {
  io::BinaryWriter out;
  out.magic("VVF1");
  out.u32(vocab.word_count());
  out.u32(vocab.dim());
  for (float v : vocab.centroid_data()) out.f32(v);
  for (float v : vocab.exemplar_data()) out.f32(v);
  out.save(file);
}

Vocabulary read_vocabulary(const std::filesystem::path& file) {
  io::BinaryReader in(file);
  in.expect_magic("VVF1");
  const std::uint32_t words = in.u32();
  const std::uint32_t dim = in.u32();
  const std::size_t n = static_cast<std::size_t>(words) * dim;
  require(in.remaining() == 8 * n, ErrorKind::format,
          file.string() + ": size does not match the declared vocabulary");
  std::vector<float> centroids(n), exemplars(n);
  for (float& v : centroids) v = in.f32();
  for (float& v : exemplars) v = in.f32();
  return Vocabulary(dim, std::move(centroids), std::move(exemplars));
}

ProjectionDictionary::ProjectionDictionary(std::uint64_t seed, std::uint32_t bits,
                                           std::uint32_t input_dim)
    : seed_(seed), bits_(bits), input_dim_(input_dim) {
  require(bits > 0 && bits % 8 == 0, ErrorKind::validation,
          "projection bits must be a positive multiple of 8");
  require(input_dim > 0, ErrorKind::validation, "projection input dimension must be positive");
  PortableRng rng(seed);
  rows_.resize(static_cast<std::size_t>(bits) * input_dim);
  for (double& v : rows_) v = rng.normal();
}

BinaryCode binarize(std::span<const float> descriptor, const ProjectionDictionary& dict) {
  require(descriptor.size() == dict.input_dim(), ErrorKind::validation,
          "descriptor dimension " + std::to_string(descriptor.size()) +
              " does not match projection input dimension " + std::to_string(dict.input_dim()));
  BinaryCode code(dict.bits());
  for (std::uint32_t r = 0; r < dict.bits(); ++r) {
    const auto row = dict.row(r);
    double dot = 0.0;
    for (std::size_t c = 0; c < descriptor.size(); ++c) dot += row[c] * descriptor[c];
    if (dot > 0.0) code.set_bit(r);
  }
  return code;
}

}  // namespace scenediff
