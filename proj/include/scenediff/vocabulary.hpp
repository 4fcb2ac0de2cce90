#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "scenediff/types.hpp"

namespace scenediff {

/// Fine visual vocabulary: k-means centroids plus, per word, the training
/// feature nearest to the centroid (its exemplar). Rows are stored flat.
class Vocabulary {
 public:
  Vocabulary() = default;
  Vocabulary(std::uint32_t dim, std::vector<float> centroids, std::vector<float> exemplars);

  std::uint32_t word_count() const { return word_count_; }
  std::uint32_t dim() const { return dim_; }
  /// ceil(log2(word_count)); 0 for a single word.
  std::uint32_t word_bits() const { return word_bits_; }

  std::span<const float> centroid(WordId w) const {
    return {centroids_.data() + static_cast<std::size_t>(w) * dim_, dim_};
  }
  std::span<const float> exemplar(WordId w) const {
    return {exemplars_.data() + static_cast<std::size_t>(w) * dim_, dim_};
  }

  const std::vector<float>& centroid_data() const { return centroids_; }
  const std::vector<float>& exemplar_data() const { return exemplars_; }

  friend bool operator==(const Vocabulary&, const Vocabulary&) = default;

 private:
  std::uint32_t dim_ = 0;
  std::uint32_t word_count_ = 0;
  std::uint32_t word_bits_ = 0;
  std::vector<float> centroids_;
  std::vector<float> exemplars_;
};

struct KMeansOptions {
  std::uint32_t max_iterations = 100;
  /// Stop once sqrt(sum |c_new - c_old|^2 / sum |c_old|^2) drops below this.
  double relative_tolerance = 1e-4;
};

/// k-means++ seeding followed by Lloyd iterations. Deterministic for a seed:
/// assignments are computed independently per point and centroid sums are
/// reduced in point order.
Vocabulary learn_vocabulary(std::span<const DenseVector> training_features,
                            std::uint32_t word_count, std::uint64_t seed,
                            const KMeansOptions& options = {});

/// Nearest centroid by Euclidean distance, ties to the smallest word id.
WordId quantize(std::span<const float> descriptor, const Vocabulary& vocab);

std::span<const float> exemplar_of(WordId word, const Vocabulary& vocab);

double squared_distance(std::span<const float> a, std::span<const float> b);

/// `vocab.vvf`: "VVF1", u32 word count, u32 dim, centroids, exemplars (f32).
void write_vocabulary(const Vocabulary& vocab, const std::filesystem::path& file);
Vocabulary read_vocabulary(const std::filesystem::path& file);

/// Random hyperplane dictionary mapping dense descriptors to B-bit codes.
/// Row r, component c is the (r * input_dim + c)-th PortableRng::normal()
/// draw for the seed.
class ProjectionDictionary {
 public:
  ProjectionDictionary(std::uint64_t seed, std::uint32_t bits, std::uint32_t input_dim);

  std::uint64_t seed() const { return seed_; }
  std::uint32_t bits() const { return bits_; }
  std::uint32_t input_dim() const { return input_dim_; }
  std::span<const double> row(std::uint32_t r) const {
    return {rows_.data() + static_cast<std::size_t>(r) * input_dim_, input_dim_};
  }

 private:
  std::uint64_t seed_;
  std::uint32_t bits_;
  std::uint32_t input_dim_;
  std::vector<double> rows_;
};

/// Bit r is set iff dot(row r, descriptor) > 0; an exact zero gives 0.
BinaryCode binarize(std::span<const float> descriptor, const ProjectionDictionary& dict);

}  // namespace scenediff
