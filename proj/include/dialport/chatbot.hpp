#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "dialport/error.hpp"

namespace dialport::chatbot {

DIALPORT_DEFINE_ERROR(EmptyDatabase);
DIALPORT_DEFINE_ERROR(PairFormatError);

/// Score threshold used by the shipped configuration; a response is only
/// returned when the similarity is strictly greater.
inline constexpr double kDefaultThreshold = 0.8;

struct ExamplePair {
  std::string prompt;
  std::string response;
  std::vector<std::string> tags;
};

/// Sparse vector as (dimension, weight) pairs sorted by dimension.
using SparseVector = std::vector<std::pair<std::uint32_t, double>>;

double dot(const SparseVector& a, const SparseVector& b);
double norm(const SparseVector& v);
/// 0 when either side is the zero vector.
double cosine(const SparseVector& a, const SparseVector& b);

/// Maps text to a vector space; the index only ever compares the outputs.
class Embedder {
 public:
  virtual ~Embedder() = default;
  /// Unit-norm embedding, or the empty vector when nothing is in vocabulary.
  virtual SparseVector embed(std::string_view text) const = 0;
};

/// Bag of words weighted by term count times ln(1 + N / df), L2-normalised.
/// Duplicating the whole database leaves every weight unchanged.
class IdfBagOfWords final : public Embedder {
 public:
  explicit IdfBagOfWords(std::span<const std::string> documents);

  SparseVector embed(std::string_view text) const override;
  const std::map<std::string, std::uint32_t>& vocabulary() const { return vocabulary_; }
  double idf(const std::string& token) const;

 private:
  std::map<std::string, std::uint32_t> vocabulary_;
  std::vector<double> idf_;
};

struct Match {
  std::string response;
  double score = 0.0;
  std::size_t row = 0;
};

class EmbeddingIndex {
 public:
  /// Throws EmptyDatabase for an empty list.
  static EmbeddingIndex build(std::vector<ExamplePair> pairs);

  /// Highest-cosine row, lowest row index on ties. A query with no known
  /// token scores 0 against row 0.
  Match best_match(std::string_view utterance) const;

  /// The aligned response iff its score is strictly above `threshold`.
  std::optional<Match> respond(std::string_view utterance, double threshold = kDefaultThreshold) const;

  const std::vector<ExamplePair>& pairs() const { return pairs_; }
  const std::vector<SparseVector>& rows() const { return rows_; }
  const Embedder& embedder() const { return *embedder_; }

 private:
  std::vector<ExamplePair> pairs_;
  std::vector<SparseVector> rows_;
  std::shared_ptr<const IdfBagOfWords> embedder_;
};

/// `prompt <TAB> response [<TAB> tag,tag]` per line; blank lines and lines
/// starting with '#' are skipped.
std::vector<ExamplePair> load_pairs(const std::filesystem::path& path);

}  // namespace dialport::chatbot
