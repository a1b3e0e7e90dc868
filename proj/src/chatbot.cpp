#include "dialport/chatbot.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>

#include "dialport/text.hpp"

namespace dialport::chatbot {

double dot(const SparseVector& a, const SparseVector& b) {
  double sum = 0;
  auto i = a.begin();
  auto j = b.begin();
  while (i != a.end() && j != b.end()) {
    if (i->first < j->first) {
      ++i;
    } else if (j->first < i->first) {
      ++j;
    } else {
      sum += i->second * j->second;
      ++i;
      ++j;
    }
  }
  return sum;
}

double norm(const SparseVector& v) { return std::sqrt(dot(v, v)); }

double cosine(const SparseVector& a, const SparseVector& b) {
  const double na = norm(a);
  const double nb = norm(b);
  if (na == 0.0 || nb == 0.0) return 0.0;
  return dot(a, b) / (na * nb);
}

IdfBagOfWords::IdfBagOfWords(std::span<const std::string> documents) {
  std::map<std::string, std::size_t> df;
  for (const auto& doc : documents) {
    auto tokens = text::words(doc);
    std::set<std::string> unique(tokens.begin(), tokens.end());
    for (const auto& t : unique) ++df[t];
  }
  const double n = static_cast<double>(documents.size());
  std::uint32_t dim = 0;
  for (const auto& [token, count] : df) {
    vocabulary_[token] = dim++;
    idf_.push_back(std::log(1.0 + n / static_cast<double>(count)));
  }
}

double IdfBagOfWords::idf(const std::string& token) const {
  auto it = vocabulary_.find(token);
  return it == vocabulary_.end() ? 0.0 : idf_[it->second];
}

SparseVector IdfBagOfWords::embed(std::string_view input) const {
  std::map<std::uint32_t, double> counts;
  for (const auto& token : text::words(input)) {
    if (auto it = vocabulary_.find(token); it != vocabulary_.end()) counts[it->second] += 1.0;
  }
  SparseVector v;
  for (const auto& [dim, tf] : counts) v.emplace_back(dim, tf * idf_[dim]);
  const double n = norm(v);
  if (n == 0.0) return {};
  for (auto& [_, w] : v) w /= n;
  return v;
}

EmbeddingIndex EmbeddingIndex::build(std::vector<ExamplePair> pairs) {
  if (pairs.empty()) throw EmptyDatabase("chatbot database has no example pairs");
  std::vector<std::string> prompts;
  prompts.reserve(pairs.size());
  for (const auto& p : pairs) prompts.push_back(p.prompt);

  EmbeddingIndex index;
  index.embedder_ = std::make_shared<IdfBagOfWords>(prompts);
  for (const auto& prompt : prompts) index.rows_.push_back(index.embedder_->embed(prompt));
  index.pairs_ = std::move(pairs);
  return index;
}

Match EmbeddingIndex::best_match(std::string_view utterance) const {
  const auto query = embedder_->embed(utterance);
  Match best{pairs_.front().response, 0.0, 0};
  if (query.empty()) return best;
  for (std::size_t row = 0; row < rows_.size(); ++row) {
    const double score = dot(query, rows_[row]);
    if (score > best.score) best = {pairs_[row].response, score, row};
  }
  return best;
}

std::optional<Match> EmbeddingIndex::respond(std::string_view utterance, double threshold) const {
  auto best = best_match(utterance);
  if (best.score > threshold) return best;
  return std::nullopt;
}

std::vector<ExamplePair> load_pairs(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw PairFormatError("cannot open pair database " + path.string());
  std::vector<ExamplePair> pairs;
  std::string raw;
  std::size_t line_no = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    if (!raw.empty() && raw.back() == '\r') raw.pop_back();
    if (text::trim(raw).empty() || raw[0] == '#') continue;
    auto fields = text::split(raw, '\t');
    if (fields.size() < 2 || fields.size() > 3)
      throw PairFormatError(path.string() + ":" + std::to_string(line_no) + ": expected prompt<TAB>response");
    ExamplePair pair{text::trim(fields[0]), text::trim(fields[1]), {}};
    if (pair.prompt.empty() || pair.response.empty())
      throw PairFormatError(path.string() + ":" + std::to_string(line_no) + ": empty prompt or response");
    if (fields.size() == 3) {
      for (const auto& tag : text::split(fields[2], ','))
        if (auto t = text::trim(tag); !t.empty()) pair.tags.push_back(t);
    }
    pairs.push_back(std::move(pair));
  }
  return pairs;
}

}  // namespace dialport::chatbot
