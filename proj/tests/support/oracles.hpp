#pragma once

// Independent re-implementations used to check the library. Nothing here
// calls into the code under test.

#include <cctype>
#include <cmath>
#include <cstdint>
#include <map>
#include <set>
#include <string>
#include <string_view>
#include <vector>

namespace oracle {

inline std::vector<std::string> tokens(std::string_view s) {
  std::vector<std::string> out;
  std::string cur;
  for (unsigned char c : s) {
    if (c >= 0x80 || std::isalnum(c)) {
      cur += static_cast<char>(std::tolower(c));
    } else if (!cur.empty()) {
      out.push_back(cur);
      cur.clear();
    }
  }
  if (!cur.empty()) out.push_back(cur);
  return out;
}

/// Brute-force tf-idf nearest neighbour over a list of prompts.
class BruteForceIndex {
 public:
  explicit BruteForceIndex(const std::vector<std::string>& prompts) {
    const double n = static_cast<double>(prompts.size());
    std::map<std::string, int> df;
    for (const auto& p : prompts) {
      std::set<std::string> seen;
      for (const auto& t : tokens(p)) seen.insert(t);
      for (const auto& t : seen) ++df[t];
    }
    for (const auto& [t, d] : df) idf_[t] = std::log(1.0 + n / d);
    for (const auto& p : prompts) rows_.push_back(vec(p));
  }

  std::map<std::string, double> vec(std::string_view text) const {
    std::map<std::string, double> v;
    for (const auto& t : tokens(text)) {
      auto it = idf_.find(t);
      if (it != idf_.end()) v[t] += it->second;
    }
    double sq = 0;
    for (const auto& [_, w] : v) sq += w * w;
    if (sq > 0)
      for (auto& [_, w] : v) w /= std::sqrt(sq);
    return v;
  }

  static double cosine(const std::map<std::string, double>& a, const std::map<std::string, double>& b) {
    if (a.empty() || b.empty()) return 0.0;
    double d = 0;
    for (const auto& [t, w] : a) {
      auto it = b.find(t);
      if (it != b.end()) d += w * it->second;
    }
    return d;
  }

  /// (row, score) of the best row; lowest row on ties.
  std::pair<std::size_t, double> best(std::string_view query) const {
    auto q = vec(query);
    std::size_t best_row = 0;
    double best_score = -1;
    for (std::size_t i = 0; i < rows_.size(); ++i) {
      double s = cosine(q, rows_[i]);
      if (s > best_score) {
        best_score = s;
        best_row = i;
      }
    }
    return {best_row, best_score};
  }

  const std::map<std::string, double>& idf() const { return idf_; }

 private:
  std::map<std::string, double> idf_;
  std::vector<std::map<std::string, double>> rows_;
};

/// Directed graph with reachability by depth-first search.
struct Graph {
  std::map<std::string, std::set<std::string>> out;

  bool reaches(const std::string& from, const std::string& to) const {
    std::set<std::string> seen;
    std::vector<std::string> todo{from};
    while (!todo.empty()) {
      auto cur = todo.back();
      todo.pop_back();
      if (cur == to) return true;
      if (!seen.insert(cur).second) continue;
      auto it = out.find(cur);
      if (it != out.end())
        for (const auto& n : it->second) todo.push_back(n);
    }
    return false;
  }

  /// Kahn's algorithm; true iff every node can be ordered.
  bool acyclic() const {
    std::map<std::string, int> indeg;
    for (const auto& [n, succ] : out) {
      indeg.try_emplace(n, 0);
      for (const auto& s : succ) ++indeg[s];
    }
    std::vector<std::string> ready;
    for (const auto& [n, d] : indeg)
      if (d == 0) ready.push_back(n);
    std::size_t done = 0;
    while (!ready.empty()) {
      auto n = ready.back();
      ready.pop_back();
      ++done;
      auto it = out.find(n);
      if (it == out.end()) continue;
      for (const auto& s : it->second)
        if (--indeg[s] == 0) ready.push_back(s);
    }
    return done == indeg.size();
  }
};

/// Frame model for the termination cascade: a frame is removed together
/// with everything it (transitively) pushed.
struct Frame {
  int id;
  int parent;
  bool holds;
};

/// One scan: the lowest frame whose predicate holds goes, with its
/// descendants. Returns false when no predicate holds.
inline bool cascade_step(std::vector<Frame>& stack) {
  for (std::size_t i = 0; i < stack.size(); ++i) {
    if (!stack[i].holds) continue;
    std::set<int> gone{stack[i].id};
    std::vector<Frame> kept(stack.begin(), stack.begin() + static_cast<std::ptrdiff_t>(i));
    for (std::size_t j = i + 1; j < stack.size(); ++j) {
      if (gone.count(stack[j].parent)) {
        gone.insert(stack[j].id);
      } else {
        kept.push_back(stack[j]);
      }
    }
    stack = kept;
    return true;
  }
  return false;
}

}  // namespace oracle
