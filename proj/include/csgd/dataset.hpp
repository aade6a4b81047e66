#pragma once

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <istream>
#include <numeric>
#include <optional>
#include <ostream>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "errors.hpp"
#include "rng.hpp"
#include "types.hpp"

namespace csgd {

enum class DataKind { binary, count };

inline std::string to_string(DataKind k) { return k == DataKind::binary ? "binary" : "count"; }

inline DataKind parse_data_kind(const std::string& s) {
  if (s == "binary") return DataKind::binary;
  if (s == "count") return DataKind::count;
  throw ConfigError("unknown data kind '" + s + "'");
}

// Immutable n x p integer matrix. Rows flagged as holdout are excluded from
// every fitting computation; "training index" i refers to the i-th non-holdout row.
class Dataset {
 public:
  Dataset() = default;

  Dataset(std::vector<int> values, Index n, Index p, DataKind kind,
          std::vector<bool> holdout_mask = {})
      : values_(std::move(values)), n_(n), p_(p), kind_(kind), mask_(std::move(holdout_mask)) {
    if (n_ < 1 || p_ < 2) throw DataError("dataset needs n >= 1 and p >= 2");
    if (static_cast<Index>(values_.size()) != n_ * p_)
      throw DataError("dataset storage does not match n x p");
    for (int v : values_) {
      if (v < 0) throw DataError("negative entry in dataset");
      if (kind_ == DataKind::binary && v > 1) throw DataError("binary dataset has entry > 1");
    }
    if (!mask_.empty() && static_cast<Index>(mask_.size()) != n_)
      throw DataError("holdout mask length differs from n");
    for (Index i = 0; i < n_; ++i) {
      if (!mask_.empty() && mask_[i])
        holdout_.push_back(i);
      else
        training_.push_back(i);
    }
    if (training_.empty()) throw DataError("holdout mask leaves no training rows");
  }

  Index rows() const noexcept { return n_; }
  Index cols() const noexcept { return p_; }
  DataKind kind() const noexcept { return kind_; }
  bool has_holdout() const noexcept { return !holdout_.empty(); }
  const std::vector<bool>& holdout_mask() const noexcept { return mask_; }

  std::span<const int> row(Index i) const {
    if (i < 0 || i >= n_) throw IndexError("row index out of range");
    return {values_.data() + i * p_, static_cast<std::size_t>(p_)};
  }

  Index n_train() const noexcept { return static_cast<Index>(training_.size()); }
  Index n_holdout() const noexcept { return static_cast<Index>(holdout_.size()); }
  const std::vector<Index>& training_rows() const noexcept { return training_; }
  const std::vector<Index>& holdout_rows() const noexcept { return holdout_; }

  // Row of the i-th training observation, unchecked.
  std::span<const int> train_row(Index i) const noexcept {
    return {values_.data() + training_[i] * p_, static_cast<std::size_t>(p_)};
  }

  const std::vector<int>& values() const noexcept { return values_; }

  Dataset with_holdout(std::vector<bool> mask) const {
    return Dataset(values_, n_, p_, kind_, std::move(mask));
  }

  Dataset subset(std::span<const Index> rows) const {
    std::vector<int> v;
    v.reserve(rows.size() * p_);
    for (Index r : rows) {
      auto s = row(r);
      v.insert(v.end(), s.begin(), s.end());
    }
    return Dataset(std::move(v), static_cast<Index>(rows.size()), p_, kind_);
  }

  Dataset training() const { return subset(training_); }
  Dataset holdout() const {
    if (holdout_.empty()) throw DataError("dataset has no holdout rows");
    return subset(holdout_);
  }

 private:
  std::vector<int> values_;
  Index n_ = 0;
  Index p_ = 0;
  DataKind kind_ = DataKind::binary;
  std::vector<bool> mask_;
  std::vector<Index> training_;
  std::vector<Index> holdout_;
};

// Exactly round(frac * n) rows chosen uniformly at random.
inline std::vector<bool> random_holdout_mask(Index n, double frac, std::uint64_t seed) {
  if (!(frac >= 0.0 && frac < 1.0)) throw ConfigError("holdout fraction must be in [0,1)");
  std::vector<Index> perm(n);
  std::iota(perm.begin(), perm.end(), Index{0});
  Philox4x32 rng(seed, stream_domain::holdout, 0, 0);
  for (Index i = n - 1; i > 0; --i) std::swap(perm[i], perm[uniform_index(rng, i + 1)]);
  const auto m = static_cast<Index>(std::llround(frac * static_cast<double>(n)));
  std::vector<bool> mask(n, false);
  for (Index i = 0; i < m; ++i) mask[perm[i]] = true;
  return mask;
}

inline Dataset read_csv(std::istream& in, DataKind kind) {
  std::vector<int> values;
  Index n = 0, p = -1;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string cell;
    Index cols = 0;
    while (std::getline(ss, cell, ',')) {
      std::size_t pos = 0;
      int v = 0;
      try {
        v = std::stoi(cell, &pos);
      } catch (const std::exception&) {
        throw DataError("non-integer cell '" + cell + "' on line " + std::to_string(n + 1));
      }
      if (cell.find_first_not_of(" \t", pos) != std::string::npos)
        throw DataError("non-integer cell '" + cell + "' on line " + std::to_string(n + 1));
      values.push_back(v);
      ++cols;
    }
    if (p < 0) p = cols;
    if (cols != p) throw DataError("ragged row " + std::to_string(n + 1));
    ++n;
  }
  if (n == 0) throw DataError("empty dataset");
  return Dataset(std::move(values), n, p, kind);
}

inline void write_csv(std::ostream& out, const Dataset& d) {
  for (Index i = 0; i < d.rows(); ++i) {
    auto r = d.row(i);
    for (Index j = 0; j < d.cols(); ++j) {
      if (j) out << ',';
      out << r[j];
    }
    out << '\n';
  }
}

// Kind comes from the explicit argument, else from a "<file>.meta" sidecar line "kind=...".
inline Dataset load_csv(const std::filesystem::path& path, std::optional<DataKind> kind = {}) {
  if (!kind) {
    std::ifstream meta(path.string() + ".meta");
    std::string line;
    while (meta && std::getline(meta, line)) {
      if (line.rfind("kind=", 0) == 0) kind = parse_data_kind(line.substr(5));
    }
    if (!kind) throw ConfigError("data kind not given and no sidecar " + path.string() + ".meta");
  }
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path.string());
  return read_csv(in, *kind);
}

inline void save_csv(const std::filesystem::path& path, const Dataset& d) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path.string());
  write_csv(out, d);
  std::ofstream meta(path.string() + ".meta");
  meta << "kind=" << to_string(d.kind()) << '\n';
}

}  // namespace csgd
