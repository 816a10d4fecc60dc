#pragma once

#include <limits>
#include <string>
#include <utility>
#include <vector>

#include "asos/data/manifest.hpp"
#include "asos/data/sample.hpp"

namespace asos::data {

/// Sequential access to a dataset. The returned reference stays valid only
/// until the next get(); disk-backed sources reuse one slot to keep memory
/// flat regardless of dataset size.
class SampleSource {
 public:
  virtual ~SampleSource() = default;
  virtual std::size_t size() const = 0;
  virtual const RasterSample& get(std::size_t i) const = 0;
};

class MemorySource final : public SampleSource {
 public:
  explicit MemorySource(std::vector<RasterSample> samples)
      : samples_(std::move(samples)) {}

  std::size_t size() const override { return samples_.size(); }
  const RasterSample& get(std::size_t i) const override {
    return samples_.at(i);
  }

 private:
  std::vector<RasterSample> samples_;
};

/// Loads rasters from disk on demand, one resident sample at a time.
class FileSource final : public SampleSource {
 public:
  FileSource(std::string root, std::vector<ManifestEntry> entries)
      : root_(std::move(root)), entries_(std::move(entries)) {}

  std::size_t size() const override { return entries_.size(); }

  const RasterSample& get(std::size_t i) const override {
    if (i != cached_index_) {
      cache_ = load_sample(root_, entries_.at(i));
      cached_index_ = i;
    }
    return cache_;
  }

  const ManifestEntry& entry(std::size_t i) const { return entries_.at(i); }

 private:
  std::string root_;
  std::vector<ManifestEntry> entries_;
  mutable RasterSample cache_;
  mutable std::size_t cached_index_ = std::numeric_limits<std::size_t>::max();
};

/// View over another source restricted to the given indices (subset splits).
class SubsetSource final : public SampleSource {
 public:
  SubsetSource(const SampleSource& base, std::vector<std::size_t> indices)
      : base_(base), indices_(std::move(indices)) {}

  std::size_t size() const override { return indices_.size(); }
  const RasterSample& get(std::size_t i) const override {
    return base_.get(indices_.at(i));
  }

 private:
  const SampleSource& base_;
  std::vector<std::size_t> indices_;
};

}  // namespace asos::data
