#pragma once

#include <cstddef>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "fscil/data/image.hpp"

namespace fscil::data {

enum class Partition { kTrain, kTest };

std::string to_string(Partition partition);

// Pixel box, inclusive-exclusive: x0 <= x < x1, y0 <= y < y1.
struct Box {
  int x0 = 0;
  int y0 = 0;
  int x1 = 0;
  int y1 = 0;

  int area() const { return (x1 - x0) * (y1 - y0); }
  bool overlaps(const Box& other) const {
    return x0 < other.x1 && other.x0 < x1 && y0 < other.y1 && other.y0 < y1;
  }
  int intersection_area(const Box& other) const;
  friend bool operator==(const Box&, const Box&) = default;
};

struct RegionAnnotation {
  Box signal;
  std::optional<Box> nuisance;
  friend bool operator==(const RegionAnnotation&, const RegionAnnotation&) = default;
};

struct SampleInfo {
  std::string id;
  int label = 0;  // index into class_names()
  friend bool operator==(const SampleInfo&, const SampleInfo&) = default;
};

// Read-only view of a labelled image collection with a train/test split.
// Implementations must tolerate concurrent readers.
class DatasetAdapter {
 public:
  virtual ~DatasetAdapter() = default;

  virtual const std::string& name() const = 0;
  virtual const std::vector<std::string>& class_names() const = 0;
  virtual const std::vector<SampleInfo>& samples(Partition partition) const = 0;
  virtual Image load(Partition partition, std::size_t index) const = 0;
  virtual bool has_images() const { return true; }
  virtual const RegionAnnotation* regions(Partition, std::size_t) const { return nullptr; }

  int class_count() const { return static_cast<int>(class_names().size()); }
};

// Images held in memory; the synthetic generator produces these.
class InMemoryDataset final : public DatasetAdapter {
 public:
  InMemoryDataset(std::string name, std::vector<std::string> class_names);

  void add(Partition partition, SampleInfo info, Image image,
           std::optional<RegionAnnotation> regions = std::nullopt);

  const std::string& name() const override { return name_; }
  const std::vector<std::string>& class_names() const override { return class_names_; }
  const std::vector<SampleInfo>& samples(Partition partition) const override;
  Image load(Partition partition, std::size_t index) const override;
  const RegionAnnotation* regions(Partition partition, std::size_t index) const override;
  bool has_annotations() const { return annotated_; }

 private:
  struct Split {
    std::vector<SampleInfo> info;
    std::vector<Image> images;
    std::vector<std::optional<RegionAnnotation>> regions;
  };
  const Split& split(Partition p) const { return p == Partition::kTrain ? train_ : test_; }

  std::string name_;
  std::vector<std::string> class_names_;
  Split train_;
  Split test_;
  bool annotated_ = false;
};

// Directory layout: <root>/<class_id>/<sample>.png plus index.json, and
// regions.json for annotated (synthetic) datasets. Images decode on demand.
class DirectoryDataset final : public DatasetAdapter {
 public:
  explicit DirectoryDataset(std::filesystem::path root);

  const std::string& name() const override { return name_; }
  const std::vector<std::string>& class_names() const override { return class_names_; }
  const std::vector<SampleInfo>& samples(Partition partition) const override;
  Image load(Partition partition, std::size_t index) const override;
  const RegionAnnotation* regions(Partition partition, std::size_t index) const override;

 private:
  std::filesystem::path root_;
  std::string name_;
  std::vector<std::string> class_names_;
  std::vector<SampleInfo> train_;
  std::vector<SampleInfo> test_;
  std::vector<std::optional<RegionAnnotation>> train_regions_;
  std::vector<std::optional<RegionAnnotation>> test_regions_;
};

// Class and sample counts only, no pixels. Enough to build and check a
// schedule for a benchmark without having the images on disk.
class IndexOnlyDataset final : public DatasetAdapter {
 public:
  IndexOnlyDataset(std::string name, int class_count, int train_per_class, int test_per_class);

  const std::string& name() const override { return name_; }
  const std::vector<std::string>& class_names() const override { return class_names_; }
  const std::vector<SampleInfo>& samples(Partition partition) const override;
  Image load(Partition partition, std::size_t index) const override;
  bool has_images() const override { return false; }

 private:
  std::string name_;
  std::vector<std::string> class_names_;
  std::vector<SampleInfo> train_;
  std::vector<SampleInfo> test_;
};

// Writes any image-bearing adapter in the directory layout DirectoryDataset reads.
void write_dataset(const DatasetAdapter& adapter, const std::filesystem::path& root);

}  // namespace fscil::data
