#include "fscil/data/dataset.hpp"

#include <algorithm>
#include <fstream>
#include <map>
#include <stdexcept>

#include <nlohmann/json.hpp>

namespace fscil::data {

using nlohmann::json;

std::string to_string(Partition partition) {
  return partition == Partition::kTrain ? "train" : "test";
}

int Box::intersection_area(const Box& other) const {
  const int w = std::min(x1, other.x1) - std::max(x0, other.x0);
  const int h = std::min(y1, other.y1) - std::max(y0, other.y0);
  return (w > 0 && h > 0) ? w * h : 0;
}

namespace {

Partition partition_from_string(const std::string& text) {
  if (text == "train") return Partition::kTrain;
  if (text == "test") return Partition::kTest;
  throw std::invalid_argument("unknown partition '" + text + "'");
}

json box_to_json(const Box& b) { return {b.x0, b.y0, b.x1, b.y1}; }

Box box_from_json(const json& j) {
  auto v = j.get<std::vector<int>>();
  if (v.size() != 4) throw std::invalid_argument("box must have four coordinates");
  return {v[0], v[1], v[2], v[3]};
}

json read_json(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  return json::parse(in);
}

void check_index(std::size_t index, std::size_t size, const char* who) {
  if (index >= size) throw std::out_of_range(std::string(who) + ": sample index out of range");
}

}  // namespace

InMemoryDataset::InMemoryDataset(std::string name, std::vector<std::string> class_names)
    : name_(std::move(name)), class_names_(std::move(class_names)) {}

void InMemoryDataset::add(Partition partition, SampleInfo info, Image image,
                          std::optional<RegionAnnotation> regions) {
  if (info.label < 0 || info.label >= class_count()) {
    throw std::invalid_argument("InMemoryDataset: label outside the class list");
  }
  if (regions) annotated_ = true;
  Split& s = partition == Partition::kTrain ? train_ : test_;
  s.info.push_back(std::move(info));
  s.images.push_back(std::move(image));
  s.regions.push_back(std::move(regions));
}

const std::vector<SampleInfo>& InMemoryDataset::samples(Partition partition) const {
  return split(partition).info;
}

Image InMemoryDataset::load(Partition partition, std::size_t index) const {
  const auto& s = split(partition);
  check_index(index, s.images.size(), "InMemoryDataset");
  return s.images[index];
}

const RegionAnnotation* InMemoryDataset::regions(Partition partition, std::size_t index) const {
  const auto& s = split(partition);
  check_index(index, s.regions.size(), "InMemoryDataset");
  return s.regions[index] ? &*s.regions[index] : nullptr;
}

DirectoryDataset::DirectoryDataset(std::filesystem::path root) : root_(std::move(root)) {
  const json index = read_json(root_ / "index.json");
  name_ = index.value("name", root_.filename().string());
  class_names_ = index.at("classes").get<std::vector<std::string>>();
  for (const auto& entry : index.at("samples")) {
    SampleInfo info{entry.at("id").get<std::string>(), entry.at("label").get<int>()};
    if (info.label < 0 || info.label >= class_count()) {
      throw std::invalid_argument("index.json: sample " + info.id + " has a label outside the class list");
    }
    const auto partition = partition_from_string(entry.at("partition").get<std::string>());
    (partition == Partition::kTrain ? train_ : test_).push_back(std::move(info));
  }
  train_regions_.resize(train_.size());
  test_regions_.resize(test_.size());

  if (std::filesystem::exists(root_ / "regions.json")) {
    std::map<std::pair<Partition, std::string>, RegionAnnotation> by_id;
    const json regions = read_json(root_ / "regions.json");
    for (const auto& entry : regions.at("samples")) {
      RegionAnnotation r;
      r.signal = box_from_json(entry.at("signal"));
      if (!entry.at("nuisance").is_null()) r.nuisance = box_from_json(entry.at("nuisance"));
      by_id[{partition_from_string(entry.at("partition").get<std::string>()),
             entry.at("id").get<std::string>()}] = r;
    }
    for (std::size_t i = 0; i < train_.size(); ++i) {
      if (auto it = by_id.find({Partition::kTrain, train_[i].id}); it != by_id.end()) {
        train_regions_[i] = it->second;
      }
    }
    for (std::size_t i = 0; i < test_.size(); ++i) {
      if (auto it = by_id.find({Partition::kTest, test_[i].id}); it != by_id.end()) {
        test_regions_[i] = it->second;
      }
    }
  }
}

const std::vector<SampleInfo>& DirectoryDataset::samples(Partition partition) const {
  return partition == Partition::kTrain ? train_ : test_;
}

Image DirectoryDataset::load(Partition partition, std::size_t index) const {
  const auto& s = samples(partition);
  check_index(index, s.size(), "DirectoryDataset");
  return read_png(root_ / std::to_string(s[index].label) / (s[index].id + ".png"));
}

const RegionAnnotation* DirectoryDataset::regions(Partition partition, std::size_t index) const {
  const auto& r = partition == Partition::kTrain ? train_regions_ : test_regions_;
  check_index(index, r.size(), "DirectoryDataset");
  return r[index] ? &*r[index] : nullptr;
}

IndexOnlyDataset::IndexOnlyDataset(std::string name, int class_count, int train_per_class,
                                   int test_per_class)
    : name_(std::move(name)) {
  if (class_count < 1 || train_per_class < 0 || test_per_class < 0) {
    throw std::invalid_argument("IndexOnlyDataset: invalid counts");
  }
  for (int c = 0; c < class_count; ++c) {
    class_names_.push_back(std::to_string(c));
    for (int i = 0; i < train_per_class; ++i) {
      train_.push_back({"train_c" + std::to_string(c) + "_" + std::to_string(i), c});
    }
    for (int i = 0; i < test_per_class; ++i) {
      test_.push_back({"test_c" + std::to_string(c) + "_" + std::to_string(i), c});
    }
  }
}

const std::vector<SampleInfo>& IndexOnlyDataset::samples(Partition partition) const {
  return partition == Partition::kTrain ? train_ : test_;
}

Image IndexOnlyDataset::load(Partition, std::size_t) const {
  throw std::logic_error("IndexOnlyDataset '" + name_ + "' has no images");
}

void write_dataset(const DatasetAdapter& adapter, const std::filesystem::path& root) {
  if (!adapter.has_images()) throw std::invalid_argument("write_dataset: adapter has no images");
  std::filesystem::create_directories(root);
  json samples = json::array();
  json regions = json::array();
  bool any_regions = false;
  for (Partition p : {Partition::kTrain, Partition::kTest}) {
    const auto& infos = adapter.samples(p);
    for (std::size_t i = 0; i < infos.size(); ++i) {
      const auto& info = infos[i];
      const auto rel = std::filesystem::path(std::to_string(info.label)) / (info.id + ".png");
      write_png(root / rel, adapter.load(p, i));
      samples.push_back({{"id", info.id},
                         {"file", rel.generic_string()},
                         {"label", info.label},
                         {"partition", to_string(p)}});
      if (const auto* r = adapter.regions(p, i)) {
        any_regions = true;
        regions.push_back({{"id", info.id},
                           {"partition", to_string(p)},
                           {"signal", box_to_json(r->signal)},
                           {"nuisance", r->nuisance ? box_to_json(*r->nuisance) : json(nullptr)}});
      }
    }
  }
  std::ofstream(root / "index.json")
      << json{{"schema_version", 1},
              {"name", adapter.name()},
              {"classes", adapter.class_names()},
              {"samples", std::move(samples)}}
             .dump(1)
      << "\n";
  if (any_regions) {
    std::ofstream(root / "regions.json")
        << json{{"schema_version", 1}, {"samples", std::move(regions)}}.dump(1) << "\n";
  }
}

}  // namespace fscil::data
