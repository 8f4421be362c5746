#include "fscil/model/checkpoint.hpp"

#include <cstring>
#include <fstream>
#include <map>
#include <stdexcept>

#include <nlohmann/json.hpp>

namespace fscil::model {

namespace {

constexpr char kMagic[8] = {'F', 'S', 'C', 'I', 'L', 'C', 'K', '1'};

}  // namespace

void save_checkpoint(const std::filesystem::path& path, const Backbone& backbone,
                     const CosineClassifier& classifier) {
  const auto& cfg = backbone.config();
  nlohmann::json blobs = nlohmann::json::array();
  std::uint64_t offset = 0;
  for (const Param* p : backbone.params()) {
    blobs.push_back({{"name", p->name}, {"offset", offset}, {"count", p->value.size()}});
    offset += p->value.size();
  }
  const auto head_count = static_cast<std::uint64_t>(classifier.weights().size());
  blobs.push_back({{"name", "head.weight"}, {"offset", offset}, {"count", head_count}});

  nlohmann::json header = {
      {"architecture", cfg.architecture},
      {"input", {cfg.input.height, cfg.input.width, cfg.input.channels}},
      {"widths", cfg.widths},
      {"pooled_blocks", cfg.pooled_blocks},
      {"norm_groups", cfg.norm_groups},
      {"d", backbone.output_shape().channels},
      {"tau", classifier.temperature()},
      {"class_count", classifier.column_count()},
      {"dummy", classifier.has_dummy()},
      {"blobs", std::move(blobs)}};
  const std::string text = header.dump();

  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("save_checkpoint: cannot open " + path.string());
  out.write(kMagic, sizeof kMagic);
  const std::uint64_t size = text.size();
  out.write(reinterpret_cast<const char*>(&size), sizeof size);
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  for (const Param* p : backbone.params()) {
    out.write(reinterpret_cast<const char*>(p->value.data()),
              static_cast<std::streamsize>(p->value.size() * sizeof(double)));
  }
  out.write(reinterpret_cast<const char*>(classifier.weights().data()),
            static_cast<std::streamsize>(head_count * sizeof(double)));
  if (!out) throw std::runtime_error("save_checkpoint: write failed for " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("load_checkpoint: cannot open " + path.string());
  char magic[8];
  in.read(magic, sizeof magic);
  if (!in || std::memcmp(magic, kMagic, sizeof magic) != 0) {
    throw std::runtime_error("load_checkpoint: " + path.string() + " is not a checkpoint");
  }
  std::uint64_t size = 0;
  in.read(reinterpret_cast<char*>(&size), sizeof size);
  std::string text(size, '\0');
  in.read(text.data(), static_cast<std::streamsize>(size));
  const auto header = nlohmann::json::parse(text);

  std::vector<double> payload;
  for (const auto& blob : header.at("blobs")) {
    payload.resize(std::max<std::size_t>(payload.size(),
                                         blob.at("offset").get<std::size_t>() +
                                             blob.at("count").get<std::size_t>()));
  }
  in.read(reinterpret_cast<char*>(payload.data()),
          static_cast<std::streamsize>(payload.size() * sizeof(double)));
  if (!in) throw std::runtime_error("load_checkpoint: truncated payload in " + path.string());

  BackboneConfig cfg;
  cfg.architecture = header.at("architecture").get<std::string>();
  const auto input = header.at("input").get<std::vector<int>>();
  cfg.input = {input.at(0), input.at(1), input.at(2)};
  cfg.widths = header.at("widths").get<std::vector<int>>();
  cfg.pooled_blocks = header.at("pooled_blocks").get<int>();
  cfg.norm_groups = header.at("norm_groups").get<int>();
  Backbone backbone(cfg, 0);

  std::map<std::string, std::pair<std::size_t, std::size_t>> index;
  for (const auto& blob : header.at("blobs")) {
    index[blob.at("name").get<std::string>()] = {blob.at("offset").get<std::size_t>(),
                                                 blob.at("count").get<std::size_t>()};
  }
  for (Param* p : backbone.params()) {
    auto it = index.find(p->name);
    if (it == index.end() || it->second.second != p->value.size()) {
      throw std::runtime_error("load_checkpoint: missing or mis-sized blob " + p->name);
    }
    std::copy_n(payload.begin() + static_cast<std::ptrdiff_t>(it->second.first), p->value.size(),
                p->value.begin());
  }
  const int d = header.at("d").get<int>();
  const int m = header.at("class_count").get<int>();
  const auto& [head_offset, head_count] = index.at("head.weight");
  if (head_count != static_cast<std::size_t>(d) * m) {
    throw std::runtime_error("load_checkpoint: head blob has the wrong size");
  }
  Eigen::MatrixXd w = Eigen::Map<const Eigen::MatrixXd>(payload.data() + head_offset, d, m);
  std::optional<int> dummy;
  if (header.at("dummy").get<bool>()) dummy = m - 1;
  return {std::move(backbone), CosineClassifier(std::move(w), header.at("tau").get<double>(), dummy)};
}

}  // namespace fscil::model
