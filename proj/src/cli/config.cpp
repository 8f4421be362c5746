#include "fscil/cli/config.hpp"

#include <fstream>
#include <set>
#include <sstream>

#define TOML_EXCEPTIONS 1
#include <toml.hpp>

#include "fscil/core/random.hpp"

namespace fscil::cli {

std::string to_string(DataSource source) {
  switch (source) {
    case DataSource::kSynthetic: return "synthetic";
    case DataSource::kDirectory: return "directory";
    case DataSource::kIndexOnly: return "index";
  }
  return "?";
}

namespace {

DataSource data_source_from_string(const std::string& text) {
  if (text == "synthetic") return DataSource::kSynthetic;
  if (text == "directory") return DataSource::kDirectory;
  if (text == "index") return DataSource::kIndexOnly;
  throw std::invalid_argument("expected synthetic, directory or index, got '" + text + "'");
}

std::string to_string(analysis::InterClassMode mode) {
  return mode == analysis::InterClassMode::kClassMeans ? "class_means" : "all_pairs";
}

analysis::InterClassMode inter_mode_from_string(const std::string& text) {
  if (text == "class_means") return analysis::InterClassMode::kClassMeans;
  if (text == "all_pairs") return analysis::InterClassMode::kAllPairs;
  throw std::invalid_argument("expected class_means or all_pairs, got '" + text + "'");
}

// Reads optional keys from one JSON object and rejects any it did not read.
class Reader {
 public:
  Reader(const nlohmann::json& j, std::string prefix) : j_(j), prefix_(std::move(prefix)) {
    if (!j_.is_object()) fail("", "expected a table");
  }

  const nlohmann::json* find(const std::string& key) {
    seen_.insert(key);
    const auto it = j_.find(key);
    return it == j_.end() ? nullptr : &*it;
  }

  void integer(const std::string& key, int& out) {
    if (const auto* v = find(key)) {
      if (!v->is_number_integer()) fail(key, "expected an integer");
      out = v->get<int>();
    }
  }
  void unsigned_integer(const std::string& key, std::uint64_t& out) {
    if (const auto* v = find(key)) {
      if (!v->is_number_integer() || (v->is_number_integer() && !v->is_number_unsigned() && v->get<long long>() < 0)) {
        fail(key, "expected a nonnegative integer");
      }
      out = v->get<std::uint64_t>();
    }
  }
  void real(const std::string& key, double& out) {
    if (const auto* v = find(key)) {
      if (!v->is_number()) fail(key, "expected a number");
      out = v->get<double>();
    }
  }
  void boolean(const std::string& key, bool& out) {
    if (const auto* v = find(key)) {
      if (!v->is_boolean()) fail(key, "expected true or false");
      out = v->get<bool>();
    }
  }
  void text(const std::string& key, std::string& out) {
    if (const auto* v = find(key)) {
      if (!v->is_string()) fail(key, "expected a string");
      out = v->get<std::string>();
    }
  }
  void integers(const std::string& key, std::vector<int>& out) {
    if (const auto* v = find(key)) {
      if (!v->is_array()) fail(key, "expected an array of integers");
      out.clear();
      for (const auto& e : *v) {
        if (!e.is_number_integer()) fail(key, "expected an array of integers");
        out.push_back(e.get<int>());
      }
    }
  }
  template <class E, class Parse>
  void enumeration(const std::string& key, E& out, Parse parse) {
    std::string s;
    text(key, s);
    if (s.empty()) return;
    try {
      out = parse(s);
    } catch (const std::invalid_argument& e) {
      fail(key, e.what());
    }
  }

  void finish() const {
    for (const auto& [key, value] : j_.items()) {
      if (!seen_.contains(key)) fail(key, "unknown key");
    }
  }

  [[noreturn]] void fail(const std::string& key, const std::string& why) const {
    std::string field = prefix_;
    if (!key.empty()) field += (field.empty() ? "" : ".") + key;
    throw ConfigError((field.empty() ? std::string("config") : field) + ": " + why);
  }

 private:
  const nlohmann::json& j_;
  std::string prefix_;
  std::set<std::string> seen_;
};

const nlohmann::json& section(Reader& root, const char* name) {
  static const nlohmann::json empty = nlohmann::json::object();
  const auto* v = root.find(name);
  return v ? *v : empty;
}

nlohmann::json toml_to_json(const toml::node& node) {
  if (const auto* t = node.as_table()) {
    nlohmann::json out = nlohmann::json::object();
    for (const auto& [k, v] : *t) out[std::string(k.str())] = toml_to_json(v);
    return out;
  }
  if (const auto* a = node.as_array()) {
    nlohmann::json out = nlohmann::json::array();
    for (const auto& v : *a) out.push_back(toml_to_json(v));
    return out;
  }
  if (const auto* v = node.as_integer()) return v->get();
  if (const auto* v = node.as_floating_point()) return v->get();
  if (const auto* v = node.as_boolean()) return v->get();
  if (const auto* v = node.as_string()) return v->get();
  throw ConfigError("config: dates and times are not supported");
}

}  // namespace

void ExperimentConfig::validate() const {
  auto check = [](bool ok, const std::string& message) {
    if (!ok) throw ConfigError(message);
  };
  auto wrap = [](const char* prefix, auto&& fn) {
    try {
      fn();
    } catch (const std::invalid_argument& e) {
      throw ConfigError(std::string(prefix) + ": " + e.what());
    }
  };
  check(!name.empty(), "name: must not be empty");
  check(data.base_classes >= 1, "data.base_classes: must be >= 1");
  check(data.sessions >= 0, "data.sessions: must be >= 0");
  check(data.sessions == 0 || data.way >= 1, "data.way: must be >= 1");
  check(data.sessions == 0 || data.shot >= 1, "data.shot: must be >= 1");
  check(data.class_count >= 1, "data.class_count: must be >= 1");
  if (data.source == DataSource::kDirectory) check(!data.root.empty(), "data.root: required for directory datasets");
  if (data.source == DataSource::kIndexOnly) {
    check(data.train_per_class >= 1, "data.train_per_class: must be >= 1");
    check(data.test_per_class >= 1, "data.test_per_class: must be >= 1");
    check(data.schedule_only, "data.schedule_only: index datasets carry no pixels and must be schedule-only");
  }
  if (data.source == DataSource::kSynthetic) {
    wrap("data", [&] { data.synthetic.validate(); });
    const int side = data.synthetic.image_size;
    check(model.input == Shape3{side, side, 1}, "model.input: must be [image_size, image_size, 1] for synthetic data");
  }
  check(temperature > 0.0, "model.temperature: must be > 0");
  wrap("model", [&] { model::default_widths(model.architecture); });
  wrap("rdi", [&] { rdi.validate(); });
  wrap("protocol", [&] { training.validate(); });
  check(analysis.export_masks >= 0, "analysis.export_masks: must be >= 0");
}

std::uint64_t ExperimentConfig::data_seed() const { return derive_seed(seed, "data"); }
std::uint64_t ExperimentConfig::schedule_seed() const { return derive_seed(seed, "schedule"); }
std::uint64_t ExperimentConfig::init_seed() const { return derive_seed(seed, "init"); }
std::uint64_t ExperimentConfig::train_seed() const { return derive_seed(seed, "train"); }

nlohmann::json to_json(const ExperimentConfig& c) {
  const auto& s = c.data.synthetic;
  const auto& o = c.training.optimizer;
  nlohmann::json j;
  j["name"] = c.name;
  j["seed"] = c.seed;
  j["data"] = {{"source", to_string(c.data.source)},
               {"root", c.data.root},
               {"name", c.data.name},
               {"class_count", c.data.class_count},
               {"train_per_class", c.data.train_per_class},
               {"test_per_class", c.data.test_per_class},
               {"image_size", s.image_size},
               {"samples_per_class", s.samples_per_class},
               {"test_samples_per_class", s.test_samples_per_class},
               {"signal_patch_size", s.signal_patch_size},
               {"nuisance_patch_size", s.nuisance_patch_size},
               {"nuisance_sharing", data::to_string(s.nuisance_sharing)},
               {"noise_sigma", s.noise_sigma},
               {"placement_grid", s.placement_grid},
               {"signal_contrast", s.signal_contrast},
               {"nuisance_contrast", s.nuisance_contrast},
               {"base_classes", c.data.base_classes},
               {"sessions", c.data.sessions},
               {"way", c.data.way},
               {"shot", c.data.shot},
               {"schedule_only", c.data.schedule_only}};
  j["model"] = {{"architecture", c.model.architecture},
                {"input", {c.model.input.height, c.model.input.width, c.model.input.channels}},
                {"widths", c.model.widths.empty() ? model::default_widths(c.model.architecture)
                                                  : c.model.widths},
                {"pooled_blocks", c.model.pooled_blocks},
                {"norm_groups", c.model.norm_groups},
                {"temperature", c.temperature}};
  j["rdi"] = {{"threshold", c.rdi.threshold},
              {"lambda", c.rdi.lambda},
              {"beta", c.rdi.beta},
              {"pooling_mode", rdi::to_string(c.rdi.pooling_mode)},
              {"mask_source", rdi::to_string(c.rdi.mask_source)},
              {"alr_empty_policy", rdi::to_string(c.rdi.alr_empty_policy)},
              {"ali_empty_policy", rdi::to_string(c.rdi.ali_empty_policy)},
              {"base_loss_includes_dummy", c.rdi.base_loss_includes_dummy}};
  j["protocol"] = {{"pretrain_epochs", c.training.pretrain_epochs},
                   {"decouple_epochs", c.training.decouple_epochs},
                   {"learning_rate", o.learning_rate},
                   {"momentum", o.momentum},
                   {"weight_decay", o.weight_decay},
                   {"clip_norm", o.clip_norm},
                   {"batch_size", o.batch_size},
                   {"cosine_decay", o.cosine_decay},
                   {"random_crop", c.training.random_crop},
                   {"crop_padding", c.training.crop_padding},
                   {"random_flip", c.training.random_flip},
                   {"head_init", protocol::to_string(c.training.head_init)},
                   {"prototype_pooling", protocol::to_string(c.prototype_pooling)},
                   {"save_checkpoints", c.save_checkpoints}};
  j["analysis"] = {{"enabled", c.analysis.enabled},
                   {"export_masks", c.analysis.export_masks},
                   {"inter_class", to_string(c.analysis.inter_mode)}};
  return j;
}

ExperimentConfig experiment_config_from_json(const nlohmann::json& j) {
  ExperimentConfig c;
  Reader root(j, "");
  root.text("name", c.name);
  root.unsigned_integer("seed", c.seed);

  Reader d(section(root, "data"), "data");
  auto& s = c.data.synthetic;
  d.enumeration("source", c.data.source, data_source_from_string);
  d.text("root", c.data.root);
  d.text("name", c.data.name);
  d.integer("class_count", c.data.class_count);
  d.integer("train_per_class", c.data.train_per_class);
  d.integer("test_per_class", c.data.test_per_class);
  d.integer("image_size", s.image_size);
  d.integer("samples_per_class", s.samples_per_class);
  d.integer("test_samples_per_class", s.test_samples_per_class);
  d.integer("signal_patch_size", s.signal_patch_size);
  d.integer("nuisance_patch_size", s.nuisance_patch_size);
  d.enumeration("nuisance_sharing", s.nuisance_sharing, data::nuisance_sharing_from_string);
  d.real("noise_sigma", s.noise_sigma);
  d.integer("placement_grid", s.placement_grid);
  d.real("signal_contrast", s.signal_contrast);
  d.real("nuisance_contrast", s.nuisance_contrast);
  d.integer("base_classes", c.data.base_classes);
  d.integer("sessions", c.data.sessions);
  d.integer("way", c.data.way);
  d.integer("shot", c.data.shot);
  d.boolean("schedule_only", c.data.schedule_only);
  d.finish();
  s.class_count = c.data.class_count;

  Reader m(section(root, "model"), "model");
  m.text("architecture", c.model.architecture);
  std::vector<int> input;
  m.integers("input", input);
  m.integers("widths", c.model.widths);
  m.integer("pooled_blocks", c.model.pooled_blocks);
  m.integer("norm_groups", c.model.norm_groups);
  m.real("temperature", c.temperature);
  m.finish();
  if (!input.empty()) {
    if (input.size() != 3) m.fail("input", "expected [height, width, channels]");
    c.model.input = {input[0], input[1], input[2]};
  } else if (c.data.source == DataSource::kSynthetic) {
    c.model.input = {s.image_size, s.image_size, 1};
  } else if (c.data.source == DataSource::kDirectory && !c.data.schedule_only) {
    m.fail("input", "required for directory datasets");
  }
  if (c.data.source == DataSource::kSynthetic &&
      !(c.model.input == Shape3{s.image_size, s.image_size, 1})) {
    m.fail("input", "must be [image_size, image_size, 1] for synthetic data");
  }

  Reader r(section(root, "rdi"), "rdi");
  r.real("threshold", c.rdi.threshold);
  r.real("lambda", c.rdi.lambda);
  r.real("beta", c.rdi.beta);
  r.enumeration("pooling_mode", c.rdi.pooling_mode, rdi::pooling_mode_from_string);
  r.enumeration("mask_source", c.rdi.mask_source, rdi::mask_source_from_string);
  r.enumeration("alr_empty_policy", c.rdi.alr_empty_policy, rdi::empty_mask_policy_from_string);
  r.enumeration("ali_empty_policy", c.rdi.ali_empty_policy, rdi::empty_mask_policy_from_string);
  r.boolean("base_loss_includes_dummy", c.rdi.base_loss_includes_dummy);
  r.finish();

  Reader p(section(root, "protocol"), "protocol");
  auto& o = c.training.optimizer;
  p.integer("pretrain_epochs", c.training.pretrain_epochs);
  p.integer("decouple_epochs", c.training.decouple_epochs);
  p.real("learning_rate", o.learning_rate);
  p.real("momentum", o.momentum);
  p.real("weight_decay", o.weight_decay);
  p.real("clip_norm", o.clip_norm);
  p.integer("batch_size", o.batch_size);
  p.boolean("cosine_decay", o.cosine_decay);
  p.boolean("random_crop", c.training.random_crop);
  p.integer("crop_padding", c.training.crop_padding);
  p.boolean("random_flip", c.training.random_flip);
  p.enumeration("head_init", c.training.head_init, protocol::head_init_from_string);
  p.enumeration("prototype_pooling", c.prototype_pooling, protocol::prototype_pooling_from_string);
  p.boolean("save_checkpoints", c.save_checkpoints);
  p.finish();

  Reader a(section(root, "analysis"), "analysis");
  a.boolean("enabled", c.analysis.enabled);
  a.integer("export_masks", c.analysis.export_masks);
  a.enumeration("inter_class", c.analysis.inter_mode, inter_mode_from_string);
  a.finish();
  root.finish();

  if (c.model.widths.empty()) {
    try {
      c.model.widths = model::default_widths(c.model.architecture);
    } catch (const std::invalid_argument& e) {
      throw ConfigError(std::string("model.architecture: ") + e.what());
    }
  }
  s.seed = c.data_seed();
  c.training.temperature = c.temperature;
  c.training.seed = c.train_seed();
  c.validate();
  return c;
}

nlohmann::json parse_toml(const std::string& text, const std::string& source_name) {
  try {
    return toml_to_json(toml::parse(text, source_name));
  } catch (const toml::parse_error& e) {
    std::ostringstream msg;
    msg << source_name << ":" << e.source().begin.line << ":" << e.source().begin.column << ": "
        << e.description();
    throw ConfigError(msg.str());
  }
}

nlohmann::json read_config_document(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config file " + path.string());
  std::stringstream buffer;
  buffer << in.rdbuf();
  if (path.extension() == ".json") {
    try {
      return nlohmann::json::parse(buffer.str());
    } catch (const nlohmann::json::parse_error& e) {
      throw ConfigError(path.string() + ": " + e.what());
    }
  }
  return parse_toml(buffer.str(), path.string());
}

ExperimentConfig load_experiment_config(const std::filesystem::path& path) {
  return experiment_config_from_json(read_config_document(path));
}

}  // namespace fscil::cli
