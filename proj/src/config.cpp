#include "iahash/config.hpp"

#include <fstream>
#include <functional>
#include <map>
#include <sstream>
#include <type_traits>

#include "iahash/util.hpp"

namespace iahash {

namespace {

std::vector<int> parse_levels(const std::string& value, const std::string& key) {
  std::vector<int> out;
  std::string item;
  std::istringstream is(value);
  while (std::getline(is, item, ','))
    out.push_back(int(parse_int(item, key)));
  if (out.empty()) throw ValidationError(key + ": empty level list");
  return out;
}

std::string levels_to_string(const std::vector<int>& levels) {
  std::string out;
  for (std::size_t i = 0; i < levels.size(); ++i) {
    if (i) out += ',';
    out += std::to_string(levels[i]);
  }
  return out;
}

// Central key table: one setter + one getter per key keeps parsing,
// canonical serialization and the sample document in sync.
struct KeyHandler {
  std::function<void(RunConfig&, const std::string&)> set;
  std::function<std::string(const RunConfig&)> get;
};

const std::map<std::string, KeyHandler>& key_table() {
  static const std::map<std::string, KeyHandler> table = [] {
    std::map<std::string, KeyHandler> t;
    auto add_int = [&t](const std::string& key, auto member) {
      t[key] = KeyHandler{
          [key, member](RunConfig& c, const std::string& v) {
            using T = std::remove_reference_t<decltype(std::invoke(member, c))>;
            std::invoke(member, c) = T(parse_int(v, key));
          },
          [member](const RunConfig& c) { return std::to_string(std::invoke(member, c)); }};
    };
    auto add_double = [&t](const std::string& key, auto member) {
      t[key] = KeyHandler{
          [key, member](RunConfig& c, const std::string& v) {
            std::invoke(member, c) = parse_double(v, key);
          },
          [member](const RunConfig& c) { return format_double(std::invoke(member, c)); }};
    };

    t["seed"] = KeyHandler{[](RunConfig& c, const std::string& v) {
                             c.seed = std::uint64_t(parse_int(v, "seed"));
                             c.train.seed = c.seed;
                           },
                           [](const RunConfig& c) { return std::to_string(c.seed); }};

    add_int("data.categories", [](auto& c) -> auto& { return c.scene.categories; });
    add_int("data.channels", [](auto& c) -> auto& { return c.scene.channels; });
    add_int("data.height", [](auto& c) -> auto& { return c.scene.height; });
    add_int("data.width", [](auto& c) -> auto& { return c.scene.width; });
    add_int("data.min_objects", [](auto& c) -> auto& { return c.scene.min_objects; });
    add_int("data.max_objects", [](auto& c) -> auto& { return c.scene.max_objects; });
    add_double("data.object_decay", [](auto& c) -> auto& { return c.scene.object_decay; });
    add_int("data.min_box", [](auto& c) -> auto& { return c.scene.min_box; });
    add_int("data.max_box", [](auto& c) -> auto& { return c.scene.max_box; });
    add_double("data.noise", [](auto& c) -> auto& { return c.scene.noise_level; });
    add_double("data.max_overlap", [](auto& c) -> auto& { return c.scene.max_overlap; });
    add_int("data.proposals", [](auto& c) -> auto& { return c.num_proposals; });
    add_double("data.jitter", [](auto& c) -> auto& { return c.jitter; });
    add_int("data.train_size", [](auto& c) -> auto& { return c.train_size; });
    add_int("data.database_size", [](auto& c) -> auto& { return c.database_size; });
    add_int("data.query_size", [](auto& c) -> auto& { return c.query_size; });

    add_int("model.conv_channels", [](auto& c) -> auto& { return c.model.pyramid.channels; });
    t["model.levels"] = KeyHandler{
        [](RunConfig& c, const std::string& v) { c.model.pyramid.levels = parse_levels(v, "model.levels"); },
        [](const RunConfig& c) { return levels_to_string(c.model.pyramid.levels); }};
    add_int("model.code_bits", [](auto& c) -> auto& { return c.model.code_bits; });
    add_int("model.semantic_bits", [](auto& c) -> auto& { return c.model.semantic_bits; });

    add_double("train.base_lr", [](auto& c) -> auto& { return c.train.base_lr; });
    add_int("train.batch_size", [](auto& c) -> auto& { return c.train.batch_size; });
    add_int("train.iterations", [](auto& c) -> auto& { return c.train.iterations; });
    add_int("train.lr_drop_epochs", [](auto& c) -> auto& { return c.train.lr_drop_epochs; });
    add_double("train.w_cls", [](auto& c) -> auto& { return c.train.w_cls; });
    add_double("train.w_cat", [](auto& c) -> auto& { return c.train.w_cat; });
    add_double("train.w_sem", [](auto& c) -> auto& { return c.train.w_sem; });
    add_int("train.triplet_cap", [](auto& c) -> auto& { return c.train.triplet_cap; });
    add_int("train.cat_triplets", [](auto& c) -> auto& { return c.train.cat_triplets; });
    add_double("train.margin", [](auto& c) -> auto& { return c.train.margin; });
    add_int("train.threads", [](auto& c) -> auto& { return c.train.threads; });

    add_double("index.threshold", [](auto& c) -> auto& { return c.threshold; });
    add_int("query.topk", [](auto& c) -> auto& { return c.top_k; });
    add_int("eval.at", [](auto& c) -> auto& { return c.eval_at; });
    return t;
  }();
  return table;
}

void apply_line(RunConfig& cfg, const std::string& line, const std::string& where) {
  auto eq = line.find('=');
  if (eq == std::string::npos)
    throw ValidationError(where + ": expected key=value, got '" + line + "'");
  auto trim = [](std::string s) {
    auto a = s.find_first_not_of(" \t");
    auto b = s.find_last_not_of(" \t");
    return a == std::string::npos ? std::string() : s.substr(a, b - a + 1);
  };
  std::string key = trim(line.substr(0, eq));
  std::string value = trim(line.substr(eq + 1));
  auto it = key_table().find(key);
  if (it == key_table().end()) throw ValidationError(where + ": unknown config key '" + key + "'");
  it->second.set(cfg, value);
}

}  // namespace

RunConfig parse_config(const std::string& text) {
  RunConfig cfg;
  std::istringstream is(text);
  std::string line;
  int line_no = 0;
  while (std::getline(is, line)) {
    ++line_no;
    auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    bool blank = line.find_first_not_of(" \t\r") == std::string::npos;
    if (blank) continue;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    apply_line(cfg, line, "config line " + std::to_string(line_no));
  }
  return cfg;
}

RunConfig load_config(const std::filesystem::path& path, const std::vector<std::string>& overrides) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("missing config file: " + path.string());
  std::string text((std::istreambuf_iterator<char>(is)), std::istreambuf_iterator<char>());
  RunConfig cfg = parse_config(text);
  for (const auto& o : overrides) apply_line(cfg, o, "--set " + o);
  validate(cfg);
  return cfg;
}

void validate(const RunConfig& cfg) {
  validate(cfg.scene);
  ModelConfig mc = cfg.model;
  mc.categories = cfg.scene.categories;
  mc.in_channels = cfg.scene.channels;
  validate(mc);
  validate(cfg.train);
  if (cfg.num_proposals < cfg.scene.max_objects)
    throw ValidationError("data.proposals: must be >= data.max_objects");
  if (cfg.jitter < 0.0 || cfg.jitter > 0.5)
    throw ValidationError("data.jitter: must be in [0, 0.5]");
  if (cfg.train_size < 1 || cfg.database_size < 1 || cfg.query_size < 1)
    throw ValidationError("data.*_size: split sizes must be >= 1");
  if (cfg.threshold < 0.0 || cfg.threshold > 1.0)
    throw ValidationError("index.threshold: must be in [0, 1]");
  if (cfg.top_k < 1) throw ValidationError("query.topk: must be >= 1");
  if (cfg.eval_at < 1) throw ValidationError("eval.at: must be >= 1");
}

std::string canonical_config(const RunConfig& cfg) {
  std::string out;
  for (const auto& [key, handler] : key_table()) out += key + "=" + handler.get(cfg) + "\n";
  return out;
}

std::uint64_t config_hash(const RunConfig& cfg) { return fnv1a64(canonical_config(cfg)); }

std::string default_config_text() {
  RunConfig cfg;
  std::string out = "# iahash run configuration (key=value, '#' starts a comment)\n";
  out += canonical_config(cfg);
  return out;
}

}  // namespace iahash
