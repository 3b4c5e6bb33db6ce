#include "iahash/synthdata.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numbers>
#include <sstream>
#include <stdexcept>

#include "iahash/util.hpp"

namespace iahash {

double iou(const Box& a, const Box& b) {
  int ix1 = std::max(a.x1, b.x1), iy1 = std::max(a.y1, b.y1);
  int ix2 = std::min(a.x2, b.x2), iy2 = std::min(a.y2, b.y2);
  long long inter = 0;
  if (ix2 > ix1 && iy2 > iy1) inter = (long long)(ix2 - ix1) * (iy2 - iy1);
  long long uni = a.area() + b.area() - inter;
  return uni > 0 ? double(inter) / double(uni) : 0.0;
}

std::array<double, 4> normalize_box(const Box& box, int width, int height) {
  return {double(box.x1) / width, double(box.y1) / height, double(box.x2) / width,
          double(box.y2) / height};
}

std::string SceneConfig::describe() const {
  std::ostringstream os;
  os << "categories=" << categories << " channels=" << channels << " size=" << width << "x"
     << height << " objects=" << min_objects << ".." << max_objects << " decay=" << object_decay
     << " box=" << min_box << ".." << max_box << " noise=" << noise_level
     << " max_overlap=" << max_overlap;
  return os.str();
}

void validate(const SceneConfig& cfg) {
  if (cfg.categories < 2) throw ValidationError("scene config: categories must be >= 2");
  if (cfg.channels < 1) throw ValidationError("scene config: channels must be >= 1");
  if (cfg.height < 4 || cfg.width < 4) throw ValidationError("scene config: image too small");
  if (cfg.min_objects < 1 || cfg.min_objects > cfg.max_objects || cfg.max_objects > cfg.categories)
    throw ValidationError("scene config: need 1 <= min_objects <= max_objects <= categories");
  if (cfg.min_box < 2 || cfg.min_box > cfg.max_box)
    throw ValidationError("scene config: need 2 <= min_box <= max_box");
  if (cfg.min_box > cfg.width || cfg.min_box > cfg.height)
    throw ValidationError("scene config: min_box exceeds image size");
  if (!(cfg.object_decay > 0.0)) throw ValidationError("scene config: object_decay must be > 0");
  if (cfg.noise_level < 0.0 || cfg.noise_level > 1.0)
    throw ValidationError("scene config: noise_level must be in [0, 1]");
}

namespace {

// Oriented sinusoidal grating; orientation and period are category-specific.
float texture_value(int category, int categories, int x, int y, double phase) {
  double angle = std::numbers::pi * category / categories;
  double period = 4.0 + 2.0 * (category % 3);
  double t = std::cos(angle) * x + std::sin(angle) * y;
  double v = 0.5 + 0.45 * std::sin(2.0 * std::numbers::pi * (t / period + phase));
  return float(std::clamp(v, 0.0, 1.0));
}

int sample_object_count(SeededRng& rng, const SceneConfig& cfg) {
  // P(k) proportional to decay^(k - min_objects).
  double total = 0.0, w = 1.0;
  for (int k = cfg.min_objects; k <= cfg.max_objects; ++k, w *= cfg.object_decay) total += w;
  double u = rng.uniform() * total;
  w = 1.0;
  for (int k = cfg.min_objects; k <= cfg.max_objects; ++k, w *= cfg.object_decay) {
    if (u < w) return k;
    u -= w;
  }
  return cfg.max_objects;
}

Box random_box(SeededRng& rng, int img_w, int img_h, int min_box, int max_box) {
  int bw = int(rng.range(min_box, std::min(max_box, img_w)));
  int bh = int(rng.range(min_box, std::min(max_box, img_h)));
  int x1 = int(rng.range(0, img_w - bw));
  int y1 = int(rng.range(0, img_h - bh));
  return Box{x1, y1, x1 + bw, y1 + bh};
}

}  // namespace

Scene generate_scene(SeededRng& rng, const SceneConfig& cfg) {
  validate(cfg);
  Scene scene;
  scene.channels = cfg.channels;
  scene.height = cfg.height;
  scene.width = cfg.width;
  scene.pixels.resize(std::size_t(cfg.channels) * cfg.height * cfg.width);
  scene.labels.y.assign(std::size_t(cfg.categories), 0);

  for (float& p : scene.pixels) p = float(rng.uniform() * cfg.noise_level);

  int k = sample_object_count(rng, cfg);

  // k distinct categories via a partial Fisher-Yates shuffle.
  std::vector<int> cats(std::size_t(cfg.categories));
  for (int j = 0; j < cfg.categories; ++j) cats[std::size_t(j)] = j;
  for (int j = 0; j < k; ++j) {
    int pick = j + int(rng.below(std::uint64_t(cfg.categories - j)));
    std::swap(cats[std::size_t(j)], cats[std::size_t(pick)]);
  }

  for (int obj = 0; obj < k; ++obj) {
    Box box;
    bool placed = false;
    for (int attempt = 0; attempt < cfg.max_retries; ++attempt) {
      box = random_box(rng, cfg.width, cfg.height, cfg.min_box, cfg.max_box);
      bool ok = true;
      for (const auto& prev : scene.objects)
        if (iou(prev.box, box) > cfg.max_overlap) {
          ok = false;
          break;
        }
      if (ok) {
        placed = true;
        break;
      }
    }
    if (!placed)
      throw std::runtime_error("generate_scene: could not place object " + std::to_string(obj + 1) +
                               " of " + std::to_string(k) + " after " +
                               std::to_string(cfg.max_retries) + " retries (" + cfg.describe() + ")");
    int category = cats[std::size_t(obj)];
    double phase = rng.uniform();
    for (int c = 0; c < cfg.channels; ++c)
      for (int y = box.y1; y < box.y2; ++y)
        for (int x = box.x1; x < box.x2; ++x)
          scene.at(c, y, x) = texture_value(category, cfg.categories, x, y, phase);
    scene.objects.push_back(SceneObject{category, box});
    scene.labels.y[std::size_t(category)] = 1;
  }
  return scene;
}

std::vector<Proposal> generate_proposals(const Scene& scene, int n, SeededRng& rng, double jitter) {
  if (n < 1) throw std::invalid_argument("generate_proposals: n must be >= 1");
  if (std::size_t(n) < scene.objects.size())
    throw std::invalid_argument("generate_proposals: n = " + std::to_string(n) +
                                " is below the object count " + std::to_string(scene.objects.size()));
  std::vector<Proposal> out;
  out.reserve(std::size_t(n));

  for (const auto& obj : scene.objects) {
    Box jittered = obj.box;
    // Jitter each edge by at most `jitter` of the box size; resample until
    // the result keeps IoU >= 0.5 with the source box.
    for (int attempt = 0; attempt < 50; ++attempt) {
      int dx = std::max(0, int(std::floor(jitter * obj.box.width())));
      int dy = std::max(0, int(std::floor(jitter * obj.box.height())));
      Box cand;
      cand.x1 = std::clamp(obj.box.x1 + int(rng.range(-dx, dx)), 0, scene.width - 1);
      cand.x2 = std::clamp(obj.box.x2 + int(rng.range(-dx, dx)), cand.x1 + 1, scene.width);
      cand.y1 = std::clamp(obj.box.y1 + int(rng.range(-dy, dy)), 0, scene.height - 1);
      cand.y2 = std::clamp(obj.box.y2 + int(rng.range(-dy, dy)), cand.y1 + 1, scene.height);
      if (iou(cand, obj.box) >= 0.5) {
        jittered = cand;
        break;
      }
    }
    out.push_back(Proposal{jittered, normalize_box(jittered, scene.width, scene.height)});
    if (int(out.size()) == n) break;
  }

  while (int(out.size()) < n) {
    // Distractors: uniform random boxes with area >= 4 pixels.
    Box b = random_box(rng, scene.width, scene.height, 2, std::max(scene.width, scene.height));
    out.push_back(Proposal{b, normalize_box(b, scene.width, scene.height)});
  }
  return out;
}

namespace {

void write_record(std::ostream& os, const SceneRecord& rec) {
  const Scene& s = rec.scene;
  os << s.id << ' ' << s.labels.y.size();
  for (auto v : s.labels.y) os << ' ' << int(v);
  os << ' ' << s.height << ' ' << s.width;
  static_assert(sizeof(float) == 4);
  std::vector<std::uint8_t> bytes(s.pixels.size() * 4);
  for (std::size_t i = 0; i < s.pixels.size(); ++i) {
    std::uint32_t u;
    std::memcpy(&u, &s.pixels[i], 4);
    bytes[i * 4 + 0] = std::uint8_t(u);
    bytes[i * 4 + 1] = std::uint8_t(u >> 8);
    bytes[i * 4 + 2] = std::uint8_t(u >> 16);
    bytes[i * 4 + 3] = std::uint8_t(u >> 24);
  }
  os << ' ' << base64_encode(bytes.data(), bytes.size());
  os << ' ' << s.objects.size();
  for (const auto& o : s.objects)
    os << ' ' << o.category << ' ' << o.box.x1 << ' ' << o.box.y1 << ' ' << o.box.x2 << ' '
       << o.box.y2;
  os << ' ' << rec.proposals.size();
  for (const auto& p : rec.proposals)
    os << ' ' << p.box.x1 << ' ' << p.box.y1 << ' ' << p.box.x2 << ' ' << p.box.y2;
  os << '\n';
}

[[noreturn]] void record_error(std::size_t index, const std::string& what) {
  throw std::runtime_error("dataset record " + std::to_string(index) + ": " + what);
}

SceneRecord parse_record(const std::string& line, std::size_t index, int channels) {
  std::istringstream is(line);
  SceneRecord rec;
  Scene& s = rec.scene;
  s.channels = channels;
  std::size_t c = 0;
  if (!(is >> s.id >> c)) record_error(index, "missing id/category count");
  if (c == 0 || c > 4096) record_error(index, "bad category count");
  s.labels.y.resize(c);
  for (std::size_t j = 0; j < c; ++j) {
    int flag;
    if (!(is >> flag) || (flag != 0 && flag != 1)) record_error(index, "bad label flag");
    s.labels.y[j] = std::uint8_t(flag);
  }
  if (!(is >> s.height >> s.width) || s.height < 1 || s.width < 1)
    record_error(index, "bad image size");
  std::string b64;
  if (!(is >> b64)) record_error(index, "missing pixel block");
  std::vector<std::uint8_t> bytes;
  try {
    bytes = base64_decode(b64);
  } catch (const std::exception& e) {
    record_error(index, e.what());
  }
  std::size_t expected = std::size_t(channels) * s.height * s.width * 4;
  if (bytes.size() != expected)
    record_error(index, "pixel block is " + std::to_string(bytes.size()) + " bytes, expected " +
                            std::to_string(expected));
  s.pixels.resize(bytes.size() / 4);
  for (std::size_t i = 0; i < s.pixels.size(); ++i) {
    std::uint32_t u = std::uint32_t(bytes[i * 4]) | std::uint32_t(bytes[i * 4 + 1]) << 8 |
                      std::uint32_t(bytes[i * 4 + 2]) << 16 | std::uint32_t(bytes[i * 4 + 3]) << 24;
    std::memcpy(&s.pixels[i], &u, 4);
  }
  std::size_t n_objects = 0;
  if (!(is >> n_objects)) record_error(index, "missing object count");
  for (std::size_t i = 0; i < n_objects; ++i) {
    SceneObject o;
    if (!(is >> o.category >> o.box.x1 >> o.box.y1 >> o.box.x2 >> o.box.y2))
      record_error(index, "truncated object list");
    if (o.category < 0 || std::size_t(o.category) >= c) record_error(index, "object category out of range");
    if (o.box.x1 < 0 || o.box.y1 < 0 || o.box.x2 > s.width || o.box.y2 > s.height ||
        o.box.x1 >= o.box.x2 || o.box.y1 >= o.box.y2)
      record_error(index, "object box outside image");
    s.objects.push_back(o);
  }
  std::size_t n_props = 0;
  if (!(is >> n_props)) record_error(index, "missing proposal count");
  for (std::size_t i = 0; i < n_props; ++i) {
    Proposal p;
    if (!(is >> p.box.x1 >> p.box.y1 >> p.box.x2 >> p.box.y2))
      record_error(index, "truncated proposal list");
    if (p.box.x1 < 0 || p.box.y1 < 0 || p.box.x2 > s.width || p.box.y2 > s.height ||
        p.box.x1 >= p.box.x2 || p.box.y1 >= p.box.y2)
      record_error(index, "proposal box outside image");
    p.coords = normalize_box(p.box, s.width, s.height);
    rec.proposals.push_back(p);
  }
  std::string extra;
  if (is >> extra) record_error(index, "trailing data: '" + extra + "'");
  return rec;
}

}  // namespace

std::filesystem::path split_path(const std::filesystem::path& dir, const std::string& split) {
  return dir / (split + ".txt");
}

void write_split(const std::filesystem::path& dir, const std::string& split,
                 const std::vector<SceneRecord>& records) {
  std::filesystem::create_directories(dir);
  auto path = split_path(dir, split);
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot open dataset file for writing: " + path.string());
  for (const auto& rec : records) write_record(os, rec);
  if (!os) throw std::runtime_error("failed writing dataset file: " + path.string());
}

std::vector<SceneRecord> read_split(const std::filesystem::path& dir, const std::string& split,
                                    int expected_channels) {
  auto path = split_path(dir, split);
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("missing dataset file: " + path.string());
  std::vector<SceneRecord> out;
  std::string line;
  std::size_t index = 0;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    out.push_back(parse_record(line, index, expected_channels));
    ++index;
  }
  return out;
}

void write_manifest(const std::filesystem::path& dir, const DatasetManifest& m) {
  std::filesystem::create_directories(dir);
  auto path = dir / "manifest.txt";
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot open manifest for writing: " + path.string());
  os << "categories=" << m.categories << "\n";
  os << "channels=" << m.channels << "\n";
  os << "height=" << m.height << "\n";
  os << "width=" << m.width << "\n";
  os << "proposals_per_image=" << m.proposals_per_image << "\n";
  os << "seed=" << m.seed << "\n";
  os << "config_hash=" << to_hex_u64(m.config_hash) << "\n";
  for (const auto& [name, size] : m.split_sizes) os << "split." << name << "=" << size << "\n";
  if (!os) throw std::runtime_error("failed writing manifest: " + path.string());
}

DatasetManifest read_manifest(const std::filesystem::path& dir) {
  auto path = dir / "manifest.txt";
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("missing manifest: " + path.string());
  DatasetManifest m;
  std::string line;
  while (std::getline(is, line)) {
    if (line.empty() || line[0] == '#') continue;
    auto eq = line.find('=');
    if (eq == std::string::npos) throw ValidationError("manifest: bad line: '" + line + "'");
    std::string key = line.substr(0, eq), value = line.substr(eq + 1);
    if (key == "categories")
      m.categories = int(parse_int(value, key));
    else if (key == "channels")
      m.channels = int(parse_int(value, key));
    else if (key == "height")
      m.height = int(parse_int(value, key));
    else if (key == "width")
      m.width = int(parse_int(value, key));
    else if (key == "proposals_per_image")
      m.proposals_per_image = int(parse_int(value, key));
    else if (key == "seed")
      m.seed = std::uint64_t(parse_int(value, key));
    else if (key == "config_hash")
      m.config_hash = std::stoull(value, nullptr, 16);
    else if (key.starts_with("split."))
      m.split_sizes[key.substr(6)] = parse_int(value, key);
    else
      throw ValidationError("manifest: unknown key '" + key + "'");
  }
  if (m.categories < 2 || m.height < 1 || m.width < 1 || m.channels < 1)
    throw ValidationError("manifest: incomplete or invalid fields in " + path.string());
  return m;
}

}  // namespace iahash
