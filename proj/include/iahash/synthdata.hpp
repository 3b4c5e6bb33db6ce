#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "iahash/rng.hpp"

namespace iahash {

// Binary per-category relevance flags for one image.
struct LabelVector {
  std::vector<std::uint8_t> y;

  int count() const {
    int n = 0;
    for (auto v : y) n += v;
    return n;
  }
  friend bool operator==(const LabelVector&, const LabelVector&) = default;
};

// Pixel rectangle, end-exclusive: x1 <= x < x2, y1 <= y < y2.
struct Box {
  int x1 = 0, y1 = 0, x2 = 0, y2 = 0;

  int width() const { return x2 - x1; }
  int height() const { return y2 - y1; }
  long long area() const { return (long long)width() * height(); }
  friend bool operator==(const Box&, const Box&) = default;
};

double iou(const Box& a, const Box& b);

struct SceneObject {
  int category = 0;
  Box box;
  friend bool operator==(const SceneObject&, const SceneObject&) = default;
};

// A synthetic multi-label image with known object placements.
struct Scene {
  std::int64_t id = 0;
  int channels = 1;
  int height = 0;
  int width = 0;
  std::vector<float> pixels;  // [channel][y][x], values in [0, 1]
  std::vector<SceneObject> objects;
  LabelVector labels;

  float& at(int c, int y, int x) { return pixels[(std::size_t(c) * height + y) * width + x]; }
  float at(int c, int y, int x) const { return pixels[(std::size_t(c) * height + y) * width + x]; }
  friend bool operator==(const Scene&, const Scene&) = default;
};

// Candidate object box plus its coordinates scaled to [0, 1] by the image
// width/height: (x1/W, y1/H, x2/W, y2/H).
struct Proposal {
  Box box;
  std::array<double, 4> coords{};
  friend bool operator==(const Proposal&, const Proposal&) = default;
};

std::array<double, 4> normalize_box(const Box& box, int width, int height);

struct SceneConfig {
  int categories = 4;
  int channels = 1;
  int height = 32;
  int width = 32;
  int min_objects = 1;
  int max_objects = 3;
  double object_decay = 0.5;  // P(k objects) proportional to decay^(k - min)
  int min_box = 10;
  int max_box = 20;
  double noise_level = 0.25;
  double max_overlap = 0.3;  // max pairwise IoU between placed objects
  int max_retries = 100;

  std::string describe() const;
};

void validate(const SceneConfig& cfg);

// Places k objects of distinct categories, each a category-characteristic
// oriented texture, over a noise background.
Scene generate_scene(SeededRng& rng, const SceneConfig& cfg);

// Jittered copies of the true object boxes followed by random distractor
// boxes, exactly n in total. Jittered copies keep IoU >= 0.5 with their
// source box.
std::vector<Proposal> generate_proposals(const Scene& scene, int n, SeededRng& rng,
                                         double jitter = 0.2);

struct SceneRecord {
  Scene scene;
  std::vector<Proposal> proposals;
  friend bool operator==(const SceneRecord&, const SceneRecord&) = default;
};

struct DatasetManifest {
  int categories = 0;
  int channels = 0;
  int height = 0;
  int width = 0;
  int proposals_per_image = 0;
  std::uint64_t seed = 0;
  std::uint64_t config_hash = 0;
  std::map<std::string, std::int64_t> split_sizes;
};

// One text record per image:
//   id c y_1..y_c H W <base64 f32le pixels> k (cat x1 y1 x2 y2)*k n (x1 y1 x2 y2)*n
void write_split(const std::filesystem::path& dir, const std::string& split,
                 const std::vector<SceneRecord>& records);
std::vector<SceneRecord> read_split(const std::filesystem::path& dir, const std::string& split,
                                    int expected_channels);

void write_manifest(const std::filesystem::path& dir, const DatasetManifest& m);
DatasetManifest read_manifest(const std::filesystem::path& dir);

std::filesystem::path split_path(const std::filesystem::path& dir, const std::string& split);

}  // namespace iahash
