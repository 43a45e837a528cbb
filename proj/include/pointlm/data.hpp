#pragma once
// Procedural point-cloud/text corpus: six colored primitives sampled
// uniformly by surface area, captioned from a small template bank. Every
// cloud is a pure function of its spec, every split a pure function of the
// corpus seed, so datasets regenerate bit-identically anywhere.

#include <array>
#include <optional>
#include <string>
#include <vector>

#include "pointlm/common.hpp"

namespace pointlm {

enum class Shape { kSphere, kCube, kCylinder, kCone, kTorus, kPyramid };
enum class Color { kRed, kGreen, kBlue, kYellow, kWhite, kBlack };

inline constexpr int kNumShapes = 6;
inline constexpr int kNumColors = 6;

// Fewer points than this cannot outline any of the shapes.
inline constexpr int kMinCloudPoints = 8;

const char* shape_name(Shape s);
const char* color_name(Color c);
std::array<double, 3> color_rgb(Color c);

// First shape/color word found in a word list (lowercased words expected);
// backs the class-word scoring of generated text.
std::optional<Shape> find_shape_word(const std::vector<std::string>& words);
std::optional<Color> find_color_word(const std::vector<std::string>& words);

struct ShapeSpec {
  Shape shape = Shape::kSphere;
  Color color = Color::kRed;
  double scale = 1.0;      // characteristic radius
  int n_points = 512;      // >= 8
  double noise = 0.0;      // absolute Gaussian jitter on xyz, >= 0
  std::uint64_t seed = 0;
};

// N x 6 rows of (x, y, z, r, g, b), centered at the origin, double precision
// (storage quantizes to f32 on save). Points sampled uniformly by area on the
// primitive's surface, then jittered by `noise`.
Matd gen_shape(const ShapeSpec& spec);

struct Sample {
  std::string cloud_ref;  // inline "spc1:..." or a path relative to the jsonl
  std::string instruction;
  std::string response;
  std::string task;  // "caption" | "classify" | "qa"
};

struct CorpusConfig {
  int train_count = 3000;
  int val_count = 300;
  int test_count = 300;
  int n_points = 512;
  double noise = 0.02;
  std::uint64_t seed = 7;
  bool inline_clouds = false;  // true: embed clouds in the jsonl lines
};

// One split, deterministically derived from (config, split name). Clouds are
// not written; cloud_ref is either inline or "clouds/<split>_<index>.spc1".
std::vector<Sample> gen_split(const CorpusConfig& cfg,
                              const std::string& split, int count);

// Regenerate the cloud belonging to a sample index of a split (the same spec
// gen_split used for its cloud_ref).
ShapeSpec sample_shape_spec(const CorpusConfig& cfg, const std::string& split,
                            int index);

struct DatasetManifest {
  std::string root;
  std::vector<std::pair<std::string, int>> splits;  // (name, count)
};

// Write train/val/test jsonl files plus cloud files (unless inline) and a
// manifest.json under out_dir; returns the manifest.
DatasetManifest gen_corpus(const CorpusConfig& cfg, const std::string& out_dir);

std::string sample_to_json(const Sample& s);
void write_jsonl(const std::string& path, const std::vector<Sample>& samples);
// Errors name the offending line number.
std::vector<Sample> load_jsonl(const std::string& path);

// Distinct words across all instructions and responses, for vocabulary
// construction.
std::vector<std::string> corpus_words(const std::vector<Sample>& samples);

}  // namespace pointlm
