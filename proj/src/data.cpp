#include "pointlm/data.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <json.hpp>
#include <set>

#include "pointlm/rng.hpp"
#include "pointlm/spc1.hpp"
#include "pointlm/text.hpp"

namespace pointlm {

namespace {

constexpr double kPi = 3.14159265358979323846;

const char* const kShapeNames[kNumShapes] = {"sphere", "cube",  "cylinder",
                                             "cone",   "torus", "pyramid"};
const char* const kColorNames[kNumColors] = {"red",    "green", "blue",
                                             "yellow", "white", "black"};
const std::array<double, 3> kColorRgb[kNumColors] = {
    {1, 0, 0}, {0, 1, 0}, {0, 0, 1}, {1, 1, 0}, {1, 1, 1}, {0, 0, 0}};

// size vocabulary and the scales it names; small objects keep the same
// absolute surface noise, so after normalization they look rougher — that
// roughness is the geometric cue for the size word
const char* const kSizeWords[2] = {"small", "large"};
const double kSizeScales[2] = {0.6, 1.5};

Eigen::RowVector3d sphere_point(Rng& rng, double s) {
  while (true) {
    Eigen::RowVector3d v(rng.normal(), rng.normal(), rng.normal());
    const double n = v.norm();
    if (n > 1e-12) return v * (s / n);
  }
}

Eigen::RowVector3d cube_point(Rng& rng, double s) {
  const std::size_t face = rng.uniform_index(6);
  const int axis = int(face / 2);
  const double sign = (face % 2 == 0) ? 1.0 : -1.0;
  Eigen::RowVector3d p(rng.uniform(-s, s), rng.uniform(-s, s),
                       rng.uniform(-s, s));
  p[axis] = sign * s;
  return p;
}

Eigen::RowVector3d cylinder_point(Rng& rng, double s) {
  const double r = 0.6 * s;  // half-height s
  const double lateral = 2.0 * kPi * r * (2.0 * s);
  const double caps = 2.0 * kPi * r * r;
  const double theta = rng.uniform(0.0, 2.0 * kPi);
  if (rng.uniform() * (lateral + caps) < lateral) {
    return {r * std::cos(theta), r * std::sin(theta), rng.uniform(-s, s)};
  }
  const double rho = r * std::sqrt(rng.uniform());
  const double z = rng.uniform() < 0.5 ? s : -s;
  return {rho * std::cos(theta), rho * std::sin(theta), z};
}

Eigen::RowVector3d cone_point(Rng& rng, double s) {
  // apex at +s, base disk of radius r at -s
  const double r = 0.8 * s;
  const double h = 2.0 * s;
  const double lateral = kPi * r * std::sqrt(r * r + h * h);
  const double base = kPi * r * r;
  const double theta = rng.uniform(0.0, 2.0 * kPi);
  if (rng.uniform() * (lateral + base) < lateral) {
    // area grows linearly from the apex, so the apex-distance fraction is
    // sqrt-distributed
    const double t = std::sqrt(rng.uniform());
    const double rho = t * r;
    return {rho * std::cos(theta), rho * std::sin(theta), s - t * h};
  }
  const double rho = r * std::sqrt(rng.uniform());
  return {rho * std::cos(theta), rho * std::sin(theta), -s};
}

Eigen::RowVector3d torus_point(Rng& rng, double s) {
  const double big_r = 0.7 * s;
  const double small_r = 0.3 * s;
  const double theta = rng.uniform(0.0, 2.0 * kPi);
  // rejection on the tube angle: surface density is proportional to
  // big_r + small_r*cos(phi)
  double phi;
  while (true) {
    phi = rng.uniform(0.0, 2.0 * kPi);
    if (rng.uniform() * (big_r + small_r) <= big_r + small_r * std::cos(phi))
      break;
  }
  const double ring = big_r + small_r * std::cos(phi);
  return {ring * std::cos(theta), ring * std::sin(theta),
          small_r * std::sin(phi)};
}

Eigen::RowVector3d pyramid_point(Rng& rng, double s) {
  // square base of half-side b at -s, apex at +s
  const double b = 0.8 * s;
  const Eigen::RowVector3d apex(0, 0, s);
  const Eigen::RowVector3d corners[4] = {
      {b, b, -s}, {-b, b, -s}, {-b, -b, -s}, {b, -b, -s}};
  const double base_area = 4.0 * b * b;
  // all four triangular faces are congruent
  const Eigen::RowVector3d e1 = corners[1] - apex;
  const Eigen::RowVector3d e2 = corners[0] - apex;
  const double tri_area = 0.5 * e1.cross(e2).norm();
  const double total = base_area + 4.0 * tri_area;
  if (rng.uniform() * total < base_area) {
    return {rng.uniform(-b, b), rng.uniform(-b, b), -s};
  }
  const std::size_t face = rng.uniform_index(4);
  const Eigen::RowVector3d c1 = corners[face];
  const Eigen::RowVector3d c2 = corners[(face + 1) % 4];
  double u = rng.uniform();
  double v = rng.uniform();
  if (u + v > 1.0) {
    u = 1.0 - u;
    v = 1.0 - v;
  }
  return apex + u * (c1 - apex) + v * (c2 - apex);
}

}  // namespace

const char* shape_name(Shape s) { return kShapeNames[int(s)]; }
const char* color_name(Color c) { return kColorNames[int(c)]; }
std::array<double, 3> color_rgb(Color c) { return kColorRgb[int(c)]; }

std::optional<Shape> find_shape_word(const std::vector<std::string>& words) {
  for (const auto& w : words)
    for (int s = 0; s < kNumShapes; ++s)
      if (w == kShapeNames[s]) return Shape(s);
  return std::nullopt;
}

std::optional<Color> find_color_word(const std::vector<std::string>& words) {
  for (const auto& w : words)
    for (int c = 0; c < kNumColors; ++c)
      if (w == kColorNames[c]) return Color(c);
  return std::nullopt;
}

Matd gen_shape(const ShapeSpec& spec) {
  require(spec.n_points >= kMinCloudPoints, "gen_shape: n_points must be >= 8");
  require(spec.noise >= 0.0, "gen_shape: noise must be >= 0");
  require(spec.scale > 0.0, "gen_shape: scale must be positive");
  Rng rng(spec.seed);
  Matd cloud(spec.n_points, 6);
  const auto rgb = color_rgb(spec.color);
  for (int i = 0; i < spec.n_points; ++i) {
    Eigen::RowVector3d p;
    switch (spec.shape) {
      case Shape::kSphere: p = sphere_point(rng, spec.scale); break;
      case Shape::kCube: p = cube_point(rng, spec.scale); break;
      case Shape::kCylinder: p = cylinder_point(rng, spec.scale); break;
      case Shape::kCone: p = cone_point(rng, spec.scale); break;
      case Shape::kTorus: p = torus_point(rng, spec.scale); break;
      case Shape::kPyramid: p = pyramid_point(rng, spec.scale); break;
    }
    if (spec.noise > 0.0) {
      p[0] += spec.noise * rng.normal();
      p[1] += spec.noise * rng.normal();
      p[2] += spec.noise * rng.normal();
    }
    cloud(i, 0) = p[0];
    cloud(i, 1) = p[1];
    cloud(i, 2) = p[2];
    cloud(i, 3) = rgb[0];
    cloud(i, 4) = rgb[1];
    cloud(i, 5) = rgb[2];
  }
  return cloud;
}

namespace {

std::string cloud_file_name(const std::string& split, int index) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "clouds/%s_%06d.spc1", split.c_str(), index);
  return buf;
}

struct SampleText {
  std::string instruction;
  std::string response;
  std::string task;
};

SampleText make_text(Rng& rng, Shape shape, Color color, int size_id) {
  const std::string cs = std::string(color_name(color)) + " " +
                         shape_name(shape);
  const double roll = rng.uniform();
  const std::size_t variant = rng.uniform_index(2);
  if (roll < 0.5) {
    if (variant == 0) return {"describe this object", "a " + cs, "caption"};
    return {"give a short caption",
            "this is a " + std::string(kSizeWords[size_id]) + " " + cs,
            "caption"};
  }
  if (roll < 0.75) {
    if (variant == 0) return {"what is this?", "a " + cs, "classify"};
    return {"this is an object of", std::string(shape_name(shape)),
            "classify"};
  }
  if (variant == 0)
    return {"what color is this object?", color_name(color), "qa"};
  return {"what shape is this object?", shape_name(shape), "qa"};
}

}  // namespace

ShapeSpec sample_shape_spec(const CorpusConfig& cfg, const std::string& split,
                            int index) {
  // class identity rotates through all 36 shape-color pairs for balance;
  // everything stochastic comes from a per-sample stream
  Rng rng(derive_seed(cfg.seed, "data/" + split, std::uint64_t(index)));
  const int class_id = index % (kNumShapes * kNumColors);
  ShapeSpec spec;
  spec.shape = Shape(class_id % kNumShapes);
  spec.color = Color(class_id / kNumShapes);
  spec.scale = kSizeScales[rng.uniform_index(2)];
  spec.n_points = cfg.n_points;
  spec.noise = cfg.noise;
  spec.seed = derive_seed(cfg.seed, "cloud/" + split, std::uint64_t(index));
  return spec;
}

std::vector<Sample> gen_split(const CorpusConfig& cfg, const std::string& split,
                              int count) {
  require(count > 0, "gen_split: count must be positive");
  require(cfg.n_points >= kMinCloudPoints, "gen_split: n_points must be >= 8");
  std::vector<Sample> out;
  out.reserve(std::size_t(count));
  for (int i = 0; i < count; ++i) {
    // mirror sample_shape_spec's draw order: scale first, then text
    Rng rng(derive_seed(cfg.seed, "data/" + split, std::uint64_t(i)));
    const int class_id = i % (kNumShapes * kNumColors);
    const Shape shape = Shape(class_id % kNumShapes);
    const Color color = Color(class_id / kNumShapes);
    const std::size_t size_id = rng.uniform_index(2);
    const SampleText text = make_text(rng, shape, color, int(size_id));
    Sample s;
    s.instruction = text.instruction;
    s.response = text.response;
    s.task = text.task;
    if (cfg.inline_clouds) {
      ShapeSpec spec = sample_shape_spec(cfg, split, i);
      s.cloud_ref = inline_cloud_ref(gen_shape(spec).cast<float>());
    } else {
      s.cloud_ref = cloud_file_name(split, i);
    }
    out.push_back(std::move(s));
  }
  return out;
}

DatasetManifest gen_corpus(const CorpusConfig& cfg,
                           const std::string& out_dir) {
  namespace fs = std::filesystem;
  fs::create_directories(out_dir);
  if (!cfg.inline_clouds) fs::create_directories(out_dir + "/clouds");

  DatasetManifest manifest;
  manifest.root = out_dir;
  const std::pair<std::string, int> splits[] = {{"train", cfg.train_count},
                                                {"val", cfg.val_count},
                                                {"test", cfg.test_count}};
  for (const auto& [name, count] : splits) {
    const auto samples = gen_split(cfg, name, count);
    write_jsonl(out_dir + "/" + name + ".jsonl", samples);
    if (!cfg.inline_clouds) {
      for (int i = 0; i < count; ++i) {
        const ShapeSpec spec = sample_shape_spec(cfg, name, i);
        save_spc1(out_dir + "/" + cloud_file_name(name, i),
                  gen_shape(spec).cast<float>());
      }
    }
    manifest.splits.emplace_back(name, count);
  }

  nlohmann::json j;
  j["seed"] = cfg.seed;
  j["n_points"] = cfg.n_points;
  j["noise"] = cfg.noise;
  j["inline_clouds"] = cfg.inline_clouds;
  for (const auto& [name, count] : manifest.splits) j["splits"][name] = count;
  std::ofstream f(out_dir + "/manifest.json");
  require(bool(f), "gen_corpus: cannot write manifest in " + out_dir);
  f << j.dump(2) << "\n";
  return manifest;
}

std::string sample_to_json(const Sample& s) {
  nlohmann::json j;
  j["cloud"] = s.cloud_ref;
  j["instruction"] = s.instruction;
  j["response"] = s.response;
  j["task"] = s.task;
  return j.dump();
}

void write_jsonl(const std::string& path, const std::vector<Sample>& samples) {
  std::ofstream f(path);
  if (!f) throw io_error("write_jsonl: cannot open " + path);
  for (const auto& s : samples) f << sample_to_json(s) << "\n";
  if (!f) throw io_error("write_jsonl: write failed for " + path);
}

std::vector<Sample> load_jsonl(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw io_error("load_jsonl: cannot open " + path);
  std::vector<Sample> out;
  std::string line;
  int line_no = 0;
  while (std::getline(f, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      throw io_error("load_jsonl: " + path + " line " +
                     std::to_string(line_no) + ": " + e.what());
    }
    Sample s;
    for (const char* key : {"cloud", "instruction", "response", "task"}) {
      if (!j.contains(key) || !j[key].is_string())
        throw io_error("load_jsonl: " + path + " line " +
                       std::to_string(line_no) + ": missing string field '" +
                       key + "'");
    }
    s.cloud_ref = j["cloud"].get<std::string>();
    s.instruction = j["instruction"].get<std::string>();
    s.response = j["response"].get<std::string>();
    s.task = j["task"].get<std::string>();
    if (s.response.empty())
      throw io_error("load_jsonl: " + path + " line " +
                     std::to_string(line_no) + ": empty response");
    out.push_back(std::move(s));
  }
  return out;
}

std::vector<std::string> corpus_words(const std::vector<Sample>& samples) {
  std::set<std::string> seen;
  for (const auto& s : samples) {
    for (const auto& w : split_words(s.instruction)) seen.insert(w);
    for (const auto& w : split_words(s.response)) seen.insert(w);
  }
  return {seen.begin(), seen.end()};
}

}  // namespace pointlm
