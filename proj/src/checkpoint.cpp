#include "pointlm/checkpoint.hpp"

#include <bit>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <json.hpp>
#include <sstream>

namespace pointlm {

namespace {

using nlohmann::json;

constexpr char kMagic[4] = {'P', 'L', 'C', 'K'};
constexpr std::uint32_t kVersion = 1;
constexpr std::uint64_t kMaxHeaderBytes = 1ull << 26;
constexpr std::uint64_t kMaxElements = 1ull << 31;

void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(char((v >> (8 * i)) & 0xff));
}

void put_u64(std::string& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(char((v >> (8 * i)) & 0xff));
}

std::uint32_t get_u32(const std::string& s, std::size_t off) {
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i)
    v |= std::uint32_t(std::uint8_t(s[off + std::size_t(i)])) << (8 * i);
  return v;
}

std::uint64_t get_u64(const std::string& s, std::size_t off) {
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i)
    v |= std::uint64_t(std::uint8_t(s[off + std::size_t(i)])) << (8 * i);
  return v;
}

std::string hex64(std::uint64_t v) {
  char buf[20];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

std::uint64_t from_hex64(const std::string& s, const std::string& what) {
  if (s.size() != 16 || s.find_first_not_of("0123456789abcdef") !=
                            std::string::npos)
    throw io_error("checkpoint: malformed " + what + " word '" + s + "'");
  return std::stoull(s, nullptr, 16);
}

void append_tensor(std::string& out, const Matf& m) {
  for (Eigen::Index i = 0; i < m.rows(); ++i)
    for (Eigen::Index j = 0; j < m.cols(); ++j)
      put_u32(out, std::bit_cast<std::uint32_t>(m(i, j)));
}

Matf read_tensor(const std::string& s, std::size_t& off, Eigen::Index rows,
                 Eigen::Index cols) {
  Matf m(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i)
    for (Eigen::Index j = 0; j < cols; ++j) {
      m(i, j) = std::bit_cast<float>(get_u32(s, off));
      off += 4;
    }
  return m;
}

json model_to_json(const ModelConfig& mc) {
  json j;
  j["tokenizer"]["n_groups"] = mc.tok.n_groups;
  j["tokenizer"]["group_size"] = mc.tok.group_size;
  j["tokenizer"]["d_group"] = mc.tok.d_group;
  j["tokenizer"]["d_model"] = mc.tok.d_model;
  j["tokenizer"]["codebook_size"] = mc.tok.codebook_size;
  j["tokenizer"]["pooling"] = to_string(mc.tok.pooling);
  j["tokenizer"]["commitment_beta"] = mc.tok.commitment_beta;
  j["tokenizer"]["quantize"] = mc.tok.quantize;
  j["lm"]["d_model"] = mc.lm.d_model;
  j["lm"]["n_layers"] = mc.lm.n_layers;
  j["lm"]["n_heads"] = mc.lm.n_heads;
  j["lm"]["d_ff"] = mc.lm.d_ff;
  j["lm"]["max_ctx"] = mc.lm.max_ctx;
  j["lm"]["vocab_size"] = mc.lm.vocab_size;
  j["vq_weight"] = mc.vq_weight;
  j["cloud_dim"] = mc.cloud_dim;
  return j;
}

template <typename T>
T req(const json& j, const char* key) {
  if (!j.contains(key))
    throw io_error(std::string("checkpoint: header missing '") + key + "'");
  try {
    return j.at(key).get<T>();
  } catch (const json::exception& e) {
    throw io_error(std::string("checkpoint: bad header field '") + key +
                   "': " + e.what());
  }
}

ModelConfig model_from_json(const json& j) {
  ModelConfig mc;
  const json& t = j.contains("tokenizer") ? j.at("tokenizer") : json::object();
  mc.tok.n_groups = req<int>(t, "n_groups");
  mc.tok.group_size = req<int>(t, "group_size");
  mc.tok.d_group = req<int>(t, "d_group");
  mc.tok.d_model = req<int>(t, "d_model");
  mc.tok.codebook_size = req<int>(t, "codebook_size");
  mc.tok.pooling = pooling_from_string(req<std::string>(t, "pooling"));
  mc.tok.commitment_beta = req<double>(t, "commitment_beta");
  mc.tok.quantize = req<bool>(t, "quantize");
  const json& l = j.contains("lm") ? j.at("lm") : json::object();
  mc.lm.d_model = req<int>(l, "d_model");
  mc.lm.n_layers = req<int>(l, "n_layers");
  mc.lm.n_heads = req<int>(l, "n_heads");
  mc.lm.d_ff = req<int>(l, "d_ff");
  mc.lm.max_ctx = req<int>(l, "max_ctx");
  mc.lm.vocab_size = req<int>(l, "vocab_size");
  mc.vq_weight = req<double>(j, "vq_weight");
  mc.cloud_dim = req<int>(j, "cloud_dim");
  return mc;
}

std::string read_file(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw io_error("checkpoint: cannot open " + path);
  std::stringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

struct ParsedHeader {
  json j;
  std::size_t payload_off;
};

ParsedHeader parse_header(const std::string& bytes, const std::string& path) {
  if (bytes.size() < 16 || std::memcmp(bytes.data(), kMagic, 4) != 0)
    throw io_error("checkpoint: " + path + " is missing the PLCK magic");
  const std::uint32_t version = get_u32(bytes, 4);
  if (version != kVersion)
    throw io_error("checkpoint: " + path + " has version " +
                   std::to_string(version) + ", expected " +
                   std::to_string(kVersion));
  const std::uint64_t header_len = get_u64(bytes, 8);
  if (header_len > kMaxHeaderBytes || 16 + header_len > bytes.size())
    throw io_error("checkpoint: " + path + " header length " +
                   std::to_string(header_len) + " exceeds the file");
  ParsedHeader out;
  try {
    out.j = json::parse(bytes.substr(16, std::size_t(header_len)));
  } catch (const json::exception& e) {
    throw io_error("checkpoint: " + path + " header is not valid JSON: " +
                   e.what());
  }
  out.payload_off = 16 + std::size_t(header_len);
  return out;
}

CheckpointMeta meta_from_header(const json& h) {
  CheckpointMeta meta;
  if (!h.contains("model"))
    throw io_error("checkpoint: header missing 'model'");
  meta.model = model_from_json(h.at("model"));
  meta.vocab_words = req<std::vector<std::string>>(h, "vocab");
  if (h.contains("optimizer")) {
    meta.has_optimizer = true;
    meta.optimizer_step = req<long long>(h.at("optimizer"), "step");
  }
  if (h.contains("rng")) {
    const json& r = h.at("rng");
    meta.has_rng = true;
    const auto words = req<std::vector<std::string>>(r, "s");
    if (words.size() != 4)
      throw io_error("checkpoint: rng state must have 4 words");
    for (int i = 0; i < 4; ++i)
      meta.rng.s[i] = from_hex64(words[std::size_t(i)], "rng state");
    meta.rng.has_cached_normal = req<bool>(r, "has_cached_normal");
    meta.rng.cached_normal = req<double>(r, "cached_normal");
  }
  if (h.contains("extra"))
    meta.extra = req<std::map<std::string, std::string>>(h, "extra");
  return meta;
}

}  // namespace

void save_checkpoint(const std::string& path, const ModelConfig& mc,
                     const std::vector<std::string>& vocab_words,
                     const ParamStore<float>& store,
                     const AdamW<float>* optimizer, const Rng* rng,
                     const std::map<std::string, std::string>& extra) {
  json header;
  header["model"] = model_to_json(mc);
  header["vocab"] = vocab_words;
  json tensors = json::array();
  for (const auto& p : store.params()) {
    json t;
    t["name"] = p.name;
    t["rows"] = p.value.rows();
    t["cols"] = p.value.cols();
    t["decay"] = p.decay;
    tensors.push_back(std::move(t));
  }
  header["tensors"] = std::move(tensors);
  if (optimizer) header["optimizer"]["step"] = optimizer->step_count();
  if (rng) {
    const Rng::State st = rng->state();
    json r;
    for (int i = 0; i < 4; ++i) r["s"].push_back(hex64(st.s[i]));
    r["has_cached_normal"] = st.has_cached_normal;
    r["cached_normal"] = st.cached_normal;
    header["rng"] = std::move(r);
  }
  if (!extra.empty()) header["extra"] = extra;

  std::string out;
  const std::string header_text = header.dump();
  out.reserve(16 + header_text.size() +
              std::size_t(store.total_elements()) * 4 *
                  (optimizer ? 3 : 1));
  out.append(kMagic, 4);
  put_u32(out, kVersion);
  put_u64(out, header_text.size());
  out += header_text;
  for (const auto& p : store.params()) append_tensor(out, p.value);
  if (optimizer) {
    for (const auto& p : store.params()) {
      append_tensor(out, p.m);
      append_tensor(out, p.v);
    }
  }

  const std::string tmp = path + ".tmp";
  {
    std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
    if (!f) throw io_error("checkpoint: cannot write " + tmp);
    f.write(out.data(), std::streamsize(out.size()));
    if (!f) throw io_error("checkpoint: write failed for " + tmp);
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec)
    throw io_error("checkpoint: rename to " + path + " failed: " +
                   ec.message());
}

CheckpointMeta load_checkpoint(const std::string& path,
                               ParamStore<float>& store) {
  require(store.size() == 0, "load_checkpoint: target store is not empty");
  const std::string bytes = read_file(path);
  const ParsedHeader h = parse_header(bytes, path);
  CheckpointMeta meta = meta_from_header(h.j);

  if (!h.j.contains("tensors") || !h.j.at("tensors").is_array())
    throw io_error("checkpoint: " + path + " header missing tensor list");
  std::size_t off = h.payload_off;
  std::uint64_t total = 0;
  struct Dir {
    std::string name;
    Eigen::Index rows, cols;
    bool decay;
  };
  std::vector<Dir> dir;
  for (const auto& t : h.j.at("tensors")) {
    Dir d;
    d.name = req<std::string>(t, "name");
    d.rows = req<Eigen::Index>(t, "rows");
    d.cols = req<Eigen::Index>(t, "cols");
    d.decay = req<bool>(t, "decay");
    if (d.rows <= 0 || d.cols <= 0)
      throw io_error("checkpoint: tensor '" + d.name + "' has bad shape");
    total += std::uint64_t(d.rows) * std::uint64_t(d.cols);
    if (total > kMaxElements)
      throw io_error("checkpoint: tensor payload implausibly large");
    dir.push_back(std::move(d));
  }
  const std::uint64_t copies = meta.has_optimizer ? 3 : 1;
  if (bytes.size() != h.payload_off + total * 4 * copies)
    throw io_error("checkpoint: " + path + " payload is " +
                   std::to_string(bytes.size() - h.payload_off) +
                   " bytes, expected " + std::to_string(total * 4 * copies));

  for (const auto& d : dir)
    store.add(d.name, read_tensor(bytes, off, d.rows, d.cols), d.decay);
  if (meta.has_optimizer) {
    for (const auto& d : dir) {
      auto& p = store.at(d.name);
      p.m = read_tensor(bytes, off, d.rows, d.cols);
      p.v = read_tensor(bytes, off, d.rows, d.cols);
    }
  }
  return meta;
}

CheckpointMeta read_checkpoint_meta(const std::string& path) {
  const std::string bytes = read_file(path);
  return meta_from_header(parse_header(bytes, path).j);
}

}  // namespace pointlm
