#pragma once
// Versioned single-file container for a trained model: a JSON header (model
// configuration, vocabulary, tensor directory, optimizer step, RNG state)
// followed by raw little-endian float32 tensor payloads. Writes go to a
// temporary file and are renamed into place, so a crash never leaves a
// half-written checkpoint behind. Byte-stream content is a pure function of
// the saved state, which is what makes training runs comparable bit-for-bit.

#include <map>
#include <string>
#include <vector>

#include "pointlm/model.hpp"
#include "pointlm/optim.hpp"
#include "pointlm/rng.hpp"

namespace pointlm {

struct CheckpointMeta {
  ModelConfig model;
  std::vector<std::string> vocab_words;  // in token-id order
  bool has_optimizer = false;
  long long optimizer_step = 0;
  bool has_rng = false;
  Rng::State rng{};
  std::map<std::string, std::string> extra;  // stage provenance, etc.
};

// optimizer == nullptr saves weights only (no moments); rng == nullptr omits
// the stream state.
void save_checkpoint(const std::string& path, const ModelConfig& mc,
                     const std::vector<std::string>& vocab_words,
                     const ParamStore<float>& store,
                     const AdamW<float>* optimizer, const Rng* rng,
                     const std::map<std::string, std::string>& extra = {});

// Fills an empty store with the saved tensors (moments included when
// present) and returns everything else from the header.
CheckpointMeta load_checkpoint(const std::string& path,
                               ParamStore<float>& store);

// Header-only read (cheap peek at config/provenance).
CheckpointMeta read_checkpoint_meta(const std::string& path);

}  // namespace pointlm
