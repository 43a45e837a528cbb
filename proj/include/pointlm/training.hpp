#pragma once
// The three-stage training driver.
//
//   stage 1  supervised, tokenizer + first k transformer blocks + control
//            token embeddings trainable, the rest frozen
//   stage 2  supervised, everything trainable
//   stage 3  group-relative preference optimization: the model samples a
//            group of answers per prompt, the reward ranks them, and the
//            policy gradient pushes probability toward the better ones
//
// All stages share one AdamW instance, one schedule shape (linear warmup
// into cosine decay, re-spanned per stage), and one serialized RNG stream,
// so a run is a pure function of its config.

#include <map>
#include <memory>
#include <string>
#include <vector>

#include "pointlm/checkpoint.hpp"
#include "pointlm/config.hpp"
#include "pointlm/data.hpp"
#include "pointlm/model.hpp"
#include "pointlm/optim.hpp"
#include "pointlm/rewards.hpp"

namespace pointlm {

// One sample ready for the forward pass: resolved cloud plus encoded text.
struct TrainSample {
  Matf cloud;
  std::vector<int> instr_ids;
  std::vector<int> resp_ids;
  std::string instruction;
  std::string response;
  std::string task;
};

// Resolves cloud references (file refs relative to base_dir) and encodes the
// text through the vocabulary.
std::vector<TrainSample> prepare_samples(const std::vector<Sample>& raw,
                                         const Vocab& vocab,
                                         const std::string& base_dir);

// Append-only CSV of per-step measurements. Cells that do not apply to a
// stage (reward during the supervised stages, the losses during the
// preference stage) are left blank; pass NaN for those.
class TrainLog {
 public:
  TrainLog() = default;  // disabled; row() is then a no-op
  explicit TrainLog(const std::string& path);

  static const char* header();

  void row(long long step, int stage, double lr, double ntp_loss,
           double vq_loss, double total_loss, double mean_reward,
           double mean_abs_adv, double codebook_util);

  bool enabled() const { return out_ != nullptr; }

 private:
  std::shared_ptr<std::ostream> out_;
};

// Everything that evolves during training. Freezing is a per-stage policy,
// not state: each runner reapplies its own trainability mask on entry, so a
// reloaded checkpoint needs no extra bookkeeping.
struct TrainState {
  ModelConfig model;
  Vocab vocab;
  ParamStore<float> store;
  AdamW<float> opt;
  Rng rng{0};
  long long steps_done = 0;  // batches processed across all stages
};

TrainState make_train_state(const RunConfig& cfg, const Vocab& vocab);

void save_train_state(const std::string& path, const TrainState& st,
                      std::map<std::string, std::string> extra = {});
TrainState load_train_state(const std::string& path);

struct StageResult {
  int stage = 0;
  long long steps = 0;  // batches processed in this stage
  // Per-epoch mean of the stage objective: total loss for the supervised
  // stages, composite reward for the preference stage.
  std::vector<double> epoch_objective;
  double final_ntp = 0.0;      // supervised stages, last epoch
  double final_vq = 0.0;       // supervised stages, last epoch
  double final_abs_adv = 0.0;  // preference stage, last epoch
  long long groups_skipped = 0;  // groups whose advantages were all zero
};

StageResult run_stage1(TrainState& st, const std::vector<TrainSample>& data,
                       const StageParams& sp, TrainLog* log = nullptr);
StageResult run_stage2(TrainState& st, const std::vector<TrainSample>& data,
                       const StageParams& sp, TrainLog* log = nullptr);
StageResult run_stage3(TrainState& st, const std::vector<TrainSample>& data,
                       const StageParams& sp, const RewardConfig& rc,
                       TrainLog* log = nullptr);

// Sum of response-token log-probabilities (the <eos> slot included) for a
// teacher-forced rollout. The policy-gradient building block, also handy as
// a diagnostic.
double response_log_prob(TrainState& st, const Matf& cloud,
                         const std::vector<int>& instr_ids,
                         const std::vector<int>& resp_ids, int fps_start);

// Adds -(advantage / denom) * d(log pi(rollout)) / d(theta) to the gradient
// buffers; denom spreads the group mean and the prompt-batch mean.
void grpo_rollout_backward(TrainState& st, const Matf& cloud,
                           const std::vector<int>& instr_ids,
                           const std::vector<int>& rollout_ids,
                           double advantage, double denom, int fps_start);

// Sanity environment for the preference update, independent of the language
// model: a softmax policy over n fixed arms with known per-arm rewards,
// trained with the same group standardization and the analytic policy
// gradient. With distinct rewards the best arm should absorb nearly all
// probability mass within a few hundred steps.
struct BanditResult {
  std::vector<double> probs;  // final policy
  int best_arm = 0;           // argmax of probs
};

BanditResult run_grpo_bandit(const std::vector<double>& arm_rewards,
                             int group_size, int steps, double lr,
                             std::uint64_t seed);

}  // namespace pointlm
