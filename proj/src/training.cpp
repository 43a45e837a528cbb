#include "pointlm/training.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <numeric>

#include "pointlm/spc1.hpp"

namespace pointlm {

namespace {

constexpr double kBlank = std::numeric_limits<double>::quiet_NaN();

// CSV cell: fixed short form, blank for "does not apply".
std::string cell(double v) {
  if (!std::isfinite(v)) return "";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

std::vector<int> shuffled_indices(Rng& rng, int n) {
  const std::size_t count = std::size_t(n);
  std::vector<int> order(count);
  std::iota(order.begin(), order.end(), 0);
  for (int i = n - 1; i > 0; --i) {
    const int j = int(rng.uniform_index(std::uint64_t(i) + 1));
    std::swap(order[std::size_t(i)], order[std::size_t(j)]);
  }
  return order;
}

// Wraps the per-tensor message with the step at which training died.
void check_batch_finite(const TrainState& st, int stage, long long step_id,
                        double loss) {
  if (!std::isfinite(loss))
    throw numeric_error("stage " + std::to_string(stage) +
                        ": non-finite loss at step " + std::to_string(step_id));
  try {
    st.store.check_grads_finite();
  } catch (const numeric_error& e) {
    throw numeric_error("stage " + std::to_string(stage) + ", step " +
                        std::to_string(step_id) + ": " + e.what());
  }
}

// log pi(rollout | cloud, instruction) on the tape; shared by the scoring
// helper and the policy-gradient backward so both see the same function.
Value<float> rollout_log_prob_value(TapeBinding<float>& bind,
                                    const ModelConfig& mc, const Matf& cloud,
                                    const std::vector<int>& instr_ids,
                                    const std::vector<int>& resp_ids,
                                    int fps_start) {
  TokenizerOut<float> tok = tokenize_cloud(bind, mc.tok, cloud, fps_start);
  const SequenceLayout seq =
      build_sequence(mc.tok.n_groups, instr_ids, resp_ids, mc.lm.max_ctx,
                     /*allow_empty_response=*/true);
  Value<float> logits = lm_forward(bind, mc.lm, tok.tokens, seq);
  return bind.tape().selected_log_prob_sum(logits, seq.targets, seq.loss_mask);
}

StageResult run_supervised(TrainState& st, const std::vector<TrainSample>& data,
                           const StageParams& sp, int stage_no, TrainLog* log) {
  require(!data.empty(), "stage " + std::to_string(stage_no) + ": no samples");
  st.model.validate();
  if (stage_no == 1)
    apply_stage1_freeze(st.store, st.model, sp.trainable_layers);
  else
    st.store.set_all_trainable();

  const int n = int(data.size());
  const int bs = std::min(sp.batch_size, n);
  const long long batches_per_epoch = (n + bs - 1) / bs;
  const long long total = (long long)(sp.epochs)*batches_per_epoch;
  const auto sched =
      WarmupCosineSchedule::make(sp.base_lr, total, sp.warmup_ratio);

  StageResult res;
  res.stage = stage_no;
  for (int epoch = 0; epoch < sp.epochs; ++epoch) {
    const std::vector<int> order = shuffled_indices(st.rng, n);
    double ep_total = 0.0, ep_ntp = 0.0, ep_vq = 0.0;
    long long ep_samples = 0;
    for (int b0 = 0; b0 < n; b0 += bs) {
      const int bn = std::min(bs, n - b0);
      st.store.zero_grad();
      double bt = 0.0, bntp = 0.0, bvq = 0.0;
      std::vector<int> batch_codes;
      for (int bi = 0; bi < bn; ++bi) {
        const TrainSample& s = data[std::size_t(order[std::size_t(b0 + bi)])];
        const int fps_start =
            int(st.rng.uniform_index(std::uint64_t(s.cloud.rows())));
        Tape<float> tape;
        TapeBinding<float> bind(tape, st.store);
        auto f = forward_sample(bind, st.model, s.cloud, s.instr_ids,
                                s.resp_ids, fps_start);
        tape.backward(tape.scale(f.total_loss, 1.0f / float(bn)));
        bind.accumulate_grads();
        bt += double(f.total_loss.value()(0, 0));
        bntp += double(f.ntp_loss.value()(0, 0));
        bvq += double(f.vq_loss.value()(0, 0));
        batch_codes.insert(batch_codes.end(), f.codes.begin(), f.codes.end());
      }
      const long long step_id = st.steps_done + 1;
      check_batch_finite(st, stage_no, step_id, bt / bn);
      const double lr = sched.at(res.steps);
      st.opt.step(st.store, lr);
      ++res.steps;
      ++st.steps_done;
      if (log) {
        const double util =
            batch_codes.empty()
                ? kBlank
                : codebook_utilization(batch_codes, st.model.tok.codebook_size);
        log->row(st.steps_done, stage_no, lr, bntp / bn, bvq / bn, bt / bn,
                 kBlank, kBlank, util);
      }
      ep_total += bt;
      ep_ntp += bntp;
      ep_vq += bvq;
      ep_samples += bn;
    }
    res.epoch_objective.push_back(ep_total / double(ep_samples));
    if (epoch == sp.epochs - 1) {
      res.final_ntp = ep_ntp / double(ep_samples);
      res.final_vq = ep_vq / double(ep_samples);
    }
  }
  return res;
}

}  // namespace

// ---- samples and logging --------------------------------------------------

std::vector<TrainSample> prepare_samples(const std::vector<Sample>& raw,
                                         const Vocab& vocab,
                                         const std::string& base_dir) {
  std::vector<TrainSample> out;
  out.reserve(raw.size());
  for (const Sample& s : raw) {
    TrainSample t;
    t.cloud = resolve_cloud_ref(s.cloud_ref, base_dir);
    t.instr_ids = vocab.encode(s.instruction);
    t.resp_ids = vocab.encode(s.response);
    require(!t.resp_ids.empty(), "prepare_samples: response '" + s.response +
                                     "' encodes to no tokens");
    t.instruction = s.instruction;
    t.response = s.response;
    t.task = s.task;
    out.push_back(std::move(t));
  }
  return out;
}

TrainLog::TrainLog(const std::string& path) {
  auto f = std::make_shared<std::ofstream>(path, std::ios::trunc);
  if (!*f) throw io_error("train log: cannot open '" + path + "'");
  *f << header() << '\n';
  out_ = f;
}

const char* TrainLog::header() {
  return "step,stage,lr,ntp_loss,vq_loss,total_loss,mean_reward,mean_abs_adv,"
         "codebook_utilization";
}

void TrainLog::row(long long step, int stage, double lr, double ntp_loss,
                   double vq_loss, double total_loss, double mean_reward,
                   double mean_abs_adv, double codebook_util) {
  if (!out_) return;
  *out_ << step << ',' << stage << ',' << cell(lr) << ',' << cell(ntp_loss)
        << ',' << cell(vq_loss) << ',' << cell(total_loss) << ','
        << cell(mean_reward) << ',' << cell(mean_abs_adv) << ','
        << cell(codebook_util) << '\n';
  out_->flush();  // rows must survive an abort mid-stage
}

// ---- state lifecycle ------------------------------------------------------

TrainState make_train_state(const RunConfig& cfg, const Vocab& vocab) {
  cfg.validate();
  TrainState st;
  st.model = cfg.model;
  st.model.lm.vocab_size = vocab.size();
  st.model.validate();
  st.vocab = vocab;
  init_model_params(st.store, st.model, cfg.seed);
  st.rng = Rng(derive_seed(cfg.seed, "train"));
  return st;
}

void save_train_state(const std::string& path, const TrainState& st,
                      std::map<std::string, std::string> extra) {
  extra["steps_done"] = std::to_string(st.steps_done);
  save_checkpoint(path, st.model, st.vocab.words(), st.store, &st.opt, &st.rng,
                  extra);
}

TrainState load_train_state(const std::string& path) {
  TrainState st;
  const CheckpointMeta meta = load_checkpoint(path, st.store);
  st.model = meta.model;
  st.vocab = Vocab::from_words(meta.vocab_words);
  require(st.model.lm.vocab_size == st.vocab.size(),
          "load_train_state: header vocab_size " +
              std::to_string(st.model.lm.vocab_size) + " != " +
              std::to_string(st.vocab.size()) + " stored words");
  if (meta.has_optimizer) st.opt.set_step_count(meta.optimizer_step);
  if (meta.has_rng) st.rng.set_state(meta.rng);
  const auto it = meta.extra.find("steps_done");
  if (it != meta.extra.end()) st.steps_done = std::stoll(it->second);
  return st;
}

// ---- supervised stages ----------------------------------------------------

StageResult run_stage1(TrainState& st, const std::vector<TrainSample>& data,
                       const StageParams& sp, TrainLog* log) {
  return run_supervised(st, data, sp, 1, log);
}

StageResult run_stage2(TrainState& st, const std::vector<TrainSample>& data,
                       const StageParams& sp, TrainLog* log) {
  return run_supervised(st, data, sp, 2, log);
}

// ---- preference stage -----------------------------------------------------

double response_log_prob(TrainState& st, const Matf& cloud,
                         const std::vector<int>& instr_ids,
                         const std::vector<int>& resp_ids, int fps_start) {
  Tape<float> tape;
  TapeBinding<float> bind(tape, st.store);
  return double(rollout_log_prob_value(bind, st.model, cloud, instr_ids,
                                       resp_ids, fps_start)
                    .value()(0, 0));
}

void grpo_rollout_backward(TrainState& st, const Matf& cloud,
                           const std::vector<int>& instr_ids,
                           const std::vector<int>& rollout_ids,
                           double advantage, double denom, int fps_start) {
  require(denom > 0.0, "grpo_rollout_backward: denom must be positive");
  if (advantage == 0.0) return;  // no pull in either direction
  Tape<float> tape;
  TapeBinding<float> bind(tape, st.store);
  Value<float> logp = rollout_log_prob_value(bind, st.model, cloud, instr_ids,
                                             rollout_ids, fps_start);
  tape.backward(tape.scale(logp, float(-advantage / denom)));
  bind.accumulate_grads();
}

StageResult run_stage3(TrainState& st, const std::vector<TrainSample>& data,
                       const StageParams& sp, const RewardConfig& rc,
                       TrainLog* log) {
  require(!data.empty(), "stage 3: no samples");
  rc.validate();
  st.model.validate();
  st.store.set_all_trainable();
  const SentenceEncoder enc;
  const int m = rc.group_size;
  const int n = int(data.size());
  const int bs = std::min(sp.batch_size, n);
  const long long batches_per_epoch = (n + bs - 1) / bs;
  const long long total = (long long)(sp.epochs)*batches_per_epoch;
  const auto sched =
      WarmupCosineSchedule::make(sp.base_lr, total, sp.warmup_ratio);

  StageResult res;
  res.stage = 3;
  for (int epoch = 0; epoch < sp.epochs; ++epoch) {
    const std::vector<int> order = shuffled_indices(st.rng, n);
    double ep_reward = 0.0, ep_abs_adv = 0.0;
    long long ep_rollouts = 0;
    for (int b0 = 0; b0 < n; b0 += bs) {
      const int bn = std::min(bs, n - b0);
      st.store.zero_grad();
      const double denom = double(m) * double(bn);
      double batch_reward = 0.0, batch_abs_adv = 0.0;
      long long batch_rollouts = 0;
      int groups_used = 0;
      std::vector<int> batch_codes;
      for (int bi = 0; bi < bn; ++bi) {
        const TrainSample& s = data[std::size_t(order[std::size_t(b0 + bi)])];
        const int fps_start =
            int(st.rng.uniform_index(std::uint64_t(s.cloud.rows())));
        auto [ptoks, codes] = tokenize_for_inference(st.store, st.model.tok,
                                                     s.cloud, fps_start);
        batch_codes.insert(batch_codes.end(), codes.begin(), codes.end());

        // Teacher-forcing a rollout appends one token (<eos>) to what the
        // decoder consumed, so leave one slot of headroom.
        const int prompt_rows =
            3 + st.model.tok.n_groups + int(s.instr_ids.size());
        const int room = st.model.lm.max_ctx - prompt_rows - 1;
        require(room >= 1, "stage 3: prompt of " + std::to_string(prompt_rows) +
                               " rows leaves no room to answer within "
                               "max_ctx " +
                               std::to_string(st.model.lm.max_ctx));
        GenerateOptions go;
        go.max_new_tokens = std::min(sp.max_new_tokens, room);
        go.temperature = sp.temperature;
        go.greedy = false;
        go.rng = &st.rng;

        const std::size_t mm = std::size_t(m);
        std::vector<std::vector<int>> rollouts(mm);
        std::vector<std::string> texts(mm);
        for (int i = 0; i < m; ++i) {
          rollouts[std::size_t(i)] = generate_response(
              st.store, st.model.lm, ptoks, s.instr_ids, go);
          texts[std::size_t(i)] = st.vocab.decode(rollouts[std::size_t(i)]);
        }
        const GroupScores gs = score_group(enc, rc, texts, s.response);
        for (double c : gs.composite) batch_reward += c;
        for (double a : gs.advantage) batch_abs_adv += std::abs(a);
        batch_rollouts += m;

        bool all_zero = true;
        for (double a : gs.advantage)
          if (a != 0.0) all_zero = false;
        if (all_zero) {  // nothing to prefer; the group contributes no pull
          ++res.groups_skipped;
          continue;
        }
        ++groups_used;
        for (int i = 0; i < m; ++i)
          grpo_rollout_backward(st, s.cloud, s.instr_ids,
                                rollouts[std::size_t(i)],
                                gs.advantage[std::size_t(i)], denom, fps_start);
      }
      const long long step_id = st.steps_done + 1;
      const double lr = sched.at(res.steps);
      if (groups_used > 0) {
        check_batch_finite(st, 3, step_id, batch_reward);
        st.opt.step(st.store, lr);
      }
      ++res.steps;
      ++st.steps_done;
      if (log) {
        const double util =
            batch_codes.empty()
                ? kBlank
                : codebook_utilization(batch_codes, st.model.tok.codebook_size);
        log->row(st.steps_done, 3, lr, kBlank, kBlank, kBlank,
                 batch_reward / double(batch_rollouts),
                 batch_abs_adv / double(batch_rollouts), util);
      }
      ep_reward += batch_reward;
      ep_abs_adv += batch_abs_adv;
      ep_rollouts += batch_rollouts;
    }
    res.epoch_objective.push_back(ep_reward / double(ep_rollouts));
    if (epoch == sp.epochs - 1)
      res.final_abs_adv = ep_abs_adv / double(ep_rollouts);
  }
  return res;
}

// ---- bandit sanity environment --------------------------------------------

BanditResult run_grpo_bandit(const std::vector<double>& arm_rewards,
                             int group_size, int steps, double lr,
                             std::uint64_t seed) {
  const int n = int(arm_rewards.size());
  require(n >= 2, "run_grpo_bandit: need at least two arms");
  require(group_size >= 2, "run_grpo_bandit: group_size must be >= 2");
  require(steps >= 0, "run_grpo_bandit: steps must be >= 0");
  require(lr > 0.0, "run_grpo_bandit: lr must be positive");

  std::vector<double> theta(std::size_t(n), 0.0);
  std::vector<double> probs(std::size_t(n), 0.0);
  const auto refresh = [&] {
    const double mx = *std::max_element(theta.begin(), theta.end());
    double z = 0.0;
    for (int k = 0; k < n; ++k) {
      probs[std::size_t(k)] = std::exp(theta[std::size_t(k)] - mx);
      z += probs[std::size_t(k)];
    }
    for (double& p : probs) p /= z;
  };

  Rng rng(seed);
  const std::size_t m = std::size_t(group_size);
  std::vector<int> arms(m);
  std::vector<double> scores(m);
  for (int s = 0; s < steps; ++s) {
    refresh();
    for (int i = 0; i < group_size; ++i) {
      const double u = rng.uniform();
      double acc = 0.0;
      int pick = n - 1;  // numerical leftovers land on the last arm
      for (int k = 0; k < n; ++k) {
        acc += probs[std::size_t(k)];
        if (u < acc) {
          pick = k;
          break;
        }
      }
      arms[std::size_t(i)] = pick;
      scores[std::size_t(i)] = arm_rewards[std::size_t(pick)];
    }
    const std::vector<double> adv = advantages(scores, 1e-9);
    // Ascent on (1/m) sum_i A_i log pi(a_i):
    //   d/d theta_k = (1/m) sum_i A_i ([a_i = k] - pi_k)
    for (int k = 0; k < n; ++k) {
      double g = 0.0;
      for (int i = 0; i < group_size; ++i)
        g += adv[std::size_t(i)] *
             ((arms[std::size_t(i)] == k ? 1.0 : 0.0) - probs[std::size_t(k)]);
      theta[std::size_t(k)] += lr * g / double(group_size);
    }
  }
  refresh();

  BanditResult out;
  out.probs = probs;
  out.best_arm = int(std::max_element(probs.begin(), probs.end()) -
                     probs.begin());
  return out;
}

}  // namespace pointlm
