#include "pointlm/eval.hpp"

#include <algorithm>
#include <chrono>

#include "pointlm/text.hpp"

namespace pointlm {

namespace {

using clock_type = std::chrono::steady_clock;

double ms_between(clock_type::time_point a, clock_type::time_point b) {
  return std::chrono::duration<double, std::milli>(b - a).count();
}

double median_of(std::vector<double> v) {
  require(!v.empty(), "median_of: no values");
  std::sort(v.begin(), v.end());
  const std::size_t mid = v.size() / 2;
  if (v.size() % 2 == 1) return v[mid];
  return 0.5 * (v[mid - 1] + v[mid]);
}

}  // namespace

std::string eval_label_word(const std::vector<std::string>& ref_words) {
  if (const auto sh = find_shape_word(ref_words)) return shape_name(*sh);
  if (const auto co = find_color_word(ref_words)) return color_name(*co);
  return "";
}

EvalReport evaluate(TrainState& st, const std::vector<TrainSample>& data,
                    const EvalOptions& opts) {
  require(!data.empty(), "evaluate: no samples");
  require(opts.max_new_tokens >= 1, "evaluate: max_new_tokens must be >= 1");
  const SentenceEncoder enc;
  GenerateOptions go;
  go.greedy = true;
  go.max_new_tokens = opts.max_new_tokens;

  EvalReport rep;
  rep.samples.reserve(data.size());
  std::vector<std::vector<std::string>> cand_words, ref_words;
  double sum_bleu = 0.0, sum_rouge = 0.0, sum_sim = 0.0, sum_len = 0.0;
  int labelled = 0, correct = 0;
  for (const TrainSample& s : data) {
    const auto toks = tokenize_for_inference(st.store, st.model.tok, s.cloud,
                                             opts.fps_start);
    const std::vector<int> out_ids =
        generate_response(st.store, st.model.lm, toks.first, s.instr_ids, go);

    EvalSampleResult r;
    r.task = s.task;
    r.instruction = s.instruction;
    r.reference = s.response;
    r.generated = st.vocab.decode(out_ids);
    const std::vector<std::string> cw = split_words(r.generated);
    const std::vector<std::string> rw = split_words(s.response);
    r.bleu1 = sentence_bleu1(cw, rw);
    r.rouge = rouge_l(cw, rw);
    r.similarity = enc.similarity(r.generated, s.response);
    r.label_word = eval_label_word(rw);
    if (!r.label_word.empty()) {
      ++labelled;
      r.correct = std::find(cw.begin(), cw.end(), r.label_word) != cw.end();
      if (r.correct) ++correct;
    }
    sum_bleu += r.bleu1;
    sum_rouge += r.rouge;
    sum_sim += r.similarity;
    sum_len += double(cw.size());
    cand_words.push_back(cw);
    ref_words.push_back(rw);
    rep.samples.push_back(std::move(r));
  }
  const double n = double(data.size());
  rep.mean_bleu1 = sum_bleu / n;
  rep.corpus_bleu1 = pointlm::corpus_bleu1(cand_words, ref_words);
  rep.mean_rouge = sum_rouge / n;
  rep.mean_similarity = sum_sim / n;
  rep.n_labelled = labelled;
  rep.class_accuracy = labelled > 0 ? double(correct) / double(labelled) : 0.0;
  rep.mean_generated_words = sum_len / n;
  return rep;
}

std::vector<SweepPoint> resolution_sweep(TrainState& st,
                                         const CorpusConfig& data_cfg,
                                         const std::string& split, int count,
                                         const std::vector<int>& resolutions,
                                         const EvalOptions& opts) {
  require(count >= 1, "resolution_sweep: count must be >= 1");
  require(!resolutions.empty(), "resolution_sweep: no resolutions given");
  std::vector<SweepPoint> out;
  out.reserve(resolutions.size());
  for (const int r : resolutions) {
    require(r >= 1, "resolution_sweep: resolution must be >= 1");
    SweepPoint pt;
    pt.requested = r;
    pt.used = std::max({r, st.model.tok.n_groups, kMinCloudPoints});

    CorpusConfig cc = data_cfg;
    cc.n_points = pt.used;
    cc.inline_clouds = true;
    const std::vector<Sample> raw = gen_split(cc, split, count);
    const std::vector<TrainSample> samples =
        prepare_samples(raw, st.vocab, "");

    // One untimed pass warms allocator and caches.
    (void)tokenize_for_inference(st.store, st.model.tok, samples[0].cloud,
                                 opts.fps_start);
    std::vector<double> ms;
    ms.reserve(samples.size());
    for (const TrainSample& s : samples) {
      const auto t0 = clock_type::now();
      (void)tokenize_for_inference(st.store, st.model.tok, s.cloud,
                                   opts.fps_start);
      const auto t1 = clock_type::now();
      ms.push_back(ms_between(t0, t1));
    }
    pt.median_tokenize_ms = median_of(ms);
    pt.clouds_per_second =
        pt.median_tokenize_ms > 0.0 ? 1000.0 / pt.median_tokenize_ms : 0.0;
    pt.class_accuracy = evaluate(st, samples, opts).class_accuracy;
    out.push_back(pt);
  }
  return out;
}

BenchResult bench_latency(TrainState& st, const TrainSample& sample,
                          int warmup, int iters, int max_new_tokens) {
  require(warmup >= 0, "bench_latency: warmup must be >= 0");
  require(iters >= 1, "bench_latency: iters must be >= 1");
  require(max_new_tokens >= 1, "bench_latency: max_new_tokens must be >= 1");
  GenerateOptions go;
  go.greedy = true;
  go.max_new_tokens = max_new_tokens;

  std::vector<double> tok_ms, gen_ms;
  tok_ms.reserve(std::size_t(iters));
  gen_ms.reserve(std::size_t(iters));
  long long tokens_out = 0;
  for (int i = 0; i < warmup + iters; ++i) {
    const auto t0 = clock_type::now();
    const auto toks = tokenize_for_inference(st.store, st.model.tok,
                                             sample.cloud, 0);
    const auto t1 = clock_type::now();
    const std::vector<int> ids = generate_response(st.store, st.model.lm,
                                                   toks.first,
                                                   sample.instr_ids, go);
    const auto t2 = clock_type::now();
    if (i >= warmup) {
      tok_ms.push_back(ms_between(t0, t1));
      gen_ms.push_back(ms_between(t1, t2));
      tokens_out += (long long)(ids.size()) + 1;  // the stop decision counts
    }
  }
  BenchResult b;
  b.warmup = warmup;
  b.iters = iters;
  b.median_tokenize_ms = median_of(tok_ms);
  b.median_generate_ms = median_of(gen_ms);
  double total_gen_ms = 0.0;
  for (const double v : gen_ms) total_gen_ms += v;
  b.generated_tokens_per_second =
      total_gen_ms > 0.0 ? double(tokens_out) * 1000.0 / total_gen_ms : 0.0;
  return b;
}

double mean_composite_reward(const EvalReport& rep, const RewardConfig& rc) {
  require(!rep.samples.empty(), "mean_composite_reward: empty report");
  const SentenceEncoder enc;
  double sum = 0.0;
  for (const EvalSampleResult& r : rep.samples)
    sum += composite_reward(enc, rc, r.generated, r.reference);
  return sum / double(rep.samples.size());
}

}  // namespace pointlm
