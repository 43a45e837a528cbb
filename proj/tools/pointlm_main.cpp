// Command-line front end. Every subcommand owns a run directory: it takes an
// exclusive lock there, snapshots the effective config, and writes all of its
// artifacts (logs, checkpoints, reports) inside it. stdout carries the
// subcommand's product (metrics, captions, token codes); progress chatter
// goes to stderr, gated by POINTLM_LOG=quiet|info|debug.

#include <CLI11.hpp>

#include <cerrno>
#include <cstdarg>
#include <cstdio>
#include <cstring>
#include <fcntl.h>
#include <filesystem>
#include <unistd.h>

#include "pointlm/checkpoint.hpp"
#include "pointlm/config.hpp"
#include "pointlm/diagnostics.hpp"
#include "pointlm/eval.hpp"
#include "pointlm/report.hpp"
#include "pointlm/spc1.hpp"
#include "pointlm/training.hpp"

using namespace pointlm;
namespace fs = std::filesystem;

namespace {

int g_verbosity = 1;  // 0 quiet, 1 info, 2 debug

int env_verbosity() {
  const char* e = std::getenv("POINTLM_LOG");
  if (!e) return 1;
  const std::string v(e);
  if (v == "quiet") return 0;
  if (v == "info") return 1;
  if (v == "debug") return 2;
  std::fprintf(stderr,
               "warning: POINTLM_LOG='%s' is not quiet|info|debug, using info\n",
               e);
  return 1;
}

void say(int level, const char* fmt, ...) {
  if (g_verbosity < level) return;
  va_list ap;
  va_start(ap, fmt);
  std::vfprintf(stderr, fmt, ap);
  va_end(ap);
  std::fputc('\n', stderr);
}
#define INFO(...) say(1, __VA_ARGS__)
#define DEBUG(...) say(2, __VA_ARGS__)

// Exclusive ownership of the output directory for the process lifetime.
struct RunDir {
  fs::path dir;
  int lock_fd = -1;

  explicit RunDir(const std::string& path) : dir(path) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec)
      throw io_error("cannot create run directory '" + path +
                     "': " + ec.message());
    const std::string lock = (dir / "lock").string();
    lock_fd = ::open(lock.c_str(), O_CREAT | O_EXCL | O_WRONLY, 0644);
    if (lock_fd < 0) {
      if (errno == EEXIST)
        throw io_error("run directory '" + path + "' is locked; remove '" +
                       lock + "' if no other process is using it");
      throw io_error("cannot create lock file '" + lock +
                     "': " + std::strerror(errno));
    }
    const std::string pid = std::to_string(::getpid()) + "\n";
    if (::write(lock_fd, pid.data(), pid.size()) < 0) {
      // the lock still holds; the pid inside is a courtesy
    }
    DEBUG("run directory %s (locked)", path.c_str());
  }
  ~RunDir() {
    if (lock_fd >= 0) {
      ::close(lock_fd);
      std::error_code ec;
      fs::remove(dir / "lock", ec);
    }
  }
  RunDir(const RunDir&) = delete;
  RunDir& operator=(const RunDir&) = delete;

  std::string file(const std::string& name) const {
    return (dir / name).string();
  }
};

struct Common {
  std::string config;
  std::string run_dir;
  std::uint64_t seed = 0;
  bool seed_set = false;
};

void add_common(CLI::App* sub, Common& c, const std::string& default_dir) {
  c.run_dir = default_dir;
  sub->add_option("--config", c.config, "JSON run config (defaults built in)")
      ->check(CLI::ExistingFile);
  sub->add_option("--run-dir", c.run_dir, "output directory")->capture_default_str();
  sub->add_option("--seed", c.seed, "override the config seed");
}

// One seed knob: the corpus stream is always re-derived from the master so a
// --seed override fans out exactly like a seed written in the config file.
RunConfig effective_config(const Common& c) {
  RunConfig cfg =
      c.config.empty() ? RunConfig::defaults() : load_run_config(c.config);
  if (c.seed_set) cfg.seed = c.seed;
  cfg.data.seed = derive_seed(cfg.seed, "data");
  cfg.validate();
  return cfg;
}

int split_count(const CorpusConfig& cc, const std::string& split) {
  if (split == "train") return cc.train_count;
  if (split == "val") return cc.val_count;
  if (split == "test") return cc.test_count;
  throw config_error("unknown split '" + split + "' (train|val|test)");
}

// Raw samples for one split: regenerated in memory, or read from a gen-data
// directory. `base` comes back as the directory cloud paths are relative to.
std::vector<Sample> raw_split(const CorpusConfig& cc,
                              const std::string& data_dir,
                              const std::string& split, std::string& base) {
  if (data_dir.empty()) {
    base.clear();
    CorpusConfig mem = cc;
    mem.inline_clouds = true;
    return gen_split(mem, split, split_count(cc, split));
  }
  base = data_dir;
  return load_jsonl((fs::path(data_dir) / (split + ".jsonl")).string());
}

struct DataBundle {
  Vocab vocab;
  std::vector<TrainSample> train, val, test;
};

// The corpus is a closed template language, so the vocabulary built from the
// three splits together is part of the task definition, not leakage; it keeps
// encoding total on held-out text.
DataBundle load_all_splits(const CorpusConfig& cc, const std::string& data_dir,
                           const Vocab* fixed_vocab) {
  std::string base;
  const std::vector<Sample> rt = raw_split(cc, data_dir, "train", base);
  const std::vector<Sample> rv = raw_split(cc, data_dir, "val", base);
  const std::vector<Sample> rs = raw_split(cc, data_dir, "test", base);
  DataBundle b;
  if (fixed_vocab) {
    b.vocab = *fixed_vocab;
  } else {
    std::vector<std::string> texts;
    texts.reserve(2 * (rt.size() + rv.size() + rs.size()));
    for (const auto* split : {&rt, &rv, &rs})
      for (const Sample& s : *split) {
        texts.push_back(s.instruction);
        texts.push_back(s.response);
      }
    b.vocab = Vocab::build(texts);
  }
  b.train = prepare_samples(rt, b.vocab, base);
  b.val = prepare_samples(rv, b.vocab, base);
  b.test = prepare_samples(rs, b.vocab, base);
  return b;
}

void append_stage_summary(std::vector<std::pair<std::string, double>>& kv,
                          const StageResult& r) {
  const std::string p = "stage" + std::to_string(r.stage) + "_";
  kv.emplace_back(p + "steps", double(r.steps));
  if (!r.epoch_objective.empty()) {
    kv.emplace_back(p + "objective_first", r.epoch_objective.front());
    kv.emplace_back(p + "objective_last", r.epoch_objective.back());
  }
  if (r.stage == 3) {
    kv.emplace_back(p + "final_abs_adv", r.final_abs_adv);
    kv.emplace_back(p + "groups_skipped", double(r.groups_skipped));
  } else {
    kv.emplace_back(p + "final_ntp", r.final_ntp);
    kv.emplace_back(p + "final_vq", r.final_vq);
  }
}

// Training curves straight from the log the stage runners wrote.
void write_curves(const RunDir& rd) {
  const auto cols = read_numeric_csv(rd.file("train_log.csv"));
  const auto& step = cols.at("step");
  auto series = [&](const char* col, const char* label) {
    return ChartSeries{label, step, cols.at(col)};
  };
  write_text_file(
      rd.file("curves_loss.svg"),
      svg_line_chart("training loss", "step", "loss",
                     {series("ntp_loss", "next-token"),
                      series("vq_loss", "quantizer"),
                      series("total_loss", "total")}));
  write_text_file(rd.file("curves_lr.svg"),
                  svg_line_chart("learning rate", "step", "lr",
                                 {series("lr", "lr")}));
  bool any_reward = false;
  for (const double v : cols.at("mean_reward"))
    if (std::isfinite(v)) any_reward = true;
  if (any_reward)
    write_text_file(
        rd.file("curves_reward.svg"),
        svg_line_chart("preference stage", "step", "value",
                       {series("mean_reward", "mean reward"),
                        series("mean_abs_adv", "mean |advantage|")}));
}

void print_kv(const std::vector<std::pair<std::string, double>>& kv) {
  for (const auto& [k, v] : kv) std::printf("%s %.10g\n", k.c_str(), v);
}

// ---------------------------------------------------------------- gen-data

struct GenDataCmd {
  Common c;
  bool inline_clouds = false;
};

void cmd_gen_data(const GenDataCmd& o) {
  RunDir rd(o.c.run_dir);
  RunConfig cfg = effective_config(o.c);
  write_text_file(rd.file("config.json"), run_config_snapshot(cfg));
  CorpusConfig cc = cfg.data;
  if (o.inline_clouds) cc.inline_clouds = true;
  const DatasetManifest m = gen_corpus(cc, rd.file("data"));
  for (const auto& [name, count] : m.splits)
    std::printf("%s %d\n", name.c_str(), count);
  INFO("corpus written under %s", m.root.c_str());
}

// ------------------------------------------------------------------- train

struct TrainCmd {
  Common c;
  std::string stage = "all";
  std::string data_dir;
  std::string ckpt;
};

void cmd_train(const TrainCmd& o) {
  RunDir rd(o.c.run_dir);
  RunConfig cfg = effective_config(o.c);
  write_text_file(rd.file("config.json"), run_config_snapshot(cfg));

  std::vector<int> stages;
  if (o.stage == "all")
    stages = {1, 2, 3};
  else if (o.stage == "1" || o.stage == "2" || o.stage == "3")
    stages = {o.stage[0] - '0'};
  else
    throw config_error("--stage must be 1, 2, 3, or all");
  if (stages.front() > 1 && o.ckpt.empty())
    throw config_error("stage " + std::to_string(stages.front()) +
                       " continues training: pass --ckpt from the previous "
                       "stage");

  TrainState st;
  const bool resuming = !o.ckpt.empty();
  if (resuming) {
    st = load_train_state(o.ckpt);
    INFO("resumed %s (vocab %d, %lld steps done)", o.ckpt.c_str(),
         st.vocab.size(), st.steps_done);
  }
  // A resumed model dictates the vocabulary; fresh runs build it from the
  // corpus.
  const DataBundle data = load_all_splits(cfg.data, o.data_dir,
                                          resuming ? &st.vocab : nullptr);
  INFO("corpus: %zu train / %zu val / %zu test, vocab %d", data.train.size(),
       data.val.size(), data.test.size(), data.vocab.size());
  if (!resuming) st = make_train_state(cfg, data.vocab);

  TrainLog log(rd.file("train_log.csv"));
  std::vector<std::pair<std::string, double>> kv;
  std::string last_ckpt;
  for (const int stage : stages) {
    StageResult r;
    if (stage == 1)
      r = run_stage1(st, data.train, cfg.stage1, &log);
    else if (stage == 2)
      r = run_stage2(st, data.train, cfg.stage2, &log);
    else
      r = run_stage3(st, data.train, cfg.stage3, cfg.reward, &log);
    INFO("stage %d: %lld steps, epoch objective %.6g -> %.6g", stage, r.steps,
         r.epoch_objective.front(), r.epoch_objective.back());
    append_stage_summary(kv, r);
    last_ckpt = rd.file("checkpoint_stage" + std::to_string(stage) + ".bin");
    save_train_state(last_ckpt, st, {{"stage", std::to_string(stage)}});
    DEBUG("saved %s", last_ckpt.c_str());
  }
  fs::copy_file(last_ckpt, rd.file("final.bin"),
                fs::copy_options::overwrite_existing);
  write_kv_csv(rd.file("summary.csv"), kv);
  write_curves(rd);
  print_kv(kv);
  INFO("final checkpoint: %s", rd.file("final.bin").c_str());
}

// -------------------------------------------------------------------- eval

struct EvalCmd {
  Common c;
  std::string ckpt;
  std::string data_dir;
  std::string split = "test";
  int count = 0;  // 0: the whole split
  int max_new = 12;
};

void cmd_eval(const EvalCmd& o) {
  RunDir rd(o.c.run_dir);
  RunConfig cfg = effective_config(o.c);
  write_text_file(rd.file("config.json"), run_config_snapshot(cfg));

  TrainState st = load_train_state(o.ckpt);
  std::string base;
  std::vector<Sample> raw = raw_split(cfg.data, o.data_dir, o.split, base);
  if (o.count > 0 && int(raw.size()) > o.count) raw.resize(std::size_t(o.count));
  const std::vector<TrainSample> samples = prepare_samples(raw, st.vocab, base);
  INFO("evaluating %zu %s samples with %s", samples.size(), o.split.c_str(),
       o.ckpt.c_str());

  EvalOptions eo;
  eo.max_new_tokens = o.max_new;
  const EvalReport rep = evaluate(st, samples, eo);
  const double comp = mean_composite_reward(rep, cfg.reward);

  write_eval_csv(rd.file("eval.csv"), rep);
  const std::vector<std::pair<std::string, double>> kv = {
      {"n_samples", double(rep.samples.size())},
      {"n_labelled", double(rep.n_labelled)},
      {"class_accuracy", rep.class_accuracy},
      {"corpus_bleu1", rep.corpus_bleu1},
      {"mean_bleu1", rep.mean_bleu1},
      {"mean_rouge_l", rep.mean_rouge},
      {"mean_similarity", rep.mean_similarity},
      {"mean_composite_reward", comp},
      {"mean_generated_words", rep.mean_generated_words},
  };
  write_kv_csv(rd.file("summary.csv"), kv);
  print_kv(kv);
}

// ---------------------------------------------------------------- tokenize

struct TokenizeCmd {
  Common c;
  std::string ckpt;
  std::string cloud;
  int fps_start = 0;
};

void cmd_tokenize(const TokenizeCmd& o) {
  RunDir rd(o.c.run_dir);
  TrainState st = load_train_state(o.ckpt);
  const Matf cloud = load_spc1(o.cloud);
  INFO("cloud %s: %ld points", o.cloud.c_str(), long(cloud.rows()));
  const auto [tokens, codes] =
      tokenize_for_inference(st.store, st.model.tok, cloud, o.fps_start);

  std::string csv;
  if (!codes.empty()) {
    std::string line = "codes:";
    csv = "token,code\n";
    for (std::size_t i = 0; i < codes.size(); ++i) {
      line += " " + std::to_string(codes[i]);
      csv += std::to_string(i) + "," + std::to_string(codes[i]) + "\n";
    }
    std::printf("%s\n", line.c_str());
    std::printf("utilization %.4g\n",
                codebook_utilization(codes, st.model.tok.codebook_size));
  } else {
    csv = "token,l2_norm\n";
    std::string line = "continuous token norms:";
    for (Eigen::Index r = 0; r < tokens.rows(); ++r) {
      char buf[32];
      std::snprintf(buf, sizeof buf, "%.4g", double(tokens.row(r).norm()));
      line += std::string(" ") + buf;
      csv += std::to_string(r) + "," + buf + "\n";
    }
    std::printf("%s\n", line.c_str());
  }
  write_text_file(rd.file("tokens.csv"), csv);
}

// ----------------------------------------------------------------- caption

struct CaptionCmd {
  Common c;
  std::string ckpt;
  std::string cloud;
  std::string instruction = "describe this object";
  int max_new = 16;
  int fps_start = 0;
  bool sample = false;
  double temperature = 1.0;
};

void cmd_caption(const CaptionCmd& o) {
  RunDir rd(o.c.run_dir);
  TrainState st = load_train_state(o.ckpt);
  const Matf cloud = load_spc1(o.cloud);
  const std::vector<int> instr_ids = st.vocab.encode(o.instruction);
  const auto toks =
      tokenize_for_inference(st.store, st.model.tok, cloud, o.fps_start);

  Rng rng(derive_seed(o.c.seed_set ? o.c.seed : 7, "caption"));
  GenerateOptions go;
  go.max_new_tokens = o.max_new;
  go.greedy = !o.sample;
  go.temperature = o.temperature;
  go.rng = &rng;
  const std::vector<int> ids =
      generate_response(st.store, st.model.lm, toks.first, instr_ids, go);
  const std::string text = st.vocab.decode(ids);
  std::printf("%s\n", text.c_str());
  write_text_file(rd.file("caption.txt"), text + "\n");
}

// ------------------------------------------------------------------- bench

struct BenchCmd {
  Common c;
  std::string ckpt;
  int points = 0;  // 0: the config's n_points
  int warmup = 3;
  int iters = 20;
  int max_new = 12;
};

void cmd_bench(const BenchCmd& o) {
  RunDir rd(o.c.run_dir);
  RunConfig cfg = effective_config(o.c);
  write_text_file(rd.file("config.json"), run_config_snapshot(cfg));
  TrainState st = load_train_state(o.ckpt);

  ShapeSpec spec;
  spec.n_points = o.points > 0 ? o.points : cfg.data.n_points;
  spec.noise = cfg.data.noise;
  spec.seed = derive_seed(cfg.seed, "bench");
  TrainSample sample;
  sample.cloud = gen_shape(spec).cast<float>();
  sample.instruction = "describe this object";
  sample.instr_ids = st.vocab.encode(sample.instruction);

  const BenchResult b =
      bench_latency(st, sample, o.warmup, o.iters, o.max_new);
  const std::vector<std::pair<std::string, double>> kv = {
      {"points", double(spec.n_points)},
      {"warmup", double(b.warmup)},
      {"iters", double(b.iters)},
      {"median_tokenize_ms", b.median_tokenize_ms},
      {"median_generate_ms", b.median_generate_ms},
      {"generated_tokens_per_second", b.generated_tokens_per_second},
  };
  write_kv_csv(rd.file("bench.csv"), kv);
  print_kv(kv);
}

// ------------------------------------------------------- sweep-resolution

struct SweepCmd {
  Common c;
  std::string ckpt;
  std::string split = "test";
  std::vector<int> resolutions = {256, 1024, 4096};
  int count = 64;
  int max_new = 12;
};

void cmd_sweep(const SweepCmd& o) {
  RunDir rd(o.c.run_dir);
  RunConfig cfg = effective_config(o.c);
  write_text_file(rd.file("config.json"), run_config_snapshot(cfg));
  TrainState st = load_train_state(o.ckpt);

  EvalOptions eo;
  eo.max_new_tokens = o.max_new;
  const std::vector<SweepPoint> pts =
      resolution_sweep(st, cfg.data, o.split, o.count, o.resolutions, eo);
  write_sweep_csv(rd.file("sweep.csv"), pts);

  std::vector<double> x, thr, acc;
  std::printf("resolution used tokenize_ms clouds_per_s accuracy\n");
  for (const SweepPoint& p : pts) {
    if (p.used != p.requested)
      INFO("resolution %d raised to %d (group count / corpus floor)",
           p.requested, p.used);
    std::printf("%d %d %.4g %.4g %.4g\n", p.requested, p.used,
                p.median_tokenize_ms, p.clouds_per_second, p.class_accuracy);
    x.push_back(double(p.used));
    thr.push_back(p.clouds_per_second);
    acc.push_back(p.class_accuracy);
  }
  write_text_file(rd.file("sweep_throughput.svg"),
                  svg_line_chart("tokenizer throughput", "points per cloud",
                                 "clouds per second",
                                 {{"throughput", x, thr}}));
  write_text_file(rd.file("sweep_accuracy.svg"),
                  svg_line_chart("accuracy across resolution",
                                 "points per cloud", "class accuracy",
                                 {{"accuracy", x, acc}}));
}

// -------------------------------------------------------------- grad-check

struct GradCheckCmd {
  Common c;
  int points = 16;
  double epsilon = 1e-5;
  long long stride = 1;
  double threshold = 1e-4;
};

void cmd_grad_check(const GradCheckCmd& o) {
  RunDir rd(o.c.run_dir);
  const std::uint64_t seed = o.c.seed_set ? o.c.seed : 5;
  // The model is a built-in small double-precision config: exhaustive finite
  // differences cost two forward passes per parameter element.
  const FullGradCheck out =
      full_loss_grad_check(grad_check_model(), o.points, seed, o.epsilon,
                           Eigen::Index(o.stride));
  std::printf("entries %lld  max_rel_err %.3e  (%s [%lld,%lld] analytic "
              "%.6e numeric %.6e)  %.2fs\n",
              out.report.entries_checked, out.report.max_rel_err,
              out.report.worst.param.c_str(), (long long)out.report.worst.row,
              (long long)out.report.worst.col, out.report.worst.analytic,
              out.report.worst.numeric, out.seconds);
  write_kv_csv(rd.file("gradcheck.csv"),
               {{"entries_checked", double(out.report.entries_checked)},
                {"max_rel_err", out.report.max_rel_err},
                {"seconds", out.seconds},
                {"threshold", o.threshold},
                {"points", double(o.points)},
                {"stride", double(o.stride)}});
  if (!(out.report.max_rel_err < o.threshold))
    throw numeric_error("gradient check failed: max relative error " +
                        std::to_string(out.report.max_rel_err) +
                        " is not below " + std::to_string(o.threshold));
  std::printf("PASS max_rel_err %.3e < %.3e\n", out.report.max_rel_err,
              o.threshold);
}

// ------------------------------------------------------------------ ablate

struct AblateCmd {
  Common c;
  std::string axis;
  std::vector<std::string> values;
  std::string data_dir;
  std::string split = "val";
  bool with_stage3 = false;
  int max_new = 12;
};

RunConfig apply_axis(RunConfig cfg, const std::string& axis,
                     const std::string& value) {
  auto as_int = [&] {
    try {
      std::size_t used = 0;
      const int v = std::stoi(value, &used);
      require(used == value.size(), "trailing characters");
      return v;
    } catch (const std::exception&) {
      throw config_error("ablate: value '" + value + "' for axis '" + axis +
                         "' is not an integer");
    }
  };
  if (axis == "codebook") {
    cfg.model.tok.codebook_size = as_int();
  } else if (axis == "point-tokens") {
    cfg.model.tok.n_groups = as_int();
  } else if (axis == "pooling") {
    cfg.model.tok.pooling = pooling_from_string(value);
  } else if (axis == "trainable-layers") {
    cfg.stage1.trainable_layers = as_int();
  } else if (axis == "quantize") {
    if (value == "true" || value == "1")
      cfg.model.tok.quantize = true;
    else if (value == "false" || value == "0")
      cfg.model.tok.quantize = false;
    else
      throw config_error("ablate: quantize takes true|false|1|0, got '" +
                         value + "'");
  } else {
    throw config_error("ablate: unknown axis '" + axis + "'");
  }
  cfg.validate();
  return cfg;
}

void cmd_ablate(const AblateCmd& o) {
  RunDir rd(o.c.run_dir);
  const RunConfig base = effective_config(o.c);
  write_text_file(rd.file("config.json"), run_config_snapshot(base));
  // No axis touches the corpus, so data and vocabulary are shared.
  const DataBundle data = load_all_splits(base.data, o.data_dir, nullptr);
  const std::vector<TrainSample>& eval_split =
      o.split == "train" ? data.train : (o.split == "val" ? data.val
                                                          : data.test);
  (void)split_count(base.data, o.split);  // validates the name

  std::string table = "value,class_accuracy,corpus_bleu1,mean_similarity,"
                      "mean_composite_reward\n";
  std::vector<double> xs, accs, bleus;
  bool numeric_axis = true;
  std::printf("value accuracy corpus_bleu1 similarity composite\n");
  for (const std::string& v : o.values) {
    const RunConfig cfg = apply_axis(base, o.axis, v);
    const fs::path sub = rd.dir / (o.axis + "-" + v);
    std::error_code ec;
    fs::create_directories(sub, ec);
    if (ec)
      throw io_error("cannot create '" + sub.string() + "': " + ec.message());
    write_text_file((sub / "config.json").string(), run_config_snapshot(cfg));

    INFO("ablate %s=%s: training", o.axis.c_str(), v.c_str());
    TrainState st = make_train_state(cfg, data.vocab);
    TrainLog log((sub / "train_log.csv").string());
    (void)run_stage1(st, data.train, cfg.stage1, &log);
    (void)run_stage2(st, data.train, cfg.stage2, &log);
    if (o.with_stage3)
      (void)run_stage3(st, data.train, cfg.stage3, cfg.reward, &log);
    save_train_state((sub / "final.bin").string(), st,
                     {{"ablate_axis", o.axis}, {"ablate_value", v}});

    EvalOptions eo;
    eo.max_new_tokens = o.max_new;
    const EvalReport rep = evaluate(st, eval_split, eo);
    const double comp = mean_composite_reward(rep, cfg.reward);
    write_eval_csv((sub / "eval.csv").string(), rep);
    write_kv_csv((sub / "summary.csv").string(),
                 {{"class_accuracy", rep.class_accuracy},
                  {"corpus_bleu1", rep.corpus_bleu1},
                  {"mean_similarity", rep.mean_similarity},
                  {"mean_composite_reward", comp}});

    char num[256];
    std::snprintf(num, sizeof num, "%.10g,%.10g,%.10g,%.10g",
                  rep.class_accuracy, rep.corpus_bleu1, rep.mean_similarity,
                  comp);
    table += csv_escape(v) + "," + num + "\n";
    std::printf("%s %.4g %.4g %.4g %.4g\n", v.c_str(), rep.class_accuracy,
                rep.corpus_bleu1, rep.mean_similarity, comp);

    try {
      std::size_t used = 0;
      const double xv = std::stod(v, &used);
      if (used != v.size()) numeric_axis = false;
      xs.push_back(xv);
    } catch (const std::exception&) {
      numeric_axis = false;
    }
    accs.push_back(rep.class_accuracy);
    bleus.push_back(rep.corpus_bleu1);
  }
  write_text_file(rd.file("ablate.csv"), table);
  if (numeric_axis && xs.size() == accs.size())
    write_text_file(rd.file("ablate.svg"),
                    svg_line_chart("ablation: " + o.axis, o.axis, "score",
                                   {{"class accuracy", xs, accs},
                                    {"corpus bleu-1", xs, bleus}}));
}

}  // namespace

int main(int argc, char** argv) {
  g_verbosity = env_verbosity();
  CLI::App app{"desk-scale point-cloud language model toolkit"};
  app.require_subcommand(1);

  GenDataCmd gd;
  auto* s_gd = app.add_subcommand("gen-data",
                                  "write the synthetic corpus to disk");
  add_common(s_gd, gd.c, "runs/gen-data");
  s_gd->add_flag("--inline", gd.inline_clouds,
                 "embed clouds in the jsonl lines instead of .spc1 files");

  TrainCmd tr;
  auto* s_tr = app.add_subcommand("train", "run the training stages");
  add_common(s_tr, tr.c, "runs/train");
  s_tr->add_option("--stage", tr.stage, "1, 2, 3, or all")->capture_default_str()
      ->check(CLI::IsMember({"1", "2", "3", "all"}));
  s_tr->add_option("--data", tr.data_dir,
                   "gen-data directory (default: regenerate in memory)")
      ->check(CLI::ExistingDirectory);
  s_tr->add_option("--ckpt", tr.ckpt,
                   "checkpoint to continue from (required for stages 2 and 3)")
      ->check(CLI::ExistingFile);

  EvalCmd ev;
  auto* s_ev = app.add_subcommand("eval", "score a checkpoint on a split");
  add_common(s_ev, ev.c, "runs/eval");
  s_ev->add_option("--ckpt", ev.ckpt, "checkpoint to evaluate")
      ->required()
      ->check(CLI::ExistingFile);
  s_ev->add_option("--data", ev.data_dir, "gen-data directory")
      ->check(CLI::ExistingDirectory);
  s_ev->add_option("--split", ev.split, "train, val, or test")->capture_default_str()
      ->check(CLI::IsMember({"train", "val", "test"}));
  s_ev->add_option("--count", ev.count, "cap on evaluated samples (0 = all)");
  s_ev->add_option("--max-new", ev.max_new, "generation budget per sample")
                   ->capture_default_str();

  TokenizeCmd tk;
  auto* s_tk = app.add_subcommand("tokenize",
                                  "print a cloud's point-token codes");
  add_common(s_tk, tk.c, "runs/tokenize");
  s_tk->add_option("--ckpt", tk.ckpt, "checkpoint")->required()
      ->check(CLI::ExistingFile);
  s_tk->add_option("--cloud", tk.cloud, "spc1 cloud file")->required()
      ->check(CLI::ExistingFile);
  s_tk->add_option("--fps-start", tk.fps_start, "sampling start index")->capture_default_str();

  CaptionCmd cp;
  auto* s_cp = app.add_subcommand("caption", "describe one cloud");
  add_common(s_cp, cp.c, "runs/caption");
  s_cp->add_option("--ckpt", cp.ckpt, "checkpoint")->required()
      ->check(CLI::ExistingFile);
  s_cp->add_option("--cloud", cp.cloud, "spc1 cloud file")->required()
      ->check(CLI::ExistingFile);
  s_cp->add_option("--instruction", cp.instruction, "prompt text")->capture_default_str();
  s_cp->add_option("--max-new", cp.max_new, "generation budget")->capture_default_str();
  s_cp->add_option("--fps-start", cp.fps_start, "sampling start index")->capture_default_str();
  s_cp->add_flag("--sample", cp.sample, "sample instead of greedy decoding");
  s_cp->add_option("--temperature", cp.temperature,
                   "softmax temperature when sampling")->capture_default_str();

  BenchCmd bn;
  auto* s_bn = app.add_subcommand("bench", "latency of tokenize and generate");
  add_common(s_bn, bn.c, "runs/bench");
  s_bn->add_option("--ckpt", bn.ckpt, "checkpoint")->required()
      ->check(CLI::ExistingFile);
  s_bn->add_option("--points", bn.points,
                   "cloud size (default: the config's n_points)");
  s_bn->add_option("--warmup", bn.warmup, "untimed iterations")->capture_default_str();
  s_bn->add_option("--iters", bn.iters, "timed iterations")->capture_default_str();
  s_bn->add_option("--max-new", bn.max_new, "generation budget")->capture_default_str();

  SweepCmd sw;
  auto* s_sw = app.add_subcommand("sweep-resolution",
                                  "throughput and accuracy across cloud sizes");
  add_common(s_sw, sw.c, "runs/sweep-resolution");
  s_sw->add_option("--ckpt", sw.ckpt, "checkpoint")->required()
      ->check(CLI::ExistingFile);
  s_sw->add_option("--resolutions", sw.resolutions,
                   "comma-separated point counts")->capture_default_str()
      ->delimiter(',');
  s_sw->add_option("--count", sw.count, "clouds per resolution")->capture_default_str();
  s_sw->add_option("--split", sw.split, "train, val, or test")->capture_default_str()
      ->check(CLI::IsMember({"train", "val", "test"}));
  s_sw->add_option("--max-new", sw.max_new, "generation budget")->capture_default_str();

  GradCheckCmd gc;
  auto* s_gc = app.add_subcommand(
      "grad-check", "finite-difference check of the full training loss");
  add_common(s_gc, gc.c, "runs/grad-check");
  s_gc->add_option("--points", gc.points, "cloud size")->capture_default_str();
  s_gc->add_option("--epsilon", gc.epsilon, "central-difference step")->capture_default_str();
  s_gc->add_option("--stride", gc.stride, "check every k-th element")->capture_default_str();
  s_gc->add_option("--threshold", gc.threshold,
                   "max relative error allowed")->capture_default_str();

  AblateCmd ab;
  auto* s_ab = app.add_subcommand("ablate",
                                  "train and evaluate along one config axis");
  add_common(s_ab, ab.c, "runs/ablate");
  s_ab->add_option("--axis", ab.axis,
                   "codebook | point-tokens | pooling | trainable-layers | "
                   "quantize")
      ->required()
      ->check(CLI::IsMember({"codebook", "point-tokens", "pooling",
                             "trainable-layers", "quantize"}));
  s_ab->add_option("--values", ab.values, "comma-separated axis values")
      ->required()
      ->delimiter(',');
  s_ab->add_option("--data", ab.data_dir, "gen-data directory")
      ->check(CLI::ExistingDirectory);
  s_ab->add_option("--split", ab.split, "evaluation split")->capture_default_str()
      ->check(CLI::IsMember({"train", "val", "test"}));
  s_ab->add_flag("--with-stage3", ab.with_stage3,
                 "include the preference stage in each run");
  s_ab->add_option("--max-new", ab.max_new, "generation budget")->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }

  // CLI11 counts options only after parse; pick up the seed flags here.
  gd.c.seed_set = s_gd->count("--seed") > 0;
  tr.c.seed_set = s_tr->count("--seed") > 0;
  ev.c.seed_set = s_ev->count("--seed") > 0;
  tk.c.seed_set = s_tk->count("--seed") > 0;
  cp.c.seed_set = s_cp->count("--seed") > 0;
  bn.c.seed_set = s_bn->count("--seed") > 0;
  sw.c.seed_set = s_sw->count("--seed") > 0;
  gc.c.seed_set = s_gc->count("--seed") > 0;
  ab.c.seed_set = s_ab->count("--seed") > 0;

  try {
    if (s_gd->parsed())
      cmd_gen_data(gd);
    else if (s_tr->parsed())
      cmd_train(tr);
    else if (s_ev->parsed())
      cmd_eval(ev);
    else if (s_tk->parsed())
      cmd_tokenize(tk);
    else if (s_cp->parsed())
      cmd_caption(cp);
    else if (s_bn->parsed())
      cmd_bench(bn);
    else if (s_sw->parsed())
      cmd_sweep(sw);
    else if (s_gc->parsed())
      cmd_grad_check(gc);
    else if (s_ab->parsed())
      cmd_ablate(ab);
  } catch (const config_error& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return 2;
  } catch (const io_error& e) {
    std::fprintf(stderr, "io error: %s\n", e.what());
    return 3;
  } catch (const vocab_error& e) {
    std::fprintf(stderr, "vocabulary error: %s\n", e.what());
    return 4;
  } catch (const numeric_error& e) {
    std::fprintf(stderr, "numeric error: %s\n", e.what());
    return 5;
  } catch (const error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
