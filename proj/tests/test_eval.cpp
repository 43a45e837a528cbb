#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <unistd.h>

#include "pointlm/eval.hpp"
#include "pointlm/report.hpp"
#include "pointlm/text.hpp"

using namespace pointlm;

namespace {

struct TempDir {
  std::filesystem::path path;
  TempDir() {
    path = std::filesystem::temp_directory_path() /
           ("pointlm_eval_" + std::to_string(::getpid()) + "_" +
            std::to_string(counter()++));
    std::filesystem::create_directories(path);
  }
  ~TempDir() { std::filesystem::remove_all(path); }
  static int& counter() {
    static int c = 0;
    return c;
  }
  std::string file(const std::string& name) const {
    return (path / name).string();
  }
};

RunConfig tiny_config() {
  RunConfig c = RunConfig::defaults();
  c.seed = 21;
  c.model.tok.n_groups = 4;
  c.model.tok.group_size = 4;
  c.model.tok.d_group = 16;
  c.model.tok.d_model = 32;
  c.model.tok.codebook_size = 12;
  c.model.lm.d_model = 32;
  c.model.lm.n_layers = 2;
  c.model.lm.n_heads = 2;
  c.model.lm.d_ff = 64;
  c.model.lm.max_ctx = 48;
  c.data.train_count = 12;
  c.data.val_count = 4;
  c.data.test_count = 4;
  c.data.n_points = 32;
  c.data.noise = 0.01;
  c.data.inline_clouds = true;
  c.data.seed = derive_seed(c.seed, "data");
  c.stage1.trainable_layers = 1;
  return c;
}

struct EvalFixture {
  RunConfig cfg;
  std::vector<Sample> raw;
  Vocab vocab;
  TrainState st;
  std::vector<TrainSample> samples;

  EvalFixture() : cfg(tiny_config()) {
    raw = gen_split(cfg.data, "train", cfg.data.train_count);
    std::vector<std::string> texts;
    for (const Sample& s : raw) {
      texts.push_back(s.instruction);
      texts.push_back(s.response);
    }
    vocab = Vocab::build(texts);
    st = make_train_state(cfg, vocab);
    samples = prepare_samples(raw, vocab, "");
  }
};

std::string slurp(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  std::stringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

}  // namespace

TEST_CASE("label word prefers the shape over the color") {
  CHECK(eval_label_word(split_words("a red sphere")) == "sphere");
  CHECK(eval_label_word(split_words("this is a large blue cylinder")) ==
        "cylinder");
  CHECK(eval_label_word(split_words("red")) == "red");
  CHECK(eval_label_word(split_words("yellow")) == "yellow");
  CHECK(eval_label_word(split_words("nothing to see")) == "");
  CHECK(eval_label_word({}) == "");
}

TEST_CASE("evaluate scores a split deterministically") {
  EvalFixture fx;
  const EvalReport rep = evaluate(fx.st, fx.samples);
  REQUIRE(rep.samples.size() == 12);
  CHECK(rep.n_labelled == 12);  // every reference names its class
  double sum_b = 0.0, sum_s = 0.0;
  for (const EvalSampleResult& r : rep.samples) {
    CHECK(!r.label_word.empty());
    CHECK(r.bleu1 >= 0.0);
    CHECK(r.bleu1 <= 1.0);
    CHECK(r.rouge >= 0.0);
    CHECK(r.rouge <= 1.0);
    CHECK(r.similarity >= -1.0);
    CHECK(r.similarity <= 1.0);
    CHECK(int(split_words(r.generated).size()) <= 12);
    sum_b += r.bleu1;
    sum_s += r.similarity;
  }
  CHECK(rep.mean_bleu1 == doctest::Approx(sum_b / 12.0).epsilon(1e-12));
  CHECK(rep.mean_similarity == doctest::Approx(sum_s / 12.0).epsilon(1e-12));
  CHECK(rep.corpus_bleu1 >= 0.0);
  CHECK(rep.corpus_bleu1 <= 1.0);
  CHECK(rep.class_accuracy >= 0.0);
  CHECK(rep.class_accuracy <= 1.0);

  const EvalReport again = evaluate(fx.st, fx.samples);
  for (std::size_t i = 0; i < rep.samples.size(); ++i) {
    CHECK(rep.samples[i].generated == again.samples[i].generated);
    CHECK(rep.samples[i].bleu1 == again.samples[i].bleu1);
  }
  CHECK(rep.class_accuracy == again.class_accuracy);

  const double comp = mean_composite_reward(rep, fx.cfg.reward);
  CHECK(comp >= -1.0);
  CHECK(comp <= 1.0);
  CHECK(comp == mean_composite_reward(again, fx.cfg.reward));
  CHECK_THROWS_AS((void)mean_composite_reward(EvalReport{}, fx.cfg.reward),
                  error);

  CHECK_THROWS_AS((void)evaluate(fx.st, {}), error);
}

TEST_CASE("resolution sweep clamps below the group count") {
  EvalFixture fx;
  EvalOptions opts;
  opts.max_new_tokens = 4;
  const auto pts =
      resolution_sweep(fx.st, fx.cfg.data, "val", 6, {2, 16, 64}, opts);
  REQUIRE(pts.size() == 3);
  CHECK(pts[0].requested == 2);
  CHECK(pts[0].used == 8);  // clamped up to the corpus floor
  CHECK(pts[1].used == 16);
  CHECK(pts[2].used == 64);
  for (const SweepPoint& p : pts) {
    CHECK(p.median_tokenize_ms > 0.0);
    CHECK(p.clouds_per_second > 0.0);
    CHECK(p.class_accuracy >= 0.0);
    CHECK(p.class_accuracy <= 1.0);
  }
  CHECK_THROWS_AS(
      (void)resolution_sweep(fx.st, fx.cfg.data, "val", 0, {16}, opts), error);
  CHECK_THROWS_AS(
      (void)resolution_sweep(fx.st, fx.cfg.data, "val", 2, {}, opts), error);
  CHECK_THROWS_AS(
      (void)resolution_sweep(fx.st, fx.cfg.data, "val", 2, {0}, opts), error);
}

TEST_CASE("latency bench reports positive medians") {
  EvalFixture fx;
  const BenchResult b = bench_latency(fx.st, fx.samples[0], 1, 5, 4);
  CHECK(b.warmup == 1);
  CHECK(b.iters == 5);
  CHECK(b.median_tokenize_ms > 0.0);
  CHECK(b.median_generate_ms > 0.0);
  CHECK(b.generated_tokens_per_second > 0.0);
  CHECK_THROWS_AS((void)bench_latency(fx.st, fx.samples[0], 0, 0, 4), error);
}

TEST_CASE("csv escaping quotes only when needed") {
  CHECK(csv_escape("plain") == "plain");
  CHECK(csv_escape("a,b") == "\"a,b\"");
  CHECK(csv_escape("say \"hi\"") == "\"say \"\"hi\"\"\"");
  CHECK(csv_escape("line\nbreak") == "\"line\nbreak\"");
  CHECK(csv_escape("") == "");
}

TEST_CASE("eval csv carries one quoted row per sample") {
  TempDir tmp;
  EvalReport rep;
  EvalSampleResult r;
  r.task = "caption";
  r.instruction = "describe this object";
  r.reference = "a red, shiny sphere";  // the comma forces quoting
  r.generated = "a red sphere";
  r.label_word = "sphere";
  r.correct = true;
  r.bleu1 = 0.75;
  r.rouge = 0.5;
  r.similarity = 0.9;
  rep.samples.push_back(r);
  write_eval_csv(tmp.file("eval.csv"), rep);
  const std::string text = slurp(tmp.file("eval.csv"));
  CHECK(text.find("task,instruction,reference,generated,label_word,correct,"
                  "bleu1,rouge_l,similarity\n") == 0);
  CHECK(text.find("\"a red, shiny sphere\"") != std::string::npos);
  CHECK(text.find(",1,0.75,0.5,0.9") != std::string::npos);

  write_kv_csv(tmp.file("kv.csv"), {{"mean_bleu1", 0.5}, {"steps", 12}});
  const std::string kv = slurp(tmp.file("kv.csv"));
  CHECK(kv == "metric,value\nmean_bleu1,0.5\nsteps,12\n");
}

TEST_CASE("numeric csv round-trips blanks as NaN") {
  TempDir tmp;
  write_text_file(tmp.file("t.csv"), "a,b,c\n1,,3\n4,5,\n");
  const auto cols = read_numeric_csv(tmp.file("t.csv"));
  REQUIRE(cols.size() == 3);
  REQUIRE(cols.at("a").size() == 2);
  CHECK(cols.at("a")[0] == 1.0);
  CHECK(std::isnan(cols.at("b")[0]));
  CHECK(cols.at("b")[1] == 5.0);
  CHECK(cols.at("c")[0] == 3.0);
  CHECK(std::isnan(cols.at("c")[1]));

  write_text_file(tmp.file("bad1.csv"), "a,b\n1\n");
  CHECK_THROWS_AS((void)read_numeric_csv(tmp.file("bad1.csv")), io_error);
  write_text_file(tmp.file("bad2.csv"), "a,b\n1,zebra\n");
  CHECK_THROWS_AS((void)read_numeric_csv(tmp.file("bad2.csv")), io_error);
  CHECK_THROWS_AS((void)read_numeric_csv(tmp.file("missing.csv")), io_error);

  const std::vector<SweepPoint> pts = {{256, 256, 1.5, 666.6, 0.9}};
  write_sweep_csv(tmp.file("sweep.csv"), pts);
  const auto sc = read_numeric_csv(tmp.file("sweep.csv"));
  CHECK(sc.at("resolution_requested")[0] == 256.0);
  CHECK(sc.at("class_accuracy")[0] == 0.9);
}

TEST_CASE("svg chart holds axes, series, and gaps") {
  const double nan = std::numeric_limits<double>::quiet_NaN();
  ChartSeries total{"total", {1, 2, 3, 4}, {3, 2.5, 2, 1.5}};
  ChartSeries gappy{"re<ward", {1, 2, 3, 4}, {0.1, nan, 0.3, 0.4}};
  const std::string svg =
      svg_line_chart("training progress", "step", "loss", {total, gappy});
  CHECK(svg.find("<svg") == 0);
  CHECK(svg.rfind("</svg>\n") == svg.size() - 7);
  CHECK(svg.find("<polyline") != std::string::npos);
  CHECK(svg.find("training progress") != std::string::npos);
  CHECK(svg.find(">step<") != std::string::npos);
  CHECK(svg.find(">loss<") != std::string::npos);
  CHECK(svg.find("total") != std::string::npos);
  CHECK(svg.find("re&lt;ward") != std::string::npos);
  CHECK(svg.find("nan") == std::string::npos);
  CHECK(svg.find("inf") == std::string::npos);

  // A single finite point becomes a dot, an empty chart says so.
  const std::string dot = svg_line_chart("t", "x", "y", {{"p", {1}, {2}}});
  CHECK(dot.find("<circle") != std::string::npos);
  const std::string empty = svg_line_chart("t", "x", "y", {});
  CHECK(empty.find("no data") != std::string::npos);

  CHECK_THROWS_AS((void)svg_line_chart("t", "x", "y", {{"bad", {1, 2}, {1}}}),
                  error);
}
