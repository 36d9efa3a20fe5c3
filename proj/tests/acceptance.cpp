// Acceptance checks. Prints one PASS/FAIL line per criterion; exit status is
// nonzero if any criterion fails.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "oracles.hpp"
#include "plagdet/cli.hpp"
#include "plagdet/plagdet.hpp"
#include "test_util.hpp"

namespace {

using namespace plagdet;
namespace fs = std::filesystem;

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.4g", v);
  return buf;
}

struct Outcome {
  bool pass;
  std::string detail;
};

struct Criterion {
  std::string name;
  double budget_s;  // 0 = no runtime bound
  std::function<Outcome()> run;
};

Outcome map_oracle() {
  std::mt19937_64 rng(20240601);
  double worst = 0.0;
  for (int t = 0; t < 1000; ++t) {
    const std::size_t n = 1 + rng() % 20;
    std::vector<bool> mask(n);
    bool any = false;
    for (std::size_t i = 0; i < n; ++i) any |= (mask[i] = rng() % 2 == 0);
    if (!any) mask[rng() % n] = true;
    RankedList rl;
    for (std::size_t i = 0; i < n; ++i) rl.entries.push_back({"d" + std::to_string(i), -double(i), i});
    const double ap = average_precision(rl, mask).ap;
    worst = std::max({worst, std::abs(ap - oracle::pr_staircase_ap(mask)),
                      std::abs(ap - oracle::closed_form_ap(mask))});
  }
  return {worst <= 1e-9, "max abs error " + num(worst)};
}

Outcome gradient_fd() {
  const auto ds = synthetic::generate(synthetic::split_cluster_spec(11, 16, {40, 10, 10}));
  const auto triplets = sample_triplets(ds, 5000, 3);
  std::mt19937_64 rng(99);
  std::normal_distribution<double> g(0.0, 0.25);
  auto as_double = [&](std::size_t i) {
    const auto r = ds.vector(i);
    return std::vector<double>(r.begin(), r.end());
  };
  const std::size_t in = 16, out = 12;
  double worst = 0.0;
  std::size_t checked = 0;
  for (const auto& t : triplets) {
    if (checked == 100) break;
    std::vector<double> w(in * out);
    for (std::size_t r = 0; r < out; ++r)
      for (std::size_t c = 0; c < in; ++c) w[r * in + c] = (r == c ? 1.0 : 0.0) + g(rng);
    const ProjectionHead head(in, out, w);
    const auto a = as_double(t.a), p = as_double(t.p), n = as_double(t.n);
    // keep the hinge clear of its kink so central differences are valid
    if (oracle::projected_triplet_loss(w, out, in, a, p, n, 1.0) < 0.05) continue;
    const auto lg = loss_gradient(head, a, p, n, Metric{}, 1.0);
    const auto fd = oracle::finite_difference_gradient(w, out, in, a, p, n, 1.0, 1e-3);
    worst = std::max(worst, oracle::relative_error(lg.gradient, fd));
    ++checked;
  }
  return {checked == 100 && worst < 1e-4,
          std::to_string(checked) + " pairs, max rel error " + num(worst)};
}

Outcome threshold_optimality() {
  std::mt19937_64 rng(404);
  std::size_t mismatches = 0;
  for (int t = 0; t < 200; ++t) {
    const std::size_t n = 2 + rng() % 49;
    std::vector<LabeledScore> data;
    std::vector<double> scores;
    std::vector<bool> is_plag;
    for (std::size_t i = 0; i < n; ++i) {
      const bool plag = i == 0 ? true : i == 1 ? false : rng() % 2 == 0;
      double s = std::uniform_real_distribution<double>(-1, 1)(rng);
      if (t % 4 == 0) s = std::round(s * 4) / 4;
      data.emplace_back(s, plag ? BinaryLabel::plagiarized : BinaryLabel::authentic);
      scores.push_back(s);
      is_plag.push_back(plag);
    }
    const auto cal = calibrate_threshold(data);
    const double best = oracle::exhaustive_threshold_accuracy(scores, is_plag);
    if (cal.accuracy != best || threshold_accuracy(data, cal.tau) != best) ++mismatches;
  }
  return {mismatches == 0, std::to_string(mismatches) + " of 200 sets differ from exhaustive max"};
}

Outcome baseline_separable() {
  const auto ds = synthetic::generate(synthetic::separable_spec(2024));
  const auto report = evaluate_baseline(ds, EvalOptions{});
  const bool ok = report.accuracy.overall >= 0.99 && report.map && *report.map >= 0.99;
  return {ok, "accuracy " + format_percent(report.accuracy.overall) + ", mAP " +
                  num(report.map.value_or(-1.0))};
}

Outcome directional() {
  const auto ds = synthetic::generate(synthetic::split_cluster_spec(7));
  const PositivePolicy policy;
  const double before = *evaluate_retrieval(project(ProjectionHead::identity(ds.dim()), ds), policy).map;
  TrainConfig cfg;
  cfg.iterations = 2000;
  cfg.seed = 7;
  const auto head = train_projection(ds, cfg);
  const double after = *evaluate_retrieval(project(head, ds), policy).map;
  return {after >= before + 0.05,
          "identity mAP " + num(before) + ", trained mAP " + num(after)};
}

std::map<std::string, std::string> snapshot(const fs::path& dir) {
  std::map<std::string, std::string> files;
  for (const auto& e : fs::directory_iterator(dir)) {
    std::ifstream in(e.path(), std::ios::binary);
    files[e.path().filename().string()] = {std::istreambuf_iterator<char>(in), {}};
  }
  return files;
}

Outcome determinism() {
  testing::TempDir tmp;
  std::ostringstream sink;
  const auto data = tmp.file("data");
  const std::vector<std::string> d = {"--manifest", data + "/manifest.jsonl", "--blob",
                                      data + "/embeddings.pemb"};
  auto with_data = [&](std::vector<std::string> head, std::vector<std::string> tail) {
    head.insert(head.end(), d.begin(), d.end());
    head.insert(head.end(), tail.begin(), tail.end());
    return head;
  };
  const std::vector<std::pair<std::string, std::vector<std::string>>> commands = {
      {"synth",
       {"synth", "--mode", "split_cluster", "--train", "60", "--val", "20", "--test", "20", "--seed",
        "13", "--out", data}},
      {"train", with_data({"train"}, {"--iterations", "300", "--seed", "13", "--out", tmp.file("train")})},
      {"calibrate", with_data({"calibrate"}, {"--head", tmp.file("train") + "/head.phed", "--seed", "13",
                                              "--out", tmp.file("calibrate")})},
      {"train-svm", with_data({"train-svm"}, {"--head", tmp.file("train") + "/head.phed", "--seed",
                                              "13", "--out", tmp.file("svm")})},
  };
  std::vector<std::string> failed;
  for (const auto& [name, args] : commands) {
    const fs::path out_dir = args.back();
    if (cli::run(args, sink, sink) != 0) return {false, name + " failed: " + sink.str()};
    const auto first = snapshot(out_dir);
    if (cli::run(args, sink, sink) != 0) return {false, name + " failed on rerun: " + sink.str()};
    if (snapshot(out_dir) != first || first.empty()) failed.push_back(name);
  }
  if (!failed.empty()) {
    std::string names;
    for (const auto& f : failed) names += " " + f;
    return {false, "artifacts differ:" + names};
  }
  return {true, "synth, train, calibrate, train-svm artifacts bit-identical across reruns"};
}

Outcome table_rendering() {
  testing::TempDir tmp;
  std::ostringstream sink, out;
  const auto data = tmp.file("data");
  if (cli::run({"synth", "--train", "30", "--val", "10", "--test", "12", "--seed", "3", "--out", data},
               sink, sink) != 0)
    return {false, "synth failed"};
  if (cli::run({"evaluate", "--manifest", data + "/manifest.jsonl", "--blob", data + "/embeddings.pemb",
                "--method", "baseline", "--out", tmp.file("eval")},
               out, sink) != 0)
    return {false, "evaluate failed: " + sink.str()};

  const std::string header =
      "| method | Van Gogh | Plagiarized | Other | Accuracy | mAP |\n|---|---|---|---|---|---|\n";
  const std::string table = out.str();
  if (table.rfind(header, 0) != 0) return {false, "header mismatch"};
  const std::string row = table.substr(header.size(), table.find('\n', header.size()) - header.size());
  if (std::count(row.begin(), row.end(), '|') != 7 || row.rfind("| baseline |", 0) != 0)
    return {false, "row does not have 6 cells: " + row};

  std::ifstream jf(tmp.file("eval") + "/eval_baseline.json");
  const auto j = nlohmann::json::parse(jf);
  double weighted = 0.0, total = 0.0;
  for (const std::string l : {"van_gogh", "plagiarized", "other"}) {
    const double n = j["group_sizes"][l].get<double>();
    weighted += n * j["accuracy_" + l].get<double>();
    total += n;
  }
  const double err = std::abs(weighted / total - j["accuracy_overall"].get<double>());
  if (err > 1e-12) return {false, "overall differs from weighted group mean by " + num(err)};

  std::vector<Prediction> preds;
  for (auto [l, correct] : {std::pair{Label::van_gogh, 196}, {Label::plagiarized, 192}, {Label::other, 195}})
    for (int i = 0; i < 200; ++i) {
      const auto right = to_binary(l);
      const auto wrong = right == BinaryLabel::authentic ? BinaryLabel::plagiarized : BinaryLabel::authentic;
      preds.push_back({l, i < correct ? right : wrong});
    }
  const auto b = accuracy_breakdown(preds);
  EvalReport r;
  r.method = "example";
  r.accuracy = b;
  const bool arithmetic = std::abs(b.overall - (0.98 + 0.96 + 0.975) / 3.0) <= 1e-12 &&
                          markdown_row(r) == "| example | 98.0% | 96.0% | 97.5% | 97.2% | n/a |\n";
  if (!arithmetic) return {false, "equal-group example rendered as " + markdown_row(r)};
  return {true, "schema ok, weighted-mean error " + num(err) + ", 98.0/96.0/97.5 -> 97.2%"};
}

}  // namespace

int main() {
  const std::vector<Criterion> criteria = {
      {"mAP matches oracle on 1000 random instances (abs err <= 1e-9)", 5, map_oracle},
      {"analytic gradient vs finite differences, 100 active pairs (rel err < 1e-4)", 10, gradient_fd},
      {"threshold search equals exhaustive optimum on 200 sets", 5, threshold_optimality},
      {"separable baseline, 300/100/100 per label (accuracy and mAP >= 0.99)", 30, baseline_separable},
      {"split_cluster: trained mAP >= identity mAP + 5pp after 2000 iterations", 300, directional},
      {"train, calibrate, train-svm, synth artifacts bit-identical on rerun", 0, determinism},
      {"markdown table schema and weighted overall accuracy", 0, table_rendering},
  };
  int failures = 0;
  for (const auto& c : criteria) {
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (c.budget_s > 0 && secs >= c.budget_s) {
      o.pass = false;
      o.detail += " (over time budget)";
    }
    failures += !o.pass;
    std::printf("[%s] %s: %s (%.2fs)\n", o.pass ? "PASS" : "FAIL", c.name.c_str(), o.detail.c_str(), secs);
  }
  std::printf("%d of %zu criteria passed\n", int(criteria.size()) - failures, criteria.size());
  return failures == 0 ? 0 : 1;
}
