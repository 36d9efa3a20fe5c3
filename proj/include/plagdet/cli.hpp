#pragma once

#include <filesystem>
#include <iomanip>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "plagdet/classifier.hpp"
#include "plagdet/embedding_store.hpp"
#include "plagdet/evaluation.hpp"
#include "plagdet/metric_learning.hpp"
#include "plagdet/pipeline.hpp"
#include "plagdet/retrieval.hpp"
#include "plagdet/synthetic.hpp"

// Command-line front end. Exit codes: 0 success, 1 validation failure, 2 usage error.

namespace plagdet::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitValidation = 1;
inline constexpr int kExitUsage = 2;

namespace detail {

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

// Every option of the invoked subcommand, with its effective value.
inline json run_config(const CLI::App& sub) {
  json j;
  j["command"] = sub.get_name();
  for (const CLI::Option* opt : sub.get_options()) {
    const auto& name = opt->get_single_name();
    if (name == "help") continue;
    if (opt->count() > 0) {
      const auto& res = opt->results();
      if (opt->get_expected_max() == 0)
        j[name] = true;
      else if (res.size() == 1)
        j[name] = res.front();
      else
        j[name] = res;
    } else if (opt->get_expected_max() == 0) {
      j[name] = false;
    } else if (!opt->get_default_str().empty()) {
      j[name] = opt->get_default_str();
    }
  }
  return j;
}

inline fs::path ensure_out_dir(const std::string& out) {
  if (out.empty()) throw UsageError("--out is required");
  fs::path p(out);
  std::error_code ec;
  fs::create_directories(p, ec);
  if (ec) throw ValidationError("cannot create output directory '" + out + "': " + ec.message());
  return p;
}

inline void write_json(const fs::path& path, const json& j) {
  plagdet::detail::write_text(path.string(), j.dump(2) + "\n");
}

inline json read_json(const std::string& path) {
  auto bytes = plagdet::detail::read_file(path);
  try {
    return json::parse(bytes.begin(), bytes.end());
  } catch (const nlohmann::json::parse_error& e) {
    throw ValidationError("'" + path + "': " + e.what());
  }
}

inline ScoreStatistic parse_statistic(const std::string& name, std::size_t k) {
  if (name == "max_similarity") return ScoreStatistic::max_similarity();
  if (name == "mean_top_k") return ScoreStatistic::mean_top_k(k);
  throw UsageError("unknown statistic '" + name + "'");
}

inline LabelSet parse_label_set(const std::vector<std::string>& names) {
  LabelSet s;
  for (const auto& n : names) {
    try {
      s.insert(parse_label(n));
    } catch (const ValidationError& e) {
      throw UsageError(e.what());
    }
  }
  return s;
}

inline std::vector<float> parse_vector(const std::string& text) {
  std::vector<float> v;
  std::stringstream ss(text);
  std::string tok;
  while (std::getline(ss, tok, ',')) {
    try {
      std::size_t used = 0;
      v.push_back(std::stof(tok, &used));
      if (used != tok.size() && tok.find_first_not_of(" \t", used) != std::string::npos)
        throw std::invalid_argument(tok);
    } catch (const std::exception&) {
      throw UsageError("--vector: cannot parse '" + tok + "' as a number");
    }
  }
  if (v.empty()) throw UsageError("--vector: empty vector");
  return v;
}

struct DataArgs {
  std::string manifest, blob;

  void add(CLI::App* app) {
    app->add_option("--manifest", manifest, "manifest.jsonl path")->required();
    app->add_option("--blob", blob, "embeddings.pemb path")->required();
  }
  Dataset load() const { return load_dataset(manifest, blob); }
};

struct TrainArgs {
  TrainConfig cfg;

  void add(CLI::App* app) {
    app->add_option("--margin", cfg.margin, "triplet margin");
    app->add_option("--lr", cfg.learning_rate, "learning rate");
    app->add_option("--batch-size", cfg.batch_size, "triplets per step");
    app->add_option("--iterations", cfg.iterations, "gradient steps");
    app->add_option("--out-dim", cfg.out_dim, "projection output dim (0 = input dim)");
  }
};

struct PolicyArgs {
  bool include_plagiarized = false;
  bool plagiarized_matches_van_gogh = false;
  std::string statistic = "max_similarity";
  std::size_t k = 1;
  std::vector<std::string> reference = {"van_gogh", "other"};

  void add(CLI::App* app, bool with_db_flag) {
    if (with_db_flag) {
      app->add_flag("--include-plagiarized-in-db", include_plagiarized,
                    "put train-split plagiarized items in the retrieval database");
      app->add_flag("--plagiarized-matches-van-gogh", plagiarized_matches_van_gogh,
                    "count plagiarized database items as positives for van_gogh-style queries");
    }
    app->add_option("--statistic", statistic, "threshold score statistic")
        ->check(CLI::IsMember({"max_similarity", "mean_top_k"}));
    app->add_option("--k", k, "k for mean_top_k")->check(CLI::PositiveNumber);
    app->add_option("--reference", reference, "reference labels for the threshold score")
        ->delimiter(',');
  }

  EvalOptions options() const {
    EvalOptions o;
    o.policy.include_plagiarized_in_db = include_plagiarized;
    o.policy.plagiarized_matches_van_gogh = plagiarized_matches_van_gogh;
    o.statistic = parse_statistic(statistic, k);
    o.reference = parse_label_set(reference);
    if (o.reference.empty()) throw UsageError("--reference must name at least one label");
    return o;
  }
};

inline std::string counts_table(const Dataset& ds) {
  std::map<std::pair<Label, Split>, std::size_t> counts;
  for (const auto& r : ds.records()) counts[{r.label, r.split}] += 1;
  std::ostringstream os;
  os << std::left << std::setw(14) << "label" << std::right << std::setw(8) << "train"
     << std::setw(8) << "val" << std::setw(8) << "test" << std::setw(8) << "total" << "\n";
  for (Label l : kAllLabels) {
    std::size_t total = 0;
    os << std::left << std::setw(14) << to_string(l) << std::right;
    for (Split s : kAllSplits) {
      os << std::setw(8) << counts[{l, s}];
      total += counts[{l, s}];
    }
    os << std::setw(8) << total << "\n";
  }
  os << "records: " << ds.size() << ", dim: " << ds.dim() << "\n";
  return os.str();
}

inline std::string html_escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

inline std::string score_text(double s) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.4f", s);
  return buf;
}

struct GridRow {
  std::string title;
  std::vector<RankedEntry> entries;
};

inline std::string markdown_grid(const std::vector<GridRow>& rows, const Dataset& db,
                                 std::size_t k) {
  std::ostringstream os;
  os << "| row |";
  for (std::size_t i = 1; i <= k; ++i) os << " #" << i << " |";
  os << "\n|---|";
  for (std::size_t i = 0; i < k; ++i) os << "---|";
  os << "\n";
  for (const auto& row : rows) {
    os << "| " << row.title << " |";
    for (std::size_t i = 0; i < k; ++i) {
      if (i < row.entries.size()) {
        const auto& e = row.entries[i];
        const auto& rec = db.record(e.db_index);
        os << " ![" << rec.id << "](" << rec.path << ")<br>" << rec.id << " ("
           << to_string(rec.label) << ") " << score_text(e.score) << " |";
      } else {
        os << "  |";
      }
    }
    os << "\n";
  }
  return os.str();
}

inline std::string html_grid(const std::string& title, const std::vector<std::string>& summary,
                             const std::vector<GridRow>& rows, const Dataset& db) {
  std::ostringstream os;
  os << "<!DOCTYPE html>\n<html><head><meta charset=\"utf-8\"><title>" << html_escape(title)
     << "</title></head><body>\n<h1>" << html_escape(title) << "</h1>\n<ul>\n";
  for (const auto& s : summary) os << "<li>" << html_escape(s) << "</li>\n";
  os << "</ul>\n<table border=\"1\">\n";
  for (const auto& row : rows) {
    os << "<tr><th>" << html_escape(row.title) << "</th>";
    for (const auto& e : row.entries) {
      const auto& rec = db.record(e.db_index);
      os << "<td><img src=\"" << html_escape(rec.path) << "\" width=\"160\"><br>"
         << html_escape(rec.id) << " (" << to_string(rec.label) << ") " << score_text(e.score)
         << "</td>";
    }
    os << "</tr>\n";
  }
  os << "</table>\n</body></html>\n";
  return os.str();
}

inline std::string sanitize_filename(const std::string& s) {
  std::string out;
  for (char c : s) out += (std::isalnum(static_cast<unsigned char>(c)) || c == '-' || c == '_') ? c : '_';
  return out;
}

// ---------------------------------------------------------------------------
// Subcommands
// ---------------------------------------------------------------------------

inline int cmd_ingest(const DataArgs& data, std::ostream& out) {
  const auto ds = data.load();
  out << counts_table(ds);
  return kExitOk;
}

struct SynthArgs {
  std::string mode = "separable";
  std::size_t dim = 16;
  std::uint64_t seed = 0;
  std::size_t train = 300, val = 100, test = 100;
  std::string out;
};

inline int cmd_synth(const SynthArgs& a, const json& config, std::ostream& out) {
  const std::array<std::size_t, 3> counts = {a.train, a.val, a.test};
  if (a.dim < 4) throw UsageError("--dim must be >= 4 for the synthetic presets");
  auto spec = a.mode == "split_cluster" ? synthetic::split_cluster_spec(a.seed, a.dim, counts)
                                        : synthetic::separable_spec(a.seed, a.dim, counts);
  const auto ds = synthetic::generate(spec);
  const auto dir = ensure_out_dir(a.out);
  save_dataset(ds, (dir / "manifest.jsonl").string(), (dir / "embeddings.pemb").string());
  write_json(dir / "synth_config.json", json{{"run_config", config}, {"seed", a.seed}});
  out << "wrote " << ds.size() << " records (dim " << ds.dim() << ") to " << dir.string() << "\n";
  return kExitOk;
}

inline int cmd_train(const DataArgs& data, const TrainArgs& t, std::uint64_t seed,
                     const std::string& out_dir, const json& config, std::ostream& out) {
  const auto ds = data.load();
  auto cfg = t.cfg;
  cfg.seed = seed;
  TrainingLog log;
  const auto head = train_projection(ds, cfg, &log);
  const auto dir = ensure_out_dir(out_dir);
  save_head(head, (dir / "head.phed").string());
  plagdet::detail::write_text((dir / "train_log.csv").string(), training_log_csv(log));
  json summary{{"run_config", config}, {"seed", seed}, {"iterations", cfg.iterations}};
  if (!log.empty()) {
    summary["initial_loss"] = log.front().loss;
    summary["final_loss"] = log.back().loss;
  }
  write_json(dir / "train_config.json", summary);
  out << "trained " << head.out_dim() << "x" << head.in_dim() << " head for " << cfg.iterations
      << " iterations";
  if (!log.empty()) out << ", batch loss " << log.front().loss << " -> " << log.back().loss;
  out << "\n";
  return kExitOk;
}

inline Dataset maybe_project(const Dataset& ds, const std::string& head_path) {
  if (head_path.empty()) return ds;
  return project(load_head(head_path), ds);
}

inline int cmd_calibrate(const DataArgs& data, const PolicyArgs& p, const std::string& head_path,
                         std::uint64_t seed, const std::string& out_dir, const json& config,
                         std::ostream& out) {
  const auto opts = p.options();
  const auto ds = maybe_project(data.load(), head_path);
  const auto cal = calibrate_on_validation(ds, opts.statistic, opts.reference);
  auto j = to_json(cal.model);
  j["val_accuracy"] = cal.val_accuracy;
  j["features"] = head_path.empty() ? "raw" : "projected";
  j["seed"] = seed;
  j["run_config"] = config;
  const auto dir = ensure_out_dir(out_dir);
  write_json(dir / "threshold.json", j);
  out << "tau = " << format_double(cal.model.tau) << ", validation accuracy = " << cal.val_accuracy
      << "\n";
  return kExitOk;
}

struct SvmArgs {
  std::string head;
  std::optional<double> lambda;
  std::optional<std::size_t> epochs;
};

inline int cmd_train_svm(const DataArgs& data, const SvmArgs& a, std::uint64_t seed,
                         const std::string& out_dir, const json& config, std::ostream& out) {
  const auto ds = maybe_project(data.load(), a.head);
  auto [train_x, train_y] = split_features(ds, Split::train);
  auto [val_x, val_y] = split_features(ds, Split::val);
  std::vector<double> lambdas = kSvmLambdaGrid;
  std::vector<std::size_t> epoch_grid = kSvmEpochGrid;
  if (a.lambda) lambdas = {*a.lambda};
  if (a.epochs) epoch_grid = {*a.epochs};
  const auto sel = select_svm(train_x, train_y, val_x, val_y, seed, lambdas, epoch_grid);

  std::vector<double> objective;
  train_svm(train_x, train_y, sel.model.lambda, sel.epochs, seed, &objective);

  auto j = to_json(sel.model);
  j["epochs"] = sel.epochs;
  j["val_accuracy"] = sel.val_accuracy;
  j["features"] = a.head.empty() ? "raw" : "projected";
  auto grid = json::array();
  for (const auto& g : sel.grid)
    grid.push_back({{"lambda", g.lambda}, {"epochs", g.epochs}, {"val_accuracy", g.val_accuracy}});
  j["grid"] = grid;
  j["seed"] = seed;
  j["run_config"] = config;
  const auto dir = ensure_out_dir(out_dir);
  write_json(dir / "svm.json", j);
  std::string csv = "epoch,objective\n";
  for (std::size_t e = 0; e < objective.size(); ++e)
    csv += std::to_string(e) + "," + format_double(objective[e]) + "\n";
  plagdet::detail::write_text((dir / "svm_objective.csv").string(), csv);
  out << "svm lambda = " << sel.model.lambda << ", epochs = " << sel.epochs
      << ", validation accuracy = " << sel.val_accuracy << "\n";
  return kExitOk;
}

struct QueryArgs {
  std::string query_id;
  std::string vector;
  std::size_t top_k = 6;
  std::string db_variant = "without-plagiarized";
  std::string method = "baseline";
  std::string head, threshold, svm;
  bool report = false;
  std::string out;
};

inline int cmd_query(const DataArgs& data, const QueryArgs& a, const PolicyArgs& p,
                     std::uint64_t seed, const json& config, std::ostream& out) {
  if (a.query_id.empty() == a.vector.empty())
    throw UsageError("exactly one of --query-id or --vector is required");
  if (a.top_k < 1) throw UsageError("--top-k must be >= 1");
  if (a.method == "learning" && (a.head.empty() || a.svm.empty()))
    throw UsageError("--method learning requires --head and --svm");
  if (a.report && a.out.empty()) throw UsageError("--report requires --out");

  const auto raw = data.load();
  std::vector<float> query;
  std::string query_id = a.query_id;
  if (!a.query_id.empty()) {
    const auto& recs = raw.records();
    auto it = std::find_if(recs.begin(), recs.end(), [&](const auto& r) { return r.id == a.query_id; });
    if (it == recs.end()) throw ValidationError("query id '" + a.query_id + "' not in manifest");
    auto row = raw.vector(static_cast<std::size_t>(it - recs.begin()));
    query.assign(row.begin(), row.end());
  } else {
    query = parse_vector(a.vector);
    query_id = "external";
    if (query.size() != raw.dim())
      throw UsageError("--vector has dim " + std::to_string(query.size()) + ", dataset dim is " +
                       std::to_string(raw.dim()));
  }

  std::optional<ProjectionHead> head;
  if (!a.head.empty()) head = load_head(a.head);
  const Dataset ds = head ? project(*head, raw) : raw;
  if (head) {
    std::vector<float> projected;
    for (double v : head->apply(std::span<const float>(query))) projected.push_back(static_cast<float>(v));
    query = std::move(projected);
  }

  PositivePolicy policy;
  policy.include_plagiarized_in_db = a.db_variant == "with-plagiarized";
  const Dataset db = subset(ds, Split::train, policy.database_labels());
  const auto rl = rank(std::span<const float>(query), db, query_id);

  // Binary decision
  BinaryLabel decision;
  std::string decision_detail;
  if (a.method == "learning") {
    const auto svm = svm_model_from_json(read_json(a.svm));
    const double v = svm_decision(svm, std::span<const float>(query));
    decision = v >= 0.0 ? BinaryLabel::authentic : BinaryLabel::plagiarized;
    decision_detail = "svm decision value " + score_text(v);
  } else {
    ThresholdModel model;
    if (!a.threshold.empty()) {
      model = threshold_model_from_json(read_json(a.threshold));
    } else {
      const auto opts = p.options();
      model = calibrate_on_validation(ds, opts.statistic, opts.reference).model;
    }
    const Dataset ref = subset(ds, model.reference_split, model.reference);
    const double s = score_query(std::span<const float>(query), ref, model.statistic);
    decision = classify_threshold(model, s);
    decision_detail = "score " + score_text(s) + ", tau " + score_text(model.tau);
  }

  out << "query " << query_id << ": " << to_string(decision) << " (" << decision_detail << ")\n";
  const auto shown = top_k(rl, a.top_k);
  for (std::size_t i = 0; i < shown.entries.size(); ++i) {
    const auto& e = shown.entries[i];
    out << std::setw(4) << (i + 1) << "  " << std::left << std::setw(24) << e.db_id << std::right
        << std::setw(12) << to_string(db.record(e.db_index).label) << "  " << score_text(e.score)
        << "\n";
  }

  if (a.report) {
    auto filtered = [&](Label l) {
      RankedList r;
      for (const auto& e : rl.entries)
        if (db.record(e.db_index).label == l) r.entries.push_back(e);
      return top_k(r, a.top_k).entries;
    };
    const std::vector<GridRow> rows = {{"Top-" + std::to_string(a.top_k) + " overall", shown.entries},
                                       {"Van Gogh", filtered(Label::van_gogh)},
                                       {"Other artists", filtered(Label::other)}};
    const std::vector<std::string> summary = {
        "decision: " + std::string(to_string(decision)) + " (" + decision_detail + ")",
        "method: " + a.method, "database: train split, " + a.db_variant,
        "seed: " + std::to_string(seed)};
    const auto dir = ensure_out_dir(a.out);
    const auto stem = "query_" + sanitize_filename(query_id);
    std::ostringstream md;
    md << "# Query " << query_id << "\n\n";
    for (const auto& s : summary) md << "- " << s << "\n";
    md << "\n" << markdown_grid(rows, db, a.top_k) << "\n## Run config\n\n```json\n"
       << config.dump(2) << "\n```\n";
    plagdet::detail::write_text((dir / (stem + ".md")).string(), md.str());
    plagdet::detail::write_text((dir / (stem + ".html")).string(),
                                html_grid("Query " + query_id, summary, rows, db));
    out << "report written to " << (dir / (stem + ".md")).string() << "\n";
  }
  return kExitOk;
}

struct EvaluateArgs {
  std::string method = "baseline";
  std::string head, threshold, svm;
  bool with_pr = false;
  std::string out;
};

inline int cmd_evaluate(const DataArgs& data, const EvaluateArgs& a, const PolicyArgs& p,
                        const TrainArgs& t, std::uint64_t seed, const json& config,
                        std::ostream& out) {
  const auto ds = data.load();
  const auto opts = p.options();
  EvalReport report;
  if (a.method == "baseline") {
    std::optional<ThresholdModel> model;
    if (!a.threshold.empty()) model = threshold_model_from_json(read_json(a.threshold));
    report = evaluate_baseline(ds, opts, model);
  } else {
    ProjectionHead head;
    if (!a.head.empty()) {
      head = load_head(a.head);
    } else {
      auto cfg = t.cfg;
      cfg.seed = seed;
      head = round_to_f32(train_projection(ds, cfg));
    }
    SvmModel svm = a.svm.empty() ? train_svm_on_projected(project(head, ds), seed).model
                                 : svm_model_from_json(read_json(a.svm));
    report = evaluate_learning(ds, head, svm, opts);
  }

  auto j = to_json(report, a.with_pr);
  j["seed"] = seed;
  j["run_config"] = config;
  const auto dir = ensure_out_dir(a.out);
  write_json(dir / ("eval_" + a.method + ".json"), j);
  const auto table = markdown_table_header() + markdown_row(report);
  plagdet::detail::write_text((dir / ("eval_" + a.method + ".md")).string(),
                              table + "\nseed: " + std::to_string(seed) + "\n\n```json\n" +
                                  config.dump(2) + "\n```\n");
  out << table;
  if (!report.excluded_queries.empty())
    out << report.excluded_queries.size() << " queries had no positives and were excluded from mAP\n";
  return kExitOk;
}

inline int cmd_report(const std::vector<std::string>& inputs, const std::string& out_dir,
                      const json& config, std::ostream& out) {
  std::vector<EvalReport> rows;
  auto provenance = json::array();
  for (const auto& path : inputs) {
    const auto j = read_json(path);
    rows.push_back(eval_report_from_json(j));
    provenance.push_back({{"file", path},
                          {"seed", j.value("seed", json())},
                          {"run_config", j.value("run_config", json())}});
  }
  const auto table = markdown_table(rows);
  const auto dir = ensure_out_dir(out_dir);
  plagdet::detail::write_text((dir / "table.md").string(),
                              table + "\n```json\n" +
                                  json{{"run_config", config}, {"sources", provenance}}.dump(2) +
                                  "\n```\n");
  out << table;
  return kExitOk;
}

}  // namespace detail

/// Parses `args` (without the program name) and runs one subcommand.
inline int run(const std::vector<std::string>& args, std::ostream& out = std::cout,
               std::ostream& err = std::cerr) {
  using namespace detail;
  CLI::App app{"Plagiarized painting recognition and retrieval over image embeddings", "plagdet"};
  app.require_subcommand(1);
  app.option_defaults()->always_capture_default();

  std::uint64_t seed = 0;
  std::string out_dir;
  auto add_seed = [&](CLI::App* s) { s->add_option("--seed", seed, "random seed"); };
  auto add_out = [&](CLI::App* s, bool required) {
    auto* o = s->add_option("--out", out_dir, "output directory");
    if (required) o->required();
  };

  DataArgs data;
  TrainArgs train;
  PolicyArgs policy;

  auto* ingest = app.add_subcommand("ingest", "validate a manifest + embedding blob pair");
  data.add(ingest);

  SynthArgs synth_args;
  auto* synth = app.add_subcommand("synth", "generate a synthetic embedding dataset");
  synth->add_option("--mode", synth_args.mode, "cluster geometry")
      ->check(CLI::IsMember({"separable", "split_cluster"}));
  synth->add_option("--dim", synth_args.dim, "embedding dimension");
  synth->add_option("--train", synth_args.train, "items per label in train");
  synth->add_option("--val", synth_args.val, "items per label in val");
  synth->add_option("--test", synth_args.test, "items per label in test");
  synth->add_option("--seed", synth_args.seed, "random seed");
  synth->add_option("--out", synth_args.out, "output directory")->required();

  auto* train_cmd = app.add_subcommand("train", "train the projection head with triplet loss");
  data.add(train_cmd);
  train.add(train_cmd);
  add_seed(train_cmd);
  add_out(train_cmd, true);

  std::string calib_head;
  auto* calibrate = app.add_subcommand("calibrate", "search the similarity threshold on val");
  data.add(calibrate);
  policy.add(calibrate, false);
  calibrate->add_option("--head", calib_head, "optional projection head");
  add_seed(calibrate);
  add_out(calibrate, true);

  SvmArgs svm_args;
  auto* train_svm_cmd = app.add_subcommand("train-svm", "train the linear SVM classifier");
  data.add(train_svm_cmd);
  train_svm_cmd->add_option("--head", svm_args.head, "projection head (omit for raw features)");
  train_svm_cmd->add_option("--lambda", svm_args.lambda, "fix lambda instead of grid search");
  train_svm_cmd->add_option("--epochs", svm_args.epochs, "fix epochs instead of grid search");
  add_seed(train_svm_cmd);
  add_out(train_svm_cmd, true);

  QueryArgs query_args;
  auto* query = app.add_subcommand("query", "rank the database for one query and classify it");
  data.add(query);
  policy.add(query, false);
  query->add_option("--query-id", query_args.query_id, "record id to use as the query");
  query->add_option("--vector", query_args.vector, "comma-separated query embedding");
  query->add_option("--top-k", query_args.top_k, "entries to show");
  query->add_option("--db-variant", query_args.db_variant, "database composition")
      ->check(CLI::IsMember({"without-plagiarized", "with-plagiarized"}));
  query->add_option("--method", query_args.method, "decision rule")
      ->check(CLI::IsMember({"baseline", "learning"}));
  query->add_option("--head", query_args.head, "projection head");
  query->add_option("--threshold", query_args.threshold, "threshold model JSON");
  query->add_option("--svm", query_args.svm, "SVM model JSON");
  query->add_flag("--report", query_args.report, "write markdown/HTML retrieval grid");
  query->add_option("--out", query_args.out, "output directory for --report");
  add_seed(query);

  EvaluateArgs eval_args;
  auto* evaluate = app.add_subcommand("evaluate", "accuracy breakdown and mAP on the test split");
  data.add(evaluate);
  policy.add(evaluate, true);
  train.add(evaluate);
  evaluate->add_option("--method", eval_args.method, "method")
      ->check(CLI::IsMember({"baseline", "learning"}));
  evaluate->add_option("--head", eval_args.head, "trained head (learning; trained if omitted)");
  evaluate->add_option("--threshold", eval_args.threshold, "threshold model (baseline)");
  evaluate->add_option("--svm", eval_args.svm, "SVM model (learning; grid-trained if omitted)");
  evaluate->add_flag("--with-pr", eval_args.with_pr, "include per-query PR points in the JSON");
  add_seed(evaluate);
  evaluate->add_option("--out", eval_args.out, "output directory")->required();

  std::vector<std::string> report_inputs;
  auto* report = app.add_subcommand("report", "combine evaluation JSONs into one table");
  report->add_option("inputs", report_inputs, "eval_*.json files")->required();
  add_out(report, true);

  std::vector<std::string> argv_rev(args.rbegin(), args.rend());
  try {
    app.parse(argv_rev);
  } catch (const CLI::ParseError& e) {
    std::ostringstream o, er;
    const int code = app.exit(e, o, er);
    out << o.str();
    err << er.str();
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    CLI::App* sub = app.get_subcommands().front();
    const auto config = run_config(*sub);
    if (sub == ingest) return cmd_ingest(data, out);
    if (sub == synth) return cmd_synth(synth_args, config, out);
    if (sub == train_cmd) return cmd_train(data, train, seed, out_dir, config, out);
    if (sub == calibrate) return cmd_calibrate(data, policy, calib_head, seed, out_dir, config, out);
    if (sub == train_svm_cmd) return cmd_train_svm(data, svm_args, seed, out_dir, config, out);
    if (sub == query) return cmd_query(data, query_args, policy, seed, config, out);
    if (sub == evaluate) return cmd_evaluate(data, eval_args, policy, train, seed, config, out);
    if (sub == report) return cmd_report(report_inputs, out_dir, config, out);
  } catch (const UsageError& e) {
    err << "usage error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const ValidationError& e) {
    err << "error: " << e.what() << "\n";
    return kExitValidation;
  } catch (const DomainError& e) {
    err << "error: " << e.what() << "\n";
    return kExitValidation;
  }
  return kExitUsage;
}

}  // namespace plagdet::cli
