// sssom: command-line driver for the pipeline stages.
//
// Every subcommand writes into --out (created if needed) through temp file +
// rename, and records the exact option values it ran with in config.json.
// Failures print one JSON line on stderr and exit with a code per error kind.

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "sssom/sssom.hpp"

namespace fs = std::filesystem;
using nlohmann::ordered_json;
using namespace sssom;

namespace {

enum ExitCode : int {
  kOk = 0,
  kInternal = 1,
  kUsage = 2,
  kMissingInput = 3,
  kMalformedInput = 4,
  kInvariant = 5,
  kUndefined = 6,
};

int exit_code(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::invalid_argument: return kUsage;
    case ErrorKind::missing_input: return kMissingInput;
    case ErrorKind::malformed_input: return kMalformedInput;
    case ErrorKind::invariant: return kInvariant;
    case ErrorKind::undefined: return kUndefined;
  }
  return kInternal;
}

int report_error(const std::string& kind, int code, const std::string& message) {
  ordered_json line;
  line["error"] = kind;
  line["exit"] = code;
  line["message"] = message;
  std::cerr << line.dump() << "\n";
  return code;
}

struct Common {
  std::string out;
  std::uint64_t seed = 0;
};

struct SsomOptions {
  int tau = 3;
  int cycles = 50;
  double eta0 = 0.1;
  std::string winner_rule = "lexicographic";
  std::string weight_space = "counts_scaled";

  SsomParams params(std::uint64_t seed) const {
    SsomParams p;
    p.tau = tau;
    p.t_max = cycles;
    p.eta0 = eta0;
    p.seed = seed;
    p.winner_rule = winner_rule == "literal_eq1" ? WinnerRule::literal_eq1 : WinnerRule::lexicographic;
    p.weight_space = weight_space == "proportions" ? WeightSpace::proportions : WeightSpace::counts_scaled;
    return p;
  }
};

void add_ssom_options(CLI::App* sub, SsomOptions& o) {
  sub->add_option("--tau", o.tau, "Neighborhood radius in Chebyshev cells")->check(CLI::Range(1, 1000))->capture_default_str();
  sub->add_option("--cycles", o.cycles, "Training cycles t_max")->check(CLI::Range(1, 100000))->capture_default_str();
  sub->add_option("--eta0", o.eta0, "Initial learning rate")->check(CLI::Range(1e-12, 0.999999))->capture_default_str();
  sub->add_option("--winner-rule", o.winner_rule, "lexicographic or literal_eq1")
      ->check(CLI::IsMember({"lexicographic", "literal_eq1"}))
      ->capture_default_str();
  sub->add_option("--weight-space", o.weight_space, "counts_scaled or proportions")
      ->check(CLI::IsMember({"counts_scaled", "proportions"}))
      ->capture_default_str();
}

void add_common(CLI::App* sub, Common& c, bool seeded) {
  sub->add_option("--out", c.out, "Output directory")->required();
  if (seeded) sub->add_option("--seed", c.seed, "Random seed")->capture_default_str();
}

// Option values as given, or their defaults, in declaration order.
// Numeric options are stored as JSON numbers, everything else as given.
ordered_json typed_value(const CLI::Option* opt, const std::string& text) {
  const std::string type = opt->get_type_name();
  if (type.rfind("INT", 0) == 0 || type.rfind("UINT", 0) == 0) {
    if (auto v = parse_int<std::int64_t>(text)) return *v;
  } else if (type.rfind("FLOAT", 0) == 0) {
    if (auto v = parse_double(text)) return *v;
  }
  return text;
}

ordered_json config_of(const CLI::App* sub) {
  ordered_json cfg;
  cfg["command"] = sub->get_name();
  ordered_json opts = ordered_json::object();
  for (const CLI::Option* opt : sub->get_options()) {
    const std::string& name = opt->get_lnames().empty() ? opt->get_name() : opt->get_lnames().front();
    if (name == "help" || name.empty()) continue;
    const bool flag = opt->get_expected_min() == 0;
    if (opt->count() > 0) {
      const auto& results = opt->results();
      if (flag) {
        opts[name] = true;
      } else if (results.size() == 1) {
        opts[name] = typed_value(opt, results.front());
      } else {
        ordered_json list = ordered_json::array();
        for (const auto& r : results) list.push_back(typed_value(opt, r));
        opts[name] = std::move(list);
      }
    } else if (flag) {
      opts[name] = false;
    } else if (!opt->get_default_str().empty()) {
      opts[name] = typed_value(opt, opt->get_default_str());
    } else {
      opts[name] = nullptr;
    }
  }
  cfg["options"] = std::move(opts);
  return cfg;
}

class Output {
 public:
  Output(const std::string& dir, const CLI::App* sub) : dir_(dir) {
    std::error_code ec;
    fs::create_directories(dir_, ec);
    if (ec) fail(ErrorKind::invalid_argument, "cannot create output directory " + dir_.string() + ": " + ec.message());
    config_ = config_of(sub);
  }

  void write(const std::string& name, std::string_view content) { write_file_atomic(dir_ / name, content); }
  void write_json(const std::string& name, const ordered_json& j) { write(name, j.dump(2) + "\n"); }

  // Written last, so a directory with config.json holds a complete run.
  void finish() { write_json("config.json", config_); }

 private:
  fs::path dir_;
  ordered_json config_;
};

PostFormat post_format(const std::string& path, const std::string& flag) {
  if (flag == "tsv") return PostFormat::delimited;
  if (flag == "jsonl") return PostFormat::record_per_line;
  return fs::path(path).extension() == ".jsonl" ? PostFormat::record_per_line : PostFormat::delimited;
}

struct PostInput {
  std::string path;
  std::string format = "auto";
  bool lenient = false;

  PostLoad load() const {
    return load_posts(path, post_format(path, format), lenient ? LoadPolicy::lenient : LoadPolicy::strict);
  }
};

void add_post_input(CLI::App* sub, PostInput& in, const std::string& flag, bool required) {
  auto* opt = sub->add_option(flag, in.path, "Posts file (tab separated or JSON Lines)");
  if (required) opt->required();
  sub->add_option("--posts-format", in.format, "auto, tsv or jsonl")->check(CLI::IsMember({"auto", "tsv", "jsonl"}))->capture_default_str();
  sub->add_flag("--lenient", in.lenient, "Drop out-of-range rows instead of failing");
}

// Field from --field, or binned from --posts at --precision.
struct FieldInput {
  std::string field_path;
  PostInput posts;
  int precision = 3;
  std::string boundary;

  GridField load() const {
    if (!field_path.empty()) return load_field(field_path);
    if (posts.path.empty()) fail(ErrorKind::invalid_argument, "one of --field or --posts is required");
    const auto loaded = posts.load();
    std::optional<BoundarySet> b;
    if (!boundary.empty()) b = load_boundaries(boundary);
    return bin_posts(loaded.posts, precision, b ? &*b : nullptr);
  }
};

void add_field_input(CLI::App* sub, FieldInput& in) {
  auto* field = sub->add_option("--field", in.field_path, "Grid field CSV");
  auto* posts = sub->add_option("--posts", in.posts.path, "Labeled posts file, binned at --precision");
  field->excludes(posts);
  sub->add_option("--posts-format", in.posts.format, "auto, tsv or jsonl")->check(CLI::IsMember({"auto", "tsv", "jsonl"}))->capture_default_str();
  sub->add_flag("--lenient", in.posts.lenient, "Drop out-of-range rows instead of failing");
  sub->add_option("--precision", in.precision, "Decimal precision d")->check(CLI::Range(kMinPrecision, kMaxPrecision))->capture_default_str();
}

std::vector<double> parse_list(const std::string& text, const std::string& flag) {
  std::vector<double> out;
  for (auto part : split(text, ',')) {
    auto v = parse_double(trim(part));
    if (!v) fail(ErrorKind::invalid_argument, flag + ": '" + std::string(part) + "' is not a number");
    out.push_back(*v);
  }
  return out;
}

ordered_json contiguity_json(const Partition& p, int tau) {
  const auto report = check_contiguity(p, tau);
  ordered_json j;
  j["ok"] = report.ok;
  j["offending_clusters"] = report.offending_clusters;
  return j;
}

// --- synth -------------------------------------------------------------------

struct SynthOptions {
  int rows = 60;
  int cols = 60;
  std::string layout = "quadrants";
  std::string proportions = "0.02,0.10,0.30,0.50";
  int posts_per_cell = 200;
  int precision = 3;
  int users = 0;
  int split_row = 0;
  int split_col = 0;
  int persons = 0;
  int points = 100;
};

void run_synth(const CLI::App* sub, const SynthOptions& o, const Common& c) {
  SyntheticSpec spec;
  spec.rows = o.rows;
  spec.cols = o.cols;
  spec.posts_per_cell = o.posts_per_cell;
  spec.seed = c.seed;
  spec.precision = o.precision;
  spec.users = o.users;
  const auto props = parse_list(o.proportions, "--proportions");
  if (o.layout == "quadrants") {
    require(props.size() == 4, "--proportions needs 4 values for quadrants");
    spec.regions = quadrant_regions(o.rows, o.cols, {props[0], props[1], props[2], props[3]});
  } else {
    require(props.size() == 2, "--proportions needs 2 values for halves");
    spec.regions = halves_regions(o.rows, o.cols, props[0], props[1]);
  }
  const auto data = generate_synthetic(spec);
  const int split_row = o.split_row > 0 ? o.split_row : (3 * o.rows) / 4;
  const int split_col = o.split_col > 0 ? o.split_col : (3 * o.cols) / 4;

  Output out(c.out, sub);
  out.write("posts.tsv", posts_to_delimited(data.posts));
  out.write("field.csv", field_to_csv(data.field));
  out.write("truth_assignment.csv", partition_to_csv(data.truth));
  out.write("truth_clusters.csv", cluster_summary_to_csv(data.truth));
  out.write("boundaries.geojson", boundaries_to_geojson(split_boundaries(spec, split_row, split_col)));
  if (o.persons > 0) out.write("traces.csv", trace_points_to_csv(generate_traces(spec, o.persons, o.points)));
  out.finish();
}

// --- classify -------------------------------------------------------------------

struct ClassifyOptions {
  PostInput train;
  PostInput posts;
  std::string model = "embedding";
  int dim = 100;
  int epochs = 20;
  double step = 0.05;
  int min_freq = 2;
  double threshold = 0.5;
  int folds = 5;
  double edge_fraction = 0.05;
  std::size_t top = 20;
};

std::string features_csv(const std::vector<RankedFeature>& features) {
  std::string s = "rank,ngram,score\n";
  for (std::size_t i = 0; i < features.size(); ++i) {
    s += std::to_string(i + 1) + "," + features[i].ngram + "," + format_double(features[i].score) + "\n";
  }
  return s;
}

void run_classify(const CLI::App* sub, const ClassifyOptions& o, const Common& c) {
  const auto train_posts = o.train.load().posts;
  const auto corpus = labeled_corpus(train_posts);
  if (corpus.size() != train_posts.size()) {
    fail(ErrorKind::invalid_argument, "--train has " + std::to_string(train_posts.size() - corpus.size()) + " unlabeled posts");
  }
  std::vector<GeoPost> targets = o.posts.path.empty() ? train_posts : o.posts.load().posts;

  Output out(c.out, sub);
  ordered_json metrics;
  std::vector<double> scores;  // per target; larger = more positive
  std::vector<double> edge_scores;  // probability-like, 0.5 = decision boundary
  if (o.model == "embedding") {
    EmbeddingParams p;
    p.dim = o.dim;
    p.epochs = o.epochs;
    p.step = o.step;
    p.min_freq = o.min_freq;
    p.seed = c.seed;
    const auto model = train_embedding(corpus, p);
    for (auto& post : targets) {
      const double prob = predict(model, post.text);
      post.score = prob;
      post.label = prob >= o.threshold ? Label::positive : Label::negative;
      edge_scores.push_back(prob);
    }
    const auto s = score_corpus([&](std::string_view t) { return classify(model, t, o.threshold); }, corpus);
    metrics["vocab"] = model.vocab.size();
    metrics["train_accuracy"] = s.accuracy();
    metrics["train_f1"] = s.f1();
    metrics["train_loss"] = corpus_loss(model, encode_corpus(model.vocab, corpus));
    out.write("model.txt", serialize(model));
    out.write("top_features.csv", features_csv(top_features(model, o.top)));
  } else {
    LinearParams p;
    p.folds = o.folds;
    p.epochs = o.epochs;
    p.min_freq = o.min_freq;
    p.seed = c.seed;
    const auto model = train_linear(corpus, p);
    for (auto& post : targets) {
      const double m = model.margin(post.text);
      post.label = m >= 0.0 ? Label::positive : Label::negative;
      post.score.reset();
      // Logistic squashing only ranks edge cases; it is not a calibrated probability.
      edge_scores.push_back(1.0 / (1.0 + std::exp(-m)));
    }
    const auto s = score_corpus([&](std::string_view t) { return classify(model, t); }, corpus);
    metrics["vocab"] = model.vocab.size();
    metrics["train_accuracy"] = s.accuracy();
    metrics["train_f1"] = s.f1();
    metrics["C"] = model.C;
    ordered_json cv = ordered_json::object();
    for (const auto& [C, f1] : model.cv_f1) cv[format_double(C)] = f1;
    metrics["cv_f1"] = std::move(cv);
    out.write("model.txt", serialize(model));
    out.write("top_features.csv", features_csv(top_features(model, o.top)));
  }
  std::vector<GeoPost> edges;
  for (std::size_t i : select_edge_indices(edge_scores, o.edge_fraction)) edges.push_back(targets[i]);
  metrics["classified"] = targets.size();
  metrics["edge_cases"] = edges.size();
  out.write("classified.tsv", posts_to_delimited(targets));
  out.write("edge_cases.tsv", posts_to_delimited(edges));
  out.write_json("metrics.json", metrics);
  out.finish();
}

// --- grid ------------------------------------------------------------------------

struct GridOptions {
  PostInput posts;
  int precision = 3;
  std::string boundary;
  std::string basis = "posts";
  bool monthly = false;
};

std::string month_name(std::pair<int, int> m) {
  char buf[16];
  std::snprintf(buf, sizeof(buf), "%04d-%02d", m.first, m.second);
  return buf;
}

void run_grid(const CLI::App* sub, const GridOptions& o, const Common& c) {
  const auto loaded = o.posts.load();
  require(o.basis == "posts" || o.boundary.empty(), "--boundary applies to the posts basis only");
  std::optional<BoundarySet> b;
  if (!o.boundary.empty()) b = load_boundaries(o.boundary);
  const GridField field = o.basis == "users" ? user_centric_field(loaded.posts, o.precision)
                                             : bin_posts(loaded.posts, o.precision, b ? &*b : nullptr);
  Output out(c.out, sub);
  ordered_json summary;
  summary["posts"] = loaded.posts.size();
  summary["rejected_rows"] = loaded.rejected_rows;
  summary["occupied_cells"] = field.occupied();
  summary["binned_posts"] = field.total_posts();
  out.write("field.csv", field_to_csv(field));
  if (o.monthly) {
    const auto report = monthly_ttest(loaded.posts, o.precision);
    std::string csv = "month_a,month_b,t,df,p\n";
    for (const auto& pair : report.pairs) {
      csv += month_name(pair.month_a) + "," + month_name(pair.month_b) + "," + format_double(pair.result.t) + "," +
             format_double(pair.result.df) + "," + format_double(pair.result.p) + "\n";
    }
    out.write("monthly_ttest.csv", csv);
    summary["monthly_warnings"] = report.warnings;
  }
  out.write_json("grid_summary.json", summary);
  out.finish();
}

// --- partition -----------------------------------------------------------------

struct PartitionOptions {
  FieldInput input;
  SsomOptions ssom;
  std::string method = "ssom";
};

void run_partition(const CLI::App* sub, const PartitionOptions& o, const Common& c) {
  const GridField field = o.input.load();
  const SsomParams params = o.ssom.params(c.seed);
  ordered_json summary;
  Partition partition;
  if (o.method == "ssom") {
    partition = run_ssom(field, params);
    summary["contiguity"] = contiguity_json(partition, params.tau);
  } else if (o.method == "som") {
    partition = run_traditional_som(field, TraditionalSomParams(params));
  } else {
    if (o.input.boundary.empty()) fail(ErrorKind::invalid_argument, "--method polygon needs --boundary");
    auto poly = polygon_partition(field, load_boundaries(o.input.boundary));
    summary["uncovered_cells"] = poly.uncovered_cells;
    partition = std::move(poly.partition);
  }
  const auto variance = cluster_variance(partition, field);
  summary["method"] = o.method;
  summary["cells"] = partition.assignment.size();
  summary["clusters"] = partition.cluster_count();
  summary["contiguous"] = partition.contiguous;
  summary["mean_within_variance"] = variance.mean;
  summary["singleton_clusters"] = variance.singletons.size();

  Output out(c.out, sub);
  out.write("assignment.csv", partition_to_csv(partition));
  out.write("clusters.csv", cluster_summary_to_csv(partition));
  out.write_json("partition_summary.json", summary);
  out.finish();
}

// --- evaluate --------------------------------------------------------------------

struct EvaluateOptions {
  FieldInput input;
  SsomOptions ssom;
  std::string holdout = "cells";
  int folds = 10;
  std::string fractions = "0.1,0.25,0.5,0.75";
  std::string post_mode = "ratio_preserving";
  std::string metric = "both";
  std::string truth;
  std::string baseline;
};

void run_evaluate(const CLI::App* sub, const EvaluateOptions& o, const Common& c) {
  const GridField field = o.input.load();
  const SsomParams params = o.ssom.params(c.seed);
  HoldoutPlan plan;
  plan.kind = o.holdout == "posts" ? HoldoutKind::posts : HoldoutKind::cells;
  plan.k = o.folds;
  plan.seed = c.seed;
  plan.fractions = parse_list(o.fractions, "--fractions");
  plan.post_mode = o.post_mode == "uniform" ? SubsampleMode::uniform : SubsampleMode::ratio_preserving;

  std::vector<EvalReport> reports;
  if (o.metric == "mspe" || o.metric == "both") {
    auto r = mspe(field, params, plan);
    reports.insert(reports.end(), r.begin(), r.end());
  }
  if (o.metric == "c2" || o.metric == "both") {
    if (plan.kind != HoldoutKind::cells) fail(ErrorKind::invalid_argument, "--metric c2 needs --holdout cells");
    auto r = grid_robustness(field, params, plan);
    reports.insert(reports.end(), r.begin(), r.end());
  }

  const Partition full = run_ssom(field, params);
  ordered_json summary;
  summary["clusters"] = full.cluster_count();
  summary["contiguity"] = contiguity_json(full, params.tau);
  summary["mean_within_variance"] = cluster_variance(full, field).mean;
  ordered_json means = ordered_json::array();
  for (const auto& r : reports) means.push_back({{"metric", r.metric}, {"fraction", r.fraction}, {"mean", r.mean}, {"sd", r.sd}});
  summary["reports"] = std::move(means);
  if (!o.truth.empty()) summary["c2_vs_truth"] = c2_similarity(full.assignment, parse_assignment_csv(read_lines(o.truth)));
  if (!o.baseline.empty()) {
    const Partition base = make_partition(field, parse_assignment_csv(read_lines(o.baseline)), false);
    const double base_var = cluster_variance(base, field).mean;
    summary["baseline_mean_within_variance"] = base_var;
    summary["c2_vs_baseline"] = c2_similarity(full, base);
  }

  Output out(c.out, sub);
  out.write("report.csv", reports_to_csv(reports));
  out.write_json("evaluation.json", summary);
  out.finish();
}

// --- exposure --------------------------------------------------------------------

struct ExposureOptions {
  std::string traces;
  std::string field;
  std::string part_a;
  std::string part_b;
  PostInput posts_a;
  std::string posts_b;
};

void run_exposure(const CLI::App* sub, const ExposureOptions& o, const Common& c) {
  const GridField field = load_field(o.field);
  const Partition a = make_partition(field, parse_assignment_csv(read_lines(o.part_a)), false);
  const Partition b = make_partition(field, parse_assignment_csv(read_lines(o.part_b)), false);
  const auto traces = bin_traces(load_trace_points(o.traces), field.d);
  const auto report = cohort_exposure(traces, a, b, field);

  ordered_json summary;
  summary["persons"] = report.persons.size();
  summary["invalid_persons"] = report.invalid_persons;
  summary["mean"] = report.mean;
  summary["sd"] = report.sd;
  summary["single_person"] = report.single_person;
  summary["fraction_over_half"] = report.fraction_over_half;
  summary["skipped_visits"] = report.skipped_visits;
  summary["flagged_cells"] = report.flagged_cells;

  Output out(c.out, sub);
  out.write("exposure.csv", exposure_to_csv(report));
  if (!o.posts_a.path.empty()) {
    if (o.posts_b.empty()) fail(ErrorKind::invalid_argument, "--posts-a needs --posts-b");
    PostInput in_b = o.posts_a;
    in_b.path = o.posts_b;
    const auto co = user_coprevalence(o.posts_a.load().posts, in_b.load().posts);
    ordered_json j;
    j["users_a"] = co.users_a;
    j["users_b"] = co.users_b;
    j["users_both"] = co.users_both;
    j["a_given_b"] = co.a_given_b ? ordered_json(*co.a_given_b) : ordered_json("undefined");
    j["b_given_a"] = co.b_given_a ? ordered_json(*co.b_given_a) : ordered_json("undefined");
    out.write_json("coprevalence.json", j);
  }
  out.write_json("exposure_summary.json", summary);
  out.finish();
}

// --- export-geo ------------------------------------------------------------------

struct ExportOptions {
  std::string partition;
  std::string field;
};

void run_export(const CLI::App* sub, const ExportOptions& o, const Common& c) {
  const GridField field = load_field(o.field);
  const Partition p = make_partition(field, parse_assignment_csv(read_lines(o.partition)), false);
  Output out(c.out, sub);
  out.write("partition.geojson", export_geojson(p));
  out.finish();
}

int run(int argc, char** argv) {
  CLI::App app{"Socio-spatial SOM pipeline: classify posts, grid them, partition, evaluate, score exposure"};
  app.require_subcommand(1);
  app.set_version_flag("--version", "sssom 1.0.0");

  Common common;

  SynthOptions synth;
  auto* s = app.add_subcommand("synth", "Generate a planted-region corpus, field, truth, boundaries and traces");
  add_common(s, common, true);
  s->add_option("--rows", synth.rows, "Extent rows")->check(CLI::Range(2, 10000))->capture_default_str();
  s->add_option("--cols", synth.cols, "Extent columns")->check(CLI::Range(2, 10000))->capture_default_str();
  s->add_option("--layout", synth.layout, "quadrants or halves")->check(CLI::IsMember({"quadrants", "halves"}))->capture_default_str();
  s->add_option("--proportions", synth.proportions, "Comma separated region proportions")->capture_default_str();
  s->add_option("--posts-per-cell", synth.posts_per_cell, "Posts per cell")->check(CLI::Range(1, 1000000))->capture_default_str();
  s->add_option("--precision", synth.precision, "Decimal precision d")->check(CLI::Range(kMinPrecision, kMaxPrecision))->capture_default_str();
  s->add_option("--users", synth.users, "Distinct users (0 = one per 5 posts)")->check(CLI::NonNegativeNumber)->capture_default_str();
  s->add_option("--split-row", synth.split_row, "Boundary split row (0 = 3/4 of rows)")->check(CLI::NonNegativeNumber)->capture_default_str();
  s->add_option("--split-col", synth.split_col, "Boundary split column (0 = 3/4 of cols)")->check(CLI::NonNegativeNumber)->capture_default_str();
  s->add_option("--persons", synth.persons, "Mobility traces to generate")->check(CLI::NonNegativeNumber)->capture_default_str();
  s->add_option("--points", synth.points, "Points per trace")->check(CLI::Range(1, 1000000))->capture_default_str();

  ClassifyOptions cls;
  auto* k = app.add_subcommand("classify", "Train a classifier on labeled posts and label a post set");
  add_common(k, common, true);
  k->add_option("--train", cls.train.path, "Labeled training posts")->required();
  k->add_option("--posts", cls.posts.path, "Posts to classify (default: the training posts)");
  k->add_option("--posts-format", cls.train.format, "auto, tsv or jsonl")->check(CLI::IsMember({"auto", "tsv", "jsonl"}))->capture_default_str();
  k->add_flag("--lenient", cls.train.lenient, "Drop out-of-range rows instead of failing");
  k->add_option("--model", cls.model, "embedding or linear")->check(CLI::IsMember({"embedding", "linear"}))->capture_default_str();
  k->add_option("--dim", cls.dim, "Embedding dimension")->check(CLI::Range(1, 10000))->capture_default_str();
  k->add_option("--epochs", cls.epochs, "Training epochs")->check(CLI::Range(1, 100000))->capture_default_str();
  k->add_option("--step", cls.step, "Initial SGD step")->check(CLI::PositiveNumber)->capture_default_str();
  k->add_option("--min-freq", cls.min_freq, "Minimum n-gram frequency")->check(CLI::Range(1, 1000000))->capture_default_str();
  k->add_option("--threshold", cls.threshold, "Positive threshold")->check(CLI::Range(1e-9, 1.0 - 1e-9))->capture_default_str();
  k->add_option("--folds", cls.folds, "Folds for C selection (linear)")->check(CLI::Range(2, 1000))->capture_default_str();
  k->add_option("--edge-fraction", cls.edge_fraction, "Fraction of posts returned as edge cases")->check(CLI::Range(1e-9, 1.0))->capture_default_str();
  k->add_option("--top", cls.top, "Top features to export")->capture_default_str();

  GridOptions grid;
  auto* g = app.add_subcommand("grid", "Bin posts into a grid field");
  add_common(g, common, false);
  add_post_input(g, grid.posts, "--posts", true);
  g->add_option("--precision", grid.precision, "Decimal precision d")->check(CLI::Range(kMinPrecision, kMaxPrecision))->capture_default_str();
  g->add_option("--boundary", grid.boundary, "GeoJSON boundary; cells centred outside are dropped")->check(CLI::ExistingFile);
  g->add_option("--basis", grid.basis, "posts or users")->check(CLI::IsMember({"posts", "users"}))->capture_default_str();
  g->add_flag("--monthly", grid.monthly, "Also write month-over-month Welch t-tests");

  PartitionOptions part;
  auto* p = app.add_subcommand("partition", "Partition a field with SS-SOM, a traditional SOM or boundary polygons");
  add_common(p, common, true);
  add_field_input(p, part.input);
  p->add_option("--boundary", part.input.boundary, "GeoJSON boundary (filter for --posts; districts for polygon)");
  p->add_option("--method", part.method, "ssom, som or polygon")->check(CLI::IsMember({"ssom", "som", "polygon"}))->capture_default_str();
  add_ssom_options(p, part.ssom);

  EvaluateOptions ev;
  auto* e = app.add_subcommand("evaluate", "k-fold holdout MSPE and c2 robustness");
  add_common(e, common, true);
  add_field_input(e, ev.input);
  e->add_option("--boundary", ev.input.boundary, "GeoJSON boundary filter for --posts");
  add_ssom_options(e, ev.ssom);
  e->add_option("--holdout", ev.holdout, "cells or posts")->check(CLI::IsMember({"cells", "posts"}))->capture_default_str();
  e->add_option("--folds", ev.folds, "Folds per fraction")->check(CLI::Range(2, 1000))->capture_default_str();
  e->add_option("--fractions", ev.fractions, "Comma separated holdout fractions")->capture_default_str();
  e->add_option("--post-mode", ev.post_mode, "ratio_preserving or uniform")->check(CLI::IsMember({"ratio_preserving", "uniform"}))->capture_default_str();
  e->add_option("--metric", ev.metric, "mspe, c2 or both")->check(CLI::IsMember({"mspe", "c2", "both"}))->capture_default_str();
  e->add_option("--truth", ev.truth, "Reference assignment CSV for c2");
  e->add_option("--baseline", ev.baseline, "Baseline assignment CSV for variance comparison");

  ExposureOptions ex;
  auto* x = app.add_subcommand("exposure", "Exposure difference of mobility traces between two partitions");
  add_common(x, common, false);
  x->add_option("--traces", ex.traces, "Trace CSV (person_id,lat,lon,timestamp)")->required();
  x->add_option("--field", ex.field, "Grid field CSV")->required();
  x->add_option("--part-a", ex.part_a, "Reference assignment CSV (denominator)")->required();
  x->add_option("--part-b", ex.part_b, "Comparison assignment CSV")->required();
  x->add_option("--posts-a", ex.posts_a.path, "Posts labeled for process A (co-prevalence)");
  x->add_option("--posts-b", ex.posts_b, "Posts labeled for process B (co-prevalence)");
  x->add_option("--posts-format", ex.posts_a.format, "auto, tsv or jsonl")->check(CLI::IsMember({"auto", "tsv", "jsonl"}))->capture_default_str();

  ExportOptions geo;
  auto* m = app.add_subcommand("export-geo", "Export a partition as GeoJSON");
  add_common(m, common, false);
  m->add_option("--partition", geo.partition, "Assignment CSV")->required();
  m->add_option("--field", geo.field, "Grid field CSV")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    return report_error("usage", kUsage, e.what());
  }

  try {
    if (s->parsed()) run_synth(s, synth, common);
    if (k->parsed()) run_classify(k, cls, common);
    if (g->parsed()) run_grid(g, grid, common);
    if (p->parsed()) run_partition(p, part, common);
    if (e->parsed()) run_evaluate(e, ev, common);
    if (x->parsed()) run_exposure(x, ex, common);
    if (m->parsed()) run_export(m, geo, common);
  } catch (const Error& err) {
    return report_error(to_string(err.kind()), exit_code(err.kind()), err.what());
  } catch (const std::exception& err) {
    return report_error("internal", kInternal, err.what());
  }
  return kOk;
}

}  // namespace

int main(int argc, char** argv) { return run(argc, argv); }
