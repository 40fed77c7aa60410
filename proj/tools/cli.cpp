#include "cli.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <memory>
#include <ostream>
#include <set>
#include <sstream>

#include "CLI11.hpp"
#include "json.hpp"
#include "ragmi/answer_scorer.hpp"
#include "ragmi/attribution.hpp"
#include "ragmi/data_model.hpp"
#include "ragmi/divergence_metrics.hpp"
#include "ragmi/ensemble_search.hpp"
#include "ragmi/error.hpp"
#include "ragmi/fusion.hpp"
#include "ragmi/mi_core.hpp"
#include "ragmi/parallel.hpp"
#include "ragmi/reference_retrievers.hpp"
#include "ragmi/report.hpp"
#include "ragmi/spectrum.hpp"
#include "ragmi/synth_bank.hpp"

namespace ragmi::cli {
namespace {

using nlohmann::json;
namespace fs = std::filesystem;

class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct Settings {
  std::string command;
  std::string config;
  std::string out = "out";
  std::uint64_t seed = 0;
  unsigned threads = 0;

  std::string runs, qa, corpus, cp;
  std::vector<std::string> retrievers;
  int top_k = 10;
  double tau = 1.0;
  double gamma = 10.0;
  std::string anchor = "union";
  std::string estimator = "regression";
  std::string dataset = "dataset";

  // retrieve
  std::string retrieve_method = "bm25";
  std::string query_embeddings;
  int depth = 100;
  // score-cp
  bool mock = false;
  std::string endpoint, model = "mock", cache;
  // synth
  std::string spec = "default";
  int n_queries = 0;
  // sweep
  std::vector<int> sweep_top_k = SweepGrid{}.top_k_values;
  std::vector<std::string> sweep_anchor = SweepGrid{}.anchors;
  std::vector<double> sweep_gamma = SweepGrid{}.gamma_values;
  // shapley
  int permutations = 0;
  // fuse / ensemble / perturb
  std::string method = "zscore_linear";
  std::vector<double> weights;
  double lambda = -1.0;
  double rrf_k = 60.0;
  double train_fraction = 0.2;
  int max_subset_size = 5;
  std::vector<std::string> methods;
  bool evaluate_all = false;
  // spectrum
  double threshold = 0.7;
};

std::string out_path(const Settings& s, const std::string& name) { return (fs::path(s.out) / name).string(); }

void require(const std::string& value, const Settings& s, const std::string& flag) {
  if (value.empty()) throw UsageError(s.command + ": " + flag + " is required");
}

std::string read_text(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot read '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// ---- option registration ------------------------------------------------------

void add_common(CLI::App* sub, Settings& s) {
  sub->add_option("--config", s.config, "JSON file of option values; flags override it");
  sub->add_option("--out", s.out, "Output directory")->capture_default_str();
  sub->add_option("--seed", s.seed, "Random seed")->capture_default_str();
  sub->add_option("--threads", s.threads, "Worker cap (0 = all cores, 1 = single-threaded)")
      ->capture_default_str();
}

void add_inputs(CLI::App* sub, Settings& s) {
  sub->add_option("--runs", s.runs, "Retriever runs (runs.jsonl)");
  sub->add_option("--qa", s.qa, "QA pairs (qa.jsonl)");
  sub->add_option("--cp", s.cp, "Raw CP* distributions (default: cp_star.jsonl next to --runs)");
  sub->add_option("--retrievers", s.retrievers, "Restrict to these retrievers");
  sub->add_option("--top-k", s.top_k, "Anchor list depth")->capture_default_str();
  sub->add_option("--tau", s.tau, "Softmax temperature on retriever scores")->capture_default_str();
  sub->add_option("--gamma", s.gamma, "Golden reinforcement factor (> 1)")->capture_default_str();
  sub->add_option("--anchor", s.anchor, "Anchor policy: union | single:<name>")->capture_default_str();
}

void add_estimator(CLI::App* sub, Settings& s) {
  sub->add_option("--estimator", s.estimator, "MI estimator: gaussian | regression")->capture_default_str();
}

void add_search(CLI::App* sub, Settings& s) {
  sub->add_option("--train-fraction", s.train_fraction, "Share of queries used for fitting and selection")
      ->capture_default_str();
  sub->add_option("--max-subset-size", s.max_subset_size, "Exhaustive enumeration limit")
      ->capture_default_str();
  sub->add_option("--methods", s.methods, "Fusion methods to search (default: all)");
  sub->add_flag("--evaluate-all", s.evaluate_all, "Attach test metrics to every candidate");
}

// ---- config file merge --------------------------------------------------------

std::vector<std::string> json_to_strings(const json& v) {
  std::vector<std::string> out;
  auto one = [](const json& x) -> std::string {
    if (x.is_string()) return x.get<std::string>();
    if (x.is_boolean()) return x.get<bool>() ? "true" : "false";
    if (x.is_number()) return x.dump();
    throw UsageError("config: unsupported value " + x.dump());
  };
  if (v.is_array())
    for (const auto& x : v) out.push_back(one(x));
  else
    out.push_back(one(v));
  return out;
}

const json* find_key(const json& obj, const std::string& lname) {
  std::string snake = lname;
  std::replace(snake.begin(), snake.end(), '-', '_');
  for (const auto& key : {lname, snake}) {
    auto it = obj.find(key);
    if (it != obj.end()) return &*it;
  }
  return nullptr;
}

/// Fills options that were not given on the command line. A nested object
/// named after the subcommand takes precedence over top-level keys.
void merge_config(CLI::App* sub, const std::string& path) {
  json cfg;
  try {
    cfg = json::parse(read_text(path));
  } catch (const json::exception& e) {
    throw UsageError("config '" + path + "': " + e.what());
  } catch (const Error& e) {
    throw UsageError(std::string("config: ") + e.what());
  }
  if (!cfg.is_object()) throw UsageError("config '" + path + "' must hold a JSON object");
  std::vector<const json*> layers;
  auto nested = cfg.find(sub->get_name());
  if (nested != cfg.end() && nested->is_object()) layers.push_back(&*nested);
  layers.push_back(&cfg);

  for (CLI::Option* opt : sub->get_options()) {
    if (opt->count() > 0 || opt->get_lnames().empty()) continue;
    const std::string& lname = opt->get_lnames().front();
    if (lname == "help" || lname == "config") continue;
    for (const json* layer : layers) {
      const json* v = find_key(*layer, lname);
      if (!v) continue;
      try {
        opt->add_result(json_to_strings(*v));
        opt->run_callback();
      } catch (const CLI::Error& e) {
        throw UsageError("config key '" + lname + "': " + e.what());
      }
      break;
    }
  }
}

// ---- shared loading -----------------------------------------------------------

struct Inputs {
  std::vector<RetrieverRun> runs;
  std::vector<QaPair> qa;
  TargetMap cp_raw;
  TargetMap targets;
  AnchorMap anchor;
  MetricConfig metric;
};

std::vector<RetrieverRun> select_runs(std::vector<RetrieverRun> runs, const std::vector<std::string>& names) {
  if (names.empty()) return runs;
  std::vector<RetrieverRun> out;
  for (const auto& n : names) {
    auto it = std::find_if(runs.begin(), runs.end(), [&](const RetrieverRun& r) { return r.name == n; });
    if (it == runs.end()) throw UsageError("--retrievers: no run named '" + n + "'");
    out.push_back(*it);
  }
  return out;
}

std::string resolve_cp(const Settings& s) {
  if (!s.cp.empty()) return s.cp;
  const fs::path guess = fs::path(s.runs).parent_path() / "cp_star.jsonl";
  if (fs::exists(guess)) return guess.string();
  throw UsageError(s.command + ": --cp is required (no cp_star.jsonl next to --runs)");
}

Inputs load_inputs(const Settings& s) {
  require(s.runs, s, "--runs");
  require(s.qa, s, "--qa");
  if (!(s.gamma > 1.0)) throw UsageError("--gamma must be > 1");
  Inputs in;
  in.metric.tau = s.tau;
  in.metric.top_k = s.top_k;
  try {
    in.metric.validate();
  } catch (const ConfigError& e) {
    throw UsageError(e.what());
  }
  const std::string cp = resolve_cp(s);
  in.runs = select_runs(load_runs(s.runs), s.retrievers);
  in.qa = load_qa(s.qa);
  in.cp_raw = load_distributions(cp);
  in.targets = reinforce_all(in.cp_raw, in.qa, s.gamma);
  in.anchor = build_anchor_lists(in.runs, AnchorPolicy::parse(s.anchor, s.top_k));
  return in;
}

EstimatorConfig estimator_config(const Settings& s) {
  EstimatorConfig ec;
  try {
    ec.kind = parse_estimator(s.estimator);
  } catch (const Error& e) {
    throw UsageError(e.what());
  }
  ec.seed = s.seed;
  return ec;
}

Utility make_utility(const Inputs& in, const Settings& s) {
  return Utility(align(in.runs, in.targets, in.anchor), estimator_config(s));
}

SearchConfig search_config(const Settings& s, const MetricConfig& metric) {
  SearchConfig sc;
  sc.train_fraction = s.train_fraction;
  sc.split_seed = s.seed;
  sc.max_subset_size = s.max_subset_size;
  sc.metric = metric;
  sc.evaluate_all = s.evaluate_all;
  for (const auto& m : s.methods) {
    FusionSpec spec;
    try {
      spec.method = parse_method(m);
    } catch (const Error& e) {
      throw UsageError(e.what());
    }
    sc.methods.push_back(spec);
  }
  try {
    sc.validate();
  } catch (const ConfigError& e) {
    throw UsageError(e.what());
  }
  return sc;
}

json spec_json(const FusionSpec& spec) {
  json j;
  j["method"] = method_name(spec.method);
  j["weights"] = spec.weights;
  j["temperatures"] = spec.temperatures;
  j["rrf_k"] = spec.rrf_k;
  j["lambda"] = spec.lambda ? json(*spec.lambda) : json(nullptr);
  return j;
}

json metrics_json(const EvalMetrics& m) {
  return json{{"recall_at_1", m.recall_at_1}, {"mrr", m.mrr}, {"div", m.div}};
}

AnchorMap restrict_anchor(const AnchorMap& anchor, const std::set<std::string>& ids) {
  AnchorMap out;
  for (const auto& [q, list] : anchor)
    if (ids.count(q)) out.emplace(q, list);
  return out;
}

std::vector<QaPair> restrict_qa(const std::vector<QaPair>& qa, const std::set<std::string>& ids) {
  std::vector<QaPair> out;
  for (const auto& p : qa)
    if (ids.count(p.query_id)) out.push_back(p);
  return out;
}

void report_exclusions(std::ostream& err, const std::string& run, const RankMetric& m) {
  if (m.excluded > 0)
    err << "warning: " << run << ": " << m.excluded << " queries have no run list and were excluded\n";
}

// ---- subcommands --------------------------------------------------------------

void cmd_synth(const Settings& s, bool seed_given, std::ostream& out) {
  SynthSpec spec;
  if (fs::is_regular_file(s.spec)) {
    spec = SynthSpec::from_json(read_text(s.spec));
    if (seed_given) spec.seed = s.seed;
  } else {
    spec = SynthSpec::named(s.spec, s.seed);
  }
  if (s.n_queries > 0) spec.n_queries = s.n_queries;
  spec.validate();
  const SynthBank bank = generate(spec);
  save_qa(out_path(s, "qa.jsonl"), bank.qa);
  save_runs(out_path(s, "runs.jsonl"), bank.runs);
  save_corpus(out_path(s, "corpus.jsonl"), bank.corpus);
  save_distributions(out_path(s, "cp_star.jsonl"), bank.cp_star);
  write_file(out_path(s, "synth_spec.json"), spec.to_json() + "\n");
  json props = json::array();
  for (const auto& a : expected_properties(spec))
    props.push_back({{"kind", a.kind}, {"retrievers", a.retrievers}, {"threshold", a.threshold},
                     {"description", a.description}});
  write_file(out_path(s, "expected_properties.json"), props.dump(2) + "\n");
  out << "synth: " << spec.name << " seed " << spec.seed << ": " << bank.qa.size() << " queries, "
      << bank.runs.size() << " retrievers -> " << s.out << "\n";
}

void cmd_retrieve(const Settings& s, std::ostream& out) {
  require(s.corpus, s, "--corpus");
  require(s.qa, s, "--qa");
  if (s.depth < 1) throw UsageError("--top-k must be >= 1");
  if (s.retrieve_method != "bm25" && s.retrieve_method != "dense" && s.retrieve_method != "all")
    throw UsageError("--method must be bm25, dense or all");
  const auto corpus = load_corpus(s.corpus);
  const auto qa = load_qa(s.qa);
  std::vector<RetrieverRun> runs;
  if (s.retrieve_method != "dense") {
    const Bm25Index index(corpus);
    RetrieverRun run;
    run.name = "bm25";
    for (const auto& p : qa) run.lists[p.query_id] = index.retrieve(p.question, s.depth);
    runs.push_back(std::move(run));
  }
  if (s.retrieve_method != "bm25") {
    require(s.query_embeddings, s, "--query-embeddings");
    std::map<std::string, std::vector<double>> emb;
    std::istringstream lines(read_text(s.query_embeddings));
    std::string line;
    std::size_t no = 0;
    while (std::getline(lines, line)) {
      ++no;
      if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
      try {
        const json j = json::parse(line);
        emb[j.at("query_id").get<std::string>()] = j.at("embedding").get<std::vector<double>>();
      } catch (const json::exception& e) {
        throw ParseError(s.query_embeddings, no, e.what());
      }
    }
    RetrieverRun run;
    run.name = "dense";
    for (const auto& p : qa) {
      auto it = emb.find(p.query_id);
      if (it == emb.end()) throw Error("no query embedding for '" + p.query_id + "'");
      run.lists[p.query_id] = dense_retrieve(corpus, it->second, s.depth);
    }
    runs.push_back(std::move(run));
  }
  save_runs(out_path(s, "runs.jsonl"), runs);
  out << "retrieve: " << runs.size() << " run(s) over " << qa.size() << " queries -> "
      << out_path(s, "runs.jsonl") << "\n";
}

void cmd_score_cp(const Settings& s, std::ostream& out) {
  require(s.runs, s, "--runs");
  require(s.qa, s, "--qa");
  require(s.corpus, s, "--corpus");
  if (!s.mock) require(s.endpoint, s, "--endpoint (or --mock)");
  const auto runs = select_runs(load_runs(s.runs), s.retrievers);
  const auto qa = load_qa(s.qa);
  const auto corpus = load_corpus(s.corpus);
  std::map<std::string, const Chunk*> by_id;
  for (const auto& c : corpus) by_id[c.chunk_id] = &c;
  const AnchorMap anchor = build_anchor_lists(runs, AnchorPolicy::parse(s.anchor, s.top_k));

  ScorerConfig cfg;
  cfg.cache_path = s.cache.empty() ? out_path(s, "cp_cache.jsonl") : s.cache;
  cfg.max_in_flight = s.threads == 0 ? 4 : static_cast<int>(s.threads);
  std::unique_ptr<AnswerScorer> scorer;
  if (s.mock) {
    scorer = std::make_unique<AnswerScorer>(cfg, std::make_unique<MockBackend>());
  } else {
    cfg.endpoint_url = s.endpoint;
    cfg.model_id = s.model;
    cfg.validate();
    scorer = std::make_unique<AnswerScorer>(cfg, std::make_unique<HttpBackend>(cfg));
  }
  TargetMap dists;
  for (const auto& p : qa) {
    auto it = anchor.find(p.query_id);
    if (it == anchor.end()) continue;
    std::vector<Chunk> chunks;
    for (const auto& id : it->second) {
      auto c = by_id.find(id);
      if (c == by_id.end()) throw Error("chunk '" + id + "' retrieved for '" + p.query_id + "' is not in the corpus");
      chunks.push_back(*c->second);
    }
    dists.emplace(p.query_id, cp_star(*scorer, p, chunks));
  }
  save_distributions(out_path(s, "cp_star.jsonl"), dists);
  out << "score-cp: " << dists.size() << " queries, " << scorer->backend_calls() << " backend calls -> "
      << out_path(s, "cp_star.jsonl") << "\n";
}

void cmd_benchmark(const Settings& s, std::ostream& out, std::ostream& err) {
  const Inputs in = load_inputs(s);
  std::string csv = csv_row({"retriever", "dataset", "recall_at_1", "mrr", "div"});
  for (const auto& run : in.runs) {
    const RankMetric r1 = recall_at_k(run, in.qa, 1);
    const RankMetric rr = mrr(run, in.qa);
    report_exclusions(err, run.name, r1);
    const double div = divergence_score(run, in.targets, in.anchor, in.metric);
    csv += csv_row({run.name, s.dataset, format_number(r1.value), format_number(rr.value), format_number(div)});
    out << run.name << ": recall@1 " << format_fixed(r1.value, 4) << "  mrr " << format_fixed(rr.value, 4)
        << "  div " << format_fixed(div, 4) << "\n";
  }
  write_file(out_path(s, "metrics.csv"), csv);
}

void cmd_correlate(const Settings& s, std::ostream& out, std::ostream& err) {
  const Inputs in = load_inputs(s);
  std::vector<double> recall, neg_div;
  std::string csv = csv_row({"retriever", "recall_at_1", "div", "neg_div"});
  for (const auto& run : in.runs) {
    const RankMetric r1 = recall_at_k(run, in.qa, 1);
    report_exclusions(err, run.name, r1);
    const double div = divergence_score(run, in.targets, in.anchor, in.metric);
    recall.push_back(r1.value);
    neg_div.push_back(-div);
    csv += csv_row({run.name, format_number(r1.value), format_number(div), format_number(-div)});
  }
  json summary{{"retrievers", in.runs.size()}, {"gamma", s.gamma}, {"top_k", s.top_k}, {"anchor", s.anchor}};
  try {
    const double r = pearson(recall, neg_div);
    summary["pearson"] = r;
    out << "pearson(recall@1, -div) = " << format_fixed(r, 4) << " over " << in.runs.size() << " retrievers\n";
  } catch (const Error& e) {
    summary["pearson"] = nullptr;
    err << "warning: correlation undefined: " << e.what() << "\n";
  }
  write_file(out_path(s, "correlation.csv"), csv);
  write_file(out_path(s, "correlation.json"), summary.dump(2) + "\n");
}

void cmd_sweep(const Settings& s, std::ostream& out, std::ostream& err) {
  const Inputs in = load_inputs(s);
  SweepGrid grid;
  grid.top_k_values = s.sweep_top_k;
  grid.anchors = s.sweep_anchor;
  grid.gamma_values = s.sweep_gamma;
  try {
    grid.validate();
  } catch (const ConfigError& e) {
    throw UsageError(e.what());
  }
  std::vector<std::string> warnings;
  const auto rows = hparam_sweep(in.runs, in.qa, in.cp_raw, grid, in.metric, &warnings);
  for (const auto& w : warnings) err << "warning: " << w << "\n";
  std::string csv = csv_row({"retriever", "top_k", "anchor", "gamma", "pearson"});
  for (const auto& r : rows) {
    csv += csv_row({r.retriever, std::to_string(r.top_k), r.anchor, format_number(r.gamma), format_number(r.pearson)});
    if (r.retriever == "*")
      out << "top_k " << r.top_k << "  " << r.anchor << "  gamma " << format_number(r.gamma) << ": pearson "
          << format_fixed(r.pearson, 4) << "\n";
  }
  write_file(out_path(s, "sweep.csv"), csv);
}

void cmd_mi(const Settings& s, std::ostream& out) {
  const Inputs in = load_inputs(s);
  const Utility f = make_utility(in, s);
  const std::size_t m = f.size();
  const SubsetMask full = f.full_mask();
  std::vector<SubsetMask> masks{full};
  for (std::size_t i = 0; i < m; ++i) {
    const SubsetMask bit = SubsetMask{1} << i;
    masks.push_back(bit);
    masks.push_back(full & ~bit);
    for (std::size_t j = i + 1; j < m; ++j) masks.push_back(bit | (SubsetMask{1} << j));
  }
  f.precompute(masks);

  const MiEstimate all = f.estimate(full);
  json j;
  j["estimator"] = estimator_name(all.estimator);
  j["gamma"] = s.gamma;
  j["top_k"] = s.top_k;
  j["anchor"] = s.anchor;
  j["n_samples"] = all.n_samples;
  j["retrievers"] = f.names();
  j["full"] = {{"mi", all.value}, {"raw", all.raw}, {"degenerate", all.degenerate}};
  json singles = json::array();
  for (std::size_t i = 0; i < m; ++i) {
    const MiEstimate e = f.estimate(SubsetMask{1} << i);
    singles.push_back({{"retriever", f.names()[i]},
                       {"mi", e.value},
                       {"marginal_contribution", marginal_contribution(f, i)},
                       {"degenerate", e.degenerate}});
  }
  j["single"] = singles;
  json ii = json::array();
  for (std::size_t i = 0; i < m; ++i) {
    json row = json::array();
    for (std::size_t k = 0; k < m; ++k) row.push_back(i == k ? 0.0 : interaction_information(f, i, k));
    ii.push_back(row);
  }
  j["interaction_information"] = ii;
  write_file(out_path(s, "mi_report.json"), j.dump(2) + "\n");
  out << "I(Y; all " << m << " retrievers) = " << format_fixed(all.value, 4) << " nats ("
      << estimator_name(all.estimator) << ", " << all.n_samples << " rows)\n";
}

double ensemble_recall(const Inputs& in) {
  const RetrieverRun fused = fuse(in.runs, FusionSpec{}, in.anchor);
  return recall_at_k(fused, in.qa, 1).value;
}

void cmd_shapley(const Settings& s, std::ostream& out) {
  if (s.permutations < 0) throw UsageError("--permutations must be >= 0");
  const Inputs in = load_inputs(s);
  const Utility f = make_utility(in, s);
  ShapleyReport rep;
  if (s.permutations == 0 && f.size() <= kMaxExactShapley)
    rep = shapley_exact(f);
  else
    rep = shapley_sampled(f, s.permutations > 0 ? s.permutations : 1000, s.seed);
  const double recall = ensemble_recall(in);
  const auto shares = shapley_shares(rep, recall);

  const bool exact = rep.method == ShapleyReport::Method::Exact;
  json j;
  j["method"] = exact ? "exact" : "sampled";
  j["permutations"] = rep.permutations;
  j["seed"] = rep.seed;
  j["total_utility"] = rep.total_utility;
  j["ensemble_recall_at_1"] = recall;
  json rows = json::array();
  std::string csv = csv_row({"retriever", "phi", "std_error", "recall_share"});
  for (std::size_t i = 0; i < rep.names.size(); ++i) {
    rows.push_back({{"retriever", rep.names[i]},
                    {"phi", rep.phi[i]},
                    {"std_error", rep.std_error[i]},
                    {"recall_share", shares[i]}});
    csv += csv_row({rep.names[i], format_number(rep.phi[i]), format_number(rep.std_error[i]),
                    format_number(shares[i])});
    out << rep.names[i] << ": phi " << format_fixed(rep.phi[i], 4) << "  share " << format_fixed(shares[i], 4)
        << "\n";
  }
  j["retrievers"] = rows;
  write_file(out_path(s, "shapley.json"), j.dump(2) + "\n");
  write_file(out_path(s, "shapley.csv"), csv);
}

FusionSpec fusion_spec(const Settings& s) {
  FusionSpec spec;
  try {
    spec.method = parse_method(s.method);
  } catch (const Error& e) {
    throw UsageError(e.what());
  }
  spec.weights = s.weights;
  spec.rrf_k = s.rrf_k;
  if (s.lambda >= 0.0) spec.lambda = s.lambda;
  try {
    spec.validate();
  } catch (const Error& e) {
    throw UsageError(e.what());
  }
  return spec;
}

void cmd_fuse(const Settings& s, std::ostream& out) {
  const Inputs in = load_inputs(s);
  FusionSpec spec = fusion_spec(s);
  if (!spec.weights.empty() && spec.weights.size() != in.runs.size())
    throw UsageError("--weights needs one value per retriever (" + std::to_string(in.runs.size()) + ")");
  const SearchConfig sc = search_config(s, in.metric);
  const Split split = split_queries(in.qa, sc);
  const std::set<std::string> train(split.train.begin(), split.train.end());
  const std::set<std::string> test(split.test.begin(), split.test.end());
  if (spec.needs_fit()) spec = fit_fusion(in.runs, spec, in.targets, restrict_anchor(in.anchor, train), in.metric);
  const RetrieverRun fused = fuse(in.runs, spec, in.anchor);
  save_runs(out_path(s, "fused_run.jsonl"), {fused});
  write_file(out_path(s, "fuse_spec.json"), spec_json(spec).dump(2) + "\n");

  std::string csv = csv_row({"split", "recall_at_1", "mrr", "div"});
  std::set<std::string> all;
  for (const auto& p : in.qa) all.insert(p.query_id);
  for (const auto& [label, ids] : std::vector<std::pair<std::string, std::set<std::string>>>{
           {"train", train}, {"test", test}, {"all", all}}) {
    const auto qa = restrict_qa(in.qa, ids);
    const double r1 = recall_at_k(fused, qa, 1).value;
    const double rr = mrr(fused, qa).value;
    const double div = divergence_score(fused, in.targets, restrict_anchor(in.anchor, ids), in.metric);
    csv += csv_row({label, format_number(r1), format_number(rr), format_number(div)});
    out << fused.name << " " << label << ": recall@1 " << format_fixed(r1, 4) << "  mrr " << format_fixed(rr, 4)
        << "  div " << format_fixed(div, 4) << "\n";
  }
  write_file(out_path(s, "fuse_metrics.csv"), csv);
}

json result_json(const EnsembleResult& r) {
  json j{{"rank", r.rank}, {"subset", r.subset}, {"spec", spec_json(r.spec)}, {"train", metrics_json(r.train)}};
  j["test"] = r.test ? metrics_json(*r.test) : json(nullptr);
  return j;
}

void cmd_ensemble(const Settings& s, std::ostream& out) {
  const Inputs in = load_inputs(s);
  const SearchConfig sc = search_config(s, in.metric);
  const Split split = split_queries(in.qa, sc);
  const auto results = search(in.runs, in.targets, in.qa, sc);
  const EnsembleResult& best = results.front();
  json j;
  j["split"] = {{"train_fraction", sc.train_fraction},
                {"seed", sc.split_seed},
                {"n_train", split.train.size()},
                {"n_test", split.test.size()}};
  j["max_subset_size"] = sc.max_subset_size;
  j["best"] = result_json(best);
  json cands = json::array();
  for (const auto& r : results) cands.push_back(result_json(r));
  j["candidates"] = cands;
  write_file(out_path(s, "ensemble_report.json"), j.dump(2) + "\n");
  out << "best: " << subset_label(best.subset) << " via " << method_name(best.spec.method) << "  train recall@1 "
      << format_fixed(best.train.recall_at_1, 4) << "  test recall@1 " << format_fixed(best.test->recall_at_1, 4)
      << "  (" << results.size() << " candidates)\n";
}

std::string curve_svg(const std::vector<CurvePoint>& curve) {
  const double w = 640, h = 400, pad = 50;
  int lo = 0, hi = 0;
  for (const auto& c : curve) {
    lo = std::min(lo, c.step);
    hi = std::max(hi, c.step);
  }
  const double xs = hi > lo ? (w - 2 * pad) / (hi - lo) : 1.0;
  auto px = [&](int step) { return pad + (step - lo) * xs; };
  auto py = [&](double r) { return h - pad - r * (h - 2 * pad); };
  std::ostringstream svg;
  svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << w << "\" height=\"" << h << "\" viewBox=\"0 0 "
      << w << ' ' << h << "\">\n<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  svg << "<text x=\"" << w / 2 << "\" y=\"24\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"14\">"
      << "Recall@1 under drop (left) and add (right) perturbation</text>\n";
  svg << "<line x1=\"" << pad << "\" y1=\"" << h - pad << "\" x2=\"" << w - pad << "\" y2=\"" << h - pad
      << "\" stroke=\"black\"/>\n";
  for (const auto& [color, test] : std::vector<std::pair<std::string, bool>>{{"#1f77b4", true}, {"#aaaaaa", false}}) {
    svg << "<polyline fill=\"none\" stroke=\"" << color << "\" points=\"";
    for (std::size_t i = 0; i < curve.size(); ++i)
      svg << (i ? " " : "") << format_fixed(px(curve[i].step), 2) << ','
          << format_fixed(py(test ? curve[i].test_recall : curve[i].train_recall), 2);
    svg << "\"/>\n";
  }
  for (const auto& c : curve)
    svg << "<circle cx=\"" << format_fixed(px(c.step), 2) << "\" cy=\"" << format_fixed(py(c.test_recall), 2)
        << "\" r=\"3\" fill=\"#1f77b4\"><title>" << xml_escape(c.change + " " + subset_label(c.subset))
        << "</title></circle>\n";
  svg << "</svg>\n";
  return svg.str();
}

void cmd_perturb(const Settings& s, std::ostream& out) {
  const Inputs in = load_inputs(s);
  const SearchConfig sc = search_config(s, in.metric);
  const auto results = search(in.runs, in.targets, in.qa, sc);
  const EnsembleResult& best = results.front();
  const Utility f = make_utility(in, s);
  const auto mi_rows = perturb_mi(f, best.subset);
  const auto curve = perturb_recall(in.runs, in.targets, in.qa, best, sc);
  std::vector<SubsetMask> masks;
  for (const auto& c : curve) masks.push_back(f.mask_of(c.subset));
  f.precompute(masks);

  std::string csv = csv_row({"step", "change", "subset", "mi_nats", "train_recall_at_1", "test_recall_at_1"});
  for (const auto& c : curve)
    csv += csv_row({std::to_string(c.step), c.change, subset_label(c.subset), format_number(f(f.mask_of(c.subset))),
                    format_number(c.train_recall), format_number(c.test_recall)});
  write_file(out_path(s, "perturbation.csv"), csv);
  std::string mi_csv = csv_row({"change", "subset", "mi_nats"});
  for (const auto& r : mi_rows) mi_csv += csv_row({r.change, subset_label(r.subset), format_number(r.mi)});
  write_file(out_path(s, "perturbation_mi.csv"), mi_csv);
  write_file(out_path(s, "perturbation.svg"), curve_svg(curve));
  out << "best: " << subset_label(best.subset) << " via " << method_name(best.spec.method) << "; " << curve.size()
      << " curve points\n";
}

void cmd_spectrum(const Settings& s, std::ostream& out, std::ostream& err) {
  const Inputs in = load_inputs(s);
  const Utility f = make_utility(in, s);
  const SpectrumEmbedding sp = build_spectrum(f, s.threshold);
  for (const auto& w : sp.warnings) err << "warning: " << w << "\n";
  write_file(out_path(s, "spectrum.csv"), spectrum_csv(sp));
  write_file(out_path(s, "spectrum.svg"), spectrum_svg(sp));
  json j{{"names", sp.names},       {"distance", sp.distance}, {"interaction", sp.interaction},
         {"coords", sp.coords},     {"eigenvalues", sp.eigenvalues}, {"clusters", sp.clusters},
         {"threshold", s.threshold}, {"warnings", sp.warnings}};
  write_file(out_path(s, "spectrum.json"), j.dump(2) + "\n");
  const int n_clusters = sp.clusters.empty() ? 0 : *std::max_element(sp.clusters.begin(), sp.clusters.end()) + 1;
  out << sp.names.size() << " retrievers in " << n_clusters << " cluster(s) at threshold "
      << format_number(s.threshold) << "\n";
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  Settings s;
  CLI::App app{"Retriever evaluation and ensembling with information-theoretic metrics", "ragmi"};
  app.require_subcommand(1);
  if (!args.empty()) app.name(args.front());

  std::map<std::string, std::function<void()>> actions;
  CLI::Option* seed_opt = nullptr;

  {
    auto* sub = app.add_subcommand("synth", "Generate a synthetic bank with planted ground truth");
    add_common(sub, s);
    seed_opt = sub->get_option("--seed");
    sub->add_option("--spec", s.spec, "Named bank (default, shapley6, complementary, oracle) or a JSON spec file")
        ->capture_default_str();
    sub->add_option("--n-queries", s.n_queries, "Override the number of queries");
    actions["synth"] = [&] { cmd_synth(s, seed_opt->count() > 0, out); };
  }
  {
    auto* sub = app.add_subcommand("retrieve", "Run the reference BM25 / dense retrievers");
    add_common(sub, s);
    sub->add_option("--corpus", s.corpus, "Corpus (corpus.jsonl)");
    sub->add_option("--qa", s.qa, "QA pairs (qa.jsonl)");
    sub->add_option("--top-k", s.depth, "Chunks retrieved per query")->capture_default_str();
    sub->add_option("--method", s.retrieve_method, "bm25 | dense | all")->capture_default_str();
    sub->add_option("--query-embeddings", s.query_embeddings, "JSONL of {query_id, embedding} for dense");
    actions["retrieve"] = [&] { cmd_retrieve(s, out); };
  }
  {
    auto* sub = app.add_subcommand("score-cp", "Score CP* over each query's anchor list");
    add_common(sub, s);
    sub->add_option("--runs", s.runs, "Retriever runs defining the candidate chunks");
    sub->add_option("--qa", s.qa, "QA pairs (qa.jsonl)");
    sub->add_option("--corpus", s.corpus, "Corpus (corpus.jsonl)");
    sub->add_option("--retrievers", s.retrievers, "Restrict to these retrievers");
    sub->add_option("--top-k", s.top_k, "Anchor list depth")->capture_default_str();
    sub->add_option("--anchor", s.anchor, "Anchor policy: union | single:<name>")->capture_default_str();
    sub->add_flag("--mock", s.mock, "Use the offline deterministic scorer");
    sub->add_option("--endpoint", s.endpoint, "Completions endpoint URL");
    sub->add_option("--model", s.model, "Model id sent to the endpoint");
    sub->add_option("--cache", s.cache, "Score cache path (default: <out>/cp_cache.jsonl)");
    actions["score-cp"] = [&] { cmd_score_cp(s, out); };
  }
  {
    auto* sub = app.add_subcommand("benchmark", "Recall@1, MRR and divergence per retriever");
    add_common(sub, s);
    add_inputs(sub, s);
    sub->add_option("--dataset", s.dataset, "Dataset label for metrics.csv")->capture_default_str();
    actions["benchmark"] = [&] { cmd_benchmark(s, out, err); };
  }
  {
    auto* sub = app.add_subcommand("correlate", "Correlate recall@1 with negative divergence across retrievers");
    add_common(sub, s);
    add_inputs(sub, s);
    actions["correlate"] = [&] { cmd_correlate(s, out, err); };
  }
  {
    auto* sub = app.add_subcommand("sweep", "Correlation over a top-k x anchor x gamma grid");
    add_common(sub, s);
    add_inputs(sub, s);
    sub->add_option("--sweep-top-k", s.sweep_top_k, "Grid of anchor depths");
    sub->add_option("--sweep-anchor", s.sweep_anchor, "Grid of anchor policies");
    sub->add_option("--sweep-gamma", s.sweep_gamma, "Grid of reinforcement factors");
    actions["sweep"] = [&] { cmd_sweep(s, out, err); };
  }
  {
    auto* sub = app.add_subcommand("mi", "Mutual information, marginal contributions, interaction information");
    add_common(sub, s);
    add_inputs(sub, s);
    add_estimator(sub, s);
    actions["mi"] = [&] { cmd_mi(s, out); };
  }
  {
    auto* sub = app.add_subcommand("shapley", "Shapley attribution of the MI utility");
    add_common(sub, s);
    add_inputs(sub, s);
    add_estimator(sub, s);
    sub->add_option("--permutations", s.permutations, "Sampled permutations (0 = exact when feasible)")
        ->capture_default_str();
    actions["shapley"] = [&] { cmd_shapley(s, out); };
  }
  {
    auto* sub = app.add_subcommand("fuse", "Fuse retrievers with one method");
    add_common(sub, s);
    add_inputs(sub, s);
    sub->add_option("--method", s.method, "Fusion method")->capture_default_str();
    sub->add_option("--weights", s.weights, "Fixed weights, one per retriever");
    sub->add_option("--lambda", s.lambda, "divergence_weighted: exp(-lambda Div) weights");
    sub->add_option("--rrf-k", s.rrf_k, "Reciprocal rank fusion constant")->capture_default_str();
    sub->add_option("--train-fraction", s.train_fraction, "Share of queries used to fit learnable parameters")
        ->capture_default_str();
    actions["fuse"] = [&] { cmd_fuse(s, out); };
  }
  {
    auto* sub = app.add_subcommand("ensemble", "Search retriever subsets and fusion methods");
    add_common(sub, s);
    add_inputs(sub, s);
    add_search(sub, s);
    actions["ensemble"] = [&] { cmd_ensemble(s, out); };
  }
  {
    auto* sub = app.add_subcommand("perturb", "MI and recall under add/drop perturbation of the best ensemble");
    add_common(sub, s);
    add_inputs(sub, s);
    add_estimator(sub, s);
    add_search(sub, s);
    actions["perturb"] = [&] { cmd_perturb(s, out); };
  }
  {
    auto* sub = app.add_subcommand("spectrum", "Redundancy spectrum: interaction distances, MDS, clusters");
    add_common(sub, s);
    add_inputs(sub, s);
    add_estimator(sub, s);
    sub->add_option("--threshold", s.threshold, "Single-linkage distance threshold")->capture_default_str();
    actions["spectrum"] = [&] { cmd_spectrum(s, out, err); };
  }

  try {
    std::vector<std::string> rest(args.size() > 1 ? args.begin() + 1 : args.end(), args.end());
    std::reverse(rest.begin(), rest.end());
    app.parse(rest);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitUsage;
  }

  CLI::App* sub = app.get_subcommands().front();
  s.command = sub->get_name();
  try {
    if (!s.config.empty()) merge_config(sub, s.config);
    set_thread_count(s.threads);
    std::error_code ec;
    fs::create_directories(s.out, ec);
    if (ec) throw Error("cannot create output directory '" + s.out + "': " + ec.message());
    actions.at(s.command)();
  } catch (const UsageError& e) {
    err << "error: " << e.what() << "\nRun with --help for usage.\n";
    return kExitUsage;
  } catch (const ConfigError& e) {
    err << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitFailure;
  }
  return kExitOk;
}

}  // namespace ragmi::cli
