// Copyright 2026 The topkit Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "topkit/cli.h"

#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <ostream>
#include <set>
#include <sstream>

#include "CLI11.hpp"
#include "topkit/augment.h"
#include "topkit/dataset.h"
#include "topkit/error.h"
#include "topkit/metrics.h"
#include "topkit/oracle.h"
#include "topkit/retrieval.h"

#ifndef TOPKIT_VERSION
#define TOPKIT_VERSION "0.0.0"
#endif

namespace topkit::cli {

namespace {

namespace fs = std::filesystem;

[[noreturn]] void usage_error(const std::string& message) {
  throw Error(ErrorCode::kInvalidArgument, message);
}

template <typename T>
T config_value(const nlohmann::json& j, const std::string& key) {
  try {
    return j.get<T>();
  } catch (const nlohmann::json::exception&) {
    usage_error("config key '" + key + "' has the wrong type");
  }
}

std::size_t config_count(const nlohmann::json& j, const std::string& key) {
  if (!j.is_number_unsigned()) usage_error("config key '" + key + "' must be a non-negative integer");
  return j.get<std::size_t>();
}

std::vector<std::string> read_lines(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kIo, "cannot open '" + path + "'");
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    lines.push_back(std::move(line));
  }
  return lines;
}

bool is_jsonl(const std::string& path) { return fs::path(path).extension() == ".jsonl"; }

// One entry per line of a text file, or the `field` of each record of a
// JSONL file. Trailing blank lines are dropped.
std::vector<std::string> read_column(const std::string& path, const std::string& field) {
  std::vector<std::string> lines = read_lines(path);
  while (!lines.empty() && canonicalize(lines.back()).empty()) lines.pop_back();
  if (!is_jsonl(path)) return lines;
  std::vector<std::string> out;
  out.reserve(lines.size());
  for (std::size_t i = 0; i < lines.size(); ++i) {
    try {
      const auto record = nlohmann::json::parse(lines[i]);
      out.push_back(record.at(field).get<std::string>());
    } catch (const nlohmann::json::exception& e) {
      throw Error(ErrorCode::kMalformedRecord, e.what(), i + 1);
    }
  }
  return out;
}

// Writes `data` to --out atomically, or to `out` when no path was given.
void emit(const std::string& path, const std::string& data, std::ostream& out) {
  if (path.empty() || path == "-")
    out << data;
  else
    write_file_atomic(path, data);
}

std::string json_line(const nlohmann::ordered_json& j) { return j.dump() + "\n"; }

std::unique_ptr<TokenProposer> make_proposer(const std::string& spec,
                                             const PipelineConfig& cfg) {
  if (spec.empty()) usage_error("--proposer is required");
  const auto colon = spec.find(':');
  const std::string kind = spec.substr(0, colon);
  const std::string arg = colon == std::string::npos ? "" : spec.substr(colon + 1);
  if (kind == "lexicon") {
    if (arg.empty()) usage_error("lexicon proposer needs a path: lexicon:PATH");
    return std::make_unique<LexiconProposer>(LexiconProposer::from_file(arg));
  }
  if (kind == "remote") {
    return std::make_unique<RemoteClient>(RemoteOptions{
        arg.empty() ? cfg.bridge_url : arg, cfg.timeout_s, cfg.max_in_flight, cfg.retries});
  }
  usage_error("unknown proposer '" + spec + "' (lexicon:PATH or remote[:URL])");
}

std::unique_ptr<ParserOracle> make_oracle(const std::string& spec, const PipelineConfig& cfg,
                                          const Manifest& input) {
  if (spec.empty()) usage_error("--oracle is required");
  const auto colon = spec.find(':');
  const std::string kind = spec.substr(0, colon);
  const std::string arg = colon == std::string::npos ? "" : spec.substr(colon + 1);
  if (kind == "memorizing") {
    auto oracle = std::make_unique<MemorizingOracle>();
    if (arg.empty()) {
      oracle->add(input);
      return oracle;
    }
    std::stringstream paths(arg);
    std::string path;
    TsvOptions tsv;
    tsv.strict = true;
    while (std::getline(paths, path, ',')) {
      const auto ext = fs::path(path).extension();
      if (ext == ".jsonl" || ext == ".tsv")
        oracle->add(load_manifest(path, tsv));
      else
        oracle->add_pairs_file(path);
    }
    return oracle;
  }
  if (kind == "remote") {
    return std::make_unique<RemoteClient>(RemoteOptions{
        arg.empty() ? cfg.bridge_url : arg, cfg.timeout_s, cfg.max_in_flight, cfg.retries});
  }
  usage_error("unknown oracle '" + spec + "' (memorizing[:PATH,...] or remote[:URL])");
}

std::set<Domain> parse_domains(const std::vector<std::string>& names) {
  std::set<Domain> out;
  for (const std::string& n : names) out.insert(parse_domain(n));
  return out;
}

nlohmann::ordered_json manifest_stats(const Manifest& m) {
  std::map<std::string, std::size_t> domains, splits, intents, slots;
  std::size_t tokens = 0, leaves = 0;
  for (const Sample& s : m.samples) {
    ++domains[std::string(domain_name(s.domain))];
    ++splits[std::string(split_name(s.split))];
    ++intents[s.parse.root().text];
    tokens += s.utterance.size();
    leaves += s.parse.leaf_count();
    std::vector<const ParseNode*> stack = {&s.parse.root()};
    while (!stack.empty()) {
      const ParseNode* node = stack.back();
      stack.pop_back();
      if (node->kind == NodeKind::kSlot) ++slots[node->text];
      for (const ParseNode& c : node->children) stack.push_back(&c);
    }
  }
  const double n = m.empty() ? 1.0 : static_cast<double>(m.size());
  nlohmann::ordered_json j;
  j["samples"] = m.size();
  j["domains"] = domains;
  j["splits"] = splits;
  j["intents"] = intents;
  j["slots"] = slots;
  j["mean_tokens"] = static_cast<double>(tokens) / n;
  j["mean_leaves"] = static_cast<double>(leaves) / n;
  return j;
}

int exit_code_for(const Error& e) {
  if (is_remote_failure(e.code())) return kExitRemote;
  if (e.code() == ErrorCode::kInvalidArgument) return kExitUsage;
  return kExitDataError;
}

// Finds "--config PATH" / "--config=PATH" anywhere on the command line.
std::string find_config_path(const std::vector<std::string>& args) {
  for (std::size_t i = 1; i < args.size(); ++i) {
    if (args[i] == "--config" && i + 1 < args.size()) return args[i + 1];
    if (args[i].rfind("--config=", 0) == 0) return args[i].substr(9);
  }
  return {};
}

}  // namespace

PipelineConfig config_from_json(const nlohmann::json& j, PipelineConfig base) {
  if (!j.is_object()) usage_error("config must be a JSON object");
  PipelineConfig c = std::move(base);
  for (const auto& [key, value] : j.items()) {
    if (key == "seed") {
      if (!value.is_number_integer()) usage_error("config key 'seed' must be an integer");
      c.seed = value.is_number_unsigned() ? value.get<std::uint64_t>()
                                          : static_cast<std::uint64_t>(value.get<std::int64_t>());
    } else if (key == "factor") {
      c.factor = config_count(value, key);
    } else if (key == "upsample_factor") {
      c.upsample_factor = config_count(value, key);
    } else if (key == "k") {
      c.k = config_count(value, key);
    } else if (key == "p_geom") {
      c.p_geom = config_value<double>(value, key);
    } else if (key == "separator") {
      c.separator = config_value<std::string>(value, key);
    } else if (key == "proposer") {
      c.proposer = config_value<std::string>(value, key);
    } else if (key == "oracle") {
      c.oracle = config_value<std::string>(value, key);
    } else if (key == "bridge_url") {
      c.bridge_url = config_value<std::string>(value, key);
    } else if (key == "max_in_flight") {
      c.max_in_flight = config_count(value, key);
    } else if (key == "timeout_s") {
      c.timeout_s = config_value<double>(value, key);
    } else if (key == "retries") {
      c.retries = config_count(value, key);
    } else if (key == "strict") {
      c.strict = config_value<bool>(value, key);
    } else if (key == "jobs") {
      c.jobs = config_count(value, key);
    } else if (key == "proposals_per_mask") {
      c.proposals_per_mask = config_count(value, key);
    } else if (key == "resample_epochs") {
      c.resample_epochs = config_count(value, key);
    } else {
      usage_error("unknown config key '" + key + "'");
    }
  }
  validate_config(c);
  return c;
}

void validate_config(const PipelineConfig& c) {
  if (c.factor < 1) usage_error("factor must be >= 1");
  if (c.upsample_factor < 1) usage_error("upsample factor must be >= 1");
  if (c.k < 1) usage_error("k must be >= 1");
  if (!(c.p_geom > 0.0 && c.p_geom < 1.0)) usage_error("p_geom must lie in (0, 1)");
  if (c.separator.empty()) usage_error("separator must not be empty");
  if (c.max_in_flight < 1 || c.max_in_flight > 4096)
    usage_error("max_in_flight must lie in [1, 4096]");
  if (!(c.timeout_s > 0.0)) usage_error("timeout_s must be positive");
  if (c.jobs < 1 || c.jobs > 1024) usage_error("jobs must lie in [1, 1024]");
  if (c.proposals_per_mask < 1) usage_error("proposals_per_mask must be >= 1");
  if (c.resample_epochs < 1) usage_error("resample_epochs must be >= 1");
}

std::string version_string() {
  return std::string("topkit ") + TOPKIT_VERSION + " (index format " +
         std::to_string(kIndexFormatVersion) + ")";
}

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  auto log = [&err](const std::string& msg) { err << "topkit: " << msg << "\n"; };

  PipelineConfig cfg;
  try {
    if (const std::string path = find_config_path(args); !path.empty()) {
      std::ifstream in(path);
      if (!in) usage_error("cannot open config '" + path + "'");
      nlohmann::json j;
      try {
        j = nlohmann::json::parse(in);
      } catch (const nlohmann::json::parse_error& e) {
        usage_error("config '" + path + "' is not JSON: " + e.what());
      }
      cfg = config_from_json(j);
    }
  } catch (const Error& e) {
    log(e.what());
    return exit_code_for(e);
  }

  CLI::App app{"Toolkit for TOP-format semantic parsing data: validation, metrics, "
               "upsampling, masked-LM augmentation and retrieval prompts."};
  app.set_version_flag("--version", version_string());
  app.require_subcommand(1);
  std::string config_path;
  app.add_option("--config", config_path, "JSON config; explicit flags override it");
  app.add_option("--jobs,-j", cfg.jobs, "worker threads")->capture_default_str();

  std::string out_path;
  bool lenient = false;
  TsvOptions tsv;
  auto add_ingest = [&](CLI::App* sub) {
    sub->add_flag("--lenient", lenient, "skip malformed rows instead of aborting");
    sub->add_option("--utterance-column", tsv.utterance_column)->capture_default_str();
    sub->add_option("--parse-column", tsv.parse_column)->capture_default_str();
    sub->add_option("--domain-column", tsv.domain_column)->capture_default_str();
  };

  // validate
  std::string manifest_path;
  CLI::App* validate = app.add_subcommand("validate", "check a manifest (TSV or JSONL)");
  validate->add_option("manifest", manifest_path)->required();
  add_ingest(validate);

  // stats
  CLI::App* stats = app.add_subcommand("stats", "summarize a manifest");
  stats->add_option("manifest", manifest_path)->required();
  add_ingest(stats);

  // eval em | wer
  std::string hyp_path, ref_path;
  CLI::App* eval = app.add_subcommand("eval", "score hypotheses against references");
  eval->require_subcommand(1);
  CLI::App* eval_em = eval->add_subcommand("em", "exact-match accuracy of parses");
  CLI::App* eval_wer = eval->add_subcommand("wer", "word error rate of transcripts");
  for (CLI::App* sub : {eval_em, eval_wer}) {
    sub->add_option("--hyp", hyp_path, "one entry per line, or .jsonl")->required();
    sub->add_option("--ref", ref_path, "one entry per line, or .jsonl")->required();
    sub->add_option("--out,-o", out_path);
  }

  // mix
  std::string held_in_path, low_path;
  std::vector<std::string> domains;
  CLI::App* mix = app.add_subcommand("mix", "held-in data plus upsampled low-resource data");
  mix->add_option("--held-in", held_in_path, "held-in manifest (optional)");
  mix->add_option("--low", low_path, "low-resource manifest")->required();
  mix->add_option("--factor", cfg.upsample_factor)->capture_default_str();
  mix->add_option("--seed", cfg.seed)->capture_default_str();
  mix->add_option("--domains", domains, "keep only these low-resource domains")->delimiter(',');
  mix->add_option("--out,-o", out_path);
  add_ingest(mix);

  // augment
  std::string report_path, candidates_path;
  CLI::App* augment = app.add_subcommand("augment", "masked-LM augmentation with oracle filtering");
  augment->add_option("--manifest", manifest_path)->required();
  augment->add_option("--factor", cfg.factor, "mask plans per sample")->capture_default_str();
  augment->add_option("--proposer", cfg.proposer, "lexicon:PATH | remote[:URL]");
  augment->add_option("--oracle", cfg.oracle, "memorizing[:PATH,...] | remote[:URL]");
  augment->add_option("--seed", cfg.seed)->capture_default_str();
  augment->add_option("--proposals-per-mask", cfg.proposals_per_mask)->capture_default_str();
  augment->add_option("--bridge-url", cfg.bridge_url)->capture_default_str();
  augment->add_option("--max-in-flight", cfg.max_in_flight)->capture_default_str();
  augment->add_option("--timeout", cfg.timeout_s, "seconds per request")->capture_default_str();
  augment->add_option("--retries", cfg.retries)->capture_default_str();
  augment->add_option("--report", report_path, "write the AugReport JSON here");
  augment->add_option("--candidates", candidates_path, "write every candidate with its verdict");
  augment->add_option("--out,-o", out_path);
  add_ingest(augment);

  // index build | query
  std::string index_path, query_text;
  std::vector<std::string> exclude_ids;
  CLI::App* index = app.add_subcommand("index", "TF-IDF index over training utterances");
  index->require_subcommand(1);
  CLI::App* index_build = index->add_subcommand("build", "index a manifest");
  index_build->add_option("--manifest", manifest_path)->required();
  index_build->add_option("--out,-o", out_path)->required();
  add_ingest(index_build);
  CLI::App* index_query = index->add_subcommand("query", "retrieve similar utterances");
  index_query->add_option("--index", index_path)->required();
  index_query->add_option("--text", query_text)->required();
  index_query->add_option("--k", cfg.k)->capture_default_str();
  index_query->add_option("--exclude", exclude_ids, "sample ids to leave out");
  index_query->add_option("--out,-o", out_path);

  // prompt render
  std::string queries_path, mode = "topk";
  bool include_self = false;
  CLI::App* prompt = app.add_subcommand("prompt", "retrieval-augmented inputs");
  prompt->require_subcommand(1);
  CLI::App* render = prompt->add_subcommand("render", "render x ; x1 ; y1 ; ... prompts");
  render->add_option("--manifest", manifest_path, "exemplar pool (training data)")->required();
  render->add_option("--index", index_path, "prebuilt index of the pool");
  render->add_option("--queries", queries_path, "inputs to augment (default: the pool)");
  render->add_option("--mode", mode)->check(CLI::IsMember({"sample", "topk"}))->capture_default_str();
  render->add_option("--k", cfg.k)->capture_default_str();
  render->add_option("--p-geom", cfg.p_geom)->capture_default_str();
  render->add_option("--seed", cfg.seed)->capture_default_str();
  render->add_option("--separator", cfg.separator)->capture_default_str();
  render->add_option("--resample-epochs", cfg.resample_epochs)->capture_default_str();
  render->add_flag("--include-self", include_self, "allow a query's own id among its exemplars");
  render->add_option("--out,-o", out_path);
  add_ingest(render);

  std::vector<const char*> argv;
  argv.reserve(args.size());
  for (const std::string& a : args) argv.push_back(a.c_str());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    validate_config(cfg);
    tsv.strict = cfg.strict && !lenient;
    const std::size_t jobs = cfg.jobs;

    if (validate->parsed()) {
      std::vector<RowIssue> issues;
      const Manifest m = load_manifest(manifest_path, tsv, &issues);
      nlohmann::ordered_json j;
      j["path"] = manifest_path;
      j["samples"] = m.size();
      nlohmann::ordered_json skipped = nlohmann::ordered_json::array();
      for (const RowIssue& issue : issues) {
        skipped.push_back({{"row", issue.row}, {"message", issue.message}});
        log(manifest_path + ": row " + std::to_string(issue.row) + ": " + issue.message);
      }
      j["skipped"] = std::move(skipped);
      out << json_line(j);
      return issues.empty() ? kExitOk : kExitDataError;
    }

    if (stats->parsed()) {
      const Manifest m = load_manifest(manifest_path, tsv);
      out << json_line(manifest_stats(m));
      return kExitOk;
    }

    if (eval_em->parsed()) {
      const auto hyps = read_column(hyp_path, "parse");
      const auto refs = read_column(ref_path, "parse");
      if (hyps.size() != refs.size())
        throw Error(ErrorCode::kMalformedRecord,
                    std::to_string(hyps.size()) + " hypotheses vs " +
                        std::to_string(refs.size()) + " references");
      std::vector<std::pair<std::string, std::string>> pairs;
      for (std::size_t i = 0; i < hyps.size(); ++i) pairs.emplace_back(hyps[i], refs[i]);
      emit(out_path, json_line(to_json(corpus_em(pairs, jobs))), out);
      return kExitOk;
    }

    if (eval_wer->parsed()) {
      const auto hyps = read_column(hyp_path, "utterance");
      const auto refs = read_column(ref_path, "utterance");
      if (hyps.size() != refs.size())
        throw Error(ErrorCode::kMalformedRecord,
                    std::to_string(hyps.size()) + " hypotheses vs " +
                        std::to_string(refs.size()) + " references");
      std::vector<std::pair<Utterance, Utterance>> pairs;
      for (std::size_t i = 0; i < hyps.size(); ++i) {
        pairs.emplace_back(tokenize(hyps[i]), tokenize(refs[i]));
        if (pairs.back().second.empty())
          throw Error(ErrorCode::kEmptyReference, "empty reference", i + 1);
      }
      emit(out_path, json_line(to_json(corpus_wer(pairs))), out);
      return kExitOk;
    }

    if (mix->parsed()) {
      Manifest held_in;
      if (!held_in_path.empty()) held_in = load_manifest(held_in_path, tsv);
      Manifest low = load_manifest(low_path, tsv);
      if (!domains.empty()) low = filter_domain(low, parse_domains(domains));
      const Manifest mixed = upsample_mix(held_in, low, cfg.upsample_factor, cfg.seed);
      log("mixed " + std::to_string(held_in.size()) + " held-in + " +
          std::to_string(low.size()) + " x " + std::to_string(cfg.upsample_factor) +
          " low-resource = " + std::to_string(mixed.size()) + " samples");
      emit(out_path, to_jsonl(mixed), out);
      return kExitOk;
    }

    if (augment->parsed()) {
      const Manifest m = load_manifest(manifest_path, tsv);
      const auto proposer = make_proposer(cfg.proposer, cfg);
      const auto oracle = make_oracle(cfg.oracle, cfg, m);
      log("augmenting " + std::to_string(m.size()) + " samples with " +
          proposer->describe() + ", filtering with " + oracle->describe());
      AugmentOptions opts;
      opts.factor = cfg.factor;
      opts.seed = cfg.seed;
      opts.proposals_per_mask = cfg.proposals_per_mask;
      opts.jobs = jobs;
      const AugmentResult result = augment_manifest(m, *proposer, *oracle, opts);
      const std::string report = json_line(result.report.to_json());
      if (!candidates_path.empty()) {
        std::string lines;
        for (const AugmentedSample& c : result.candidates) lines += json_line(candidate_to_json(c));
        write_file_atomic(candidates_path, lines);
      }
      if (!report_path.empty()) write_file_atomic(report_path, report);
      emit(out_path, to_jsonl(result.kept), out);
      if (out_path.empty() || out_path == "-")
        err << report;
      else
        out << report;
      return kExitOk;
    }

    if (index_build->parsed()) {
      const Manifest m = load_manifest(manifest_path, tsv);
      const TfidfIndex idx = TfidfIndex::build(m, jobs);
      idx.save(out_path);
      log("indexed " + std::to_string(idx.num_docs()) + " documents, " +
          std::to_string(idx.vocabulary_size()) + " terms");
      return kExitOk;
    }

    if (index_query->parsed()) {
      const TfidfIndex idx = TfidfIndex::load(index_path);
      const std::unordered_set<std::string> exclude(exclude_ids.begin(), exclude_ids.end());
      std::string lines;
      for (const RetrievalHit& hit : idx.query(tokenize(query_text), cfg.k, exclude)) {
        nlohmann::ordered_json j;
        j["sample_id"] = hit.sample_id;
        j["rank"] = hit.rank;
        j["score"] = hit.score;
        lines += json_line(j);
      }
      emit(out_path, lines, out);
      return kExitOk;
    }

    if (render->parsed()) {
      const Manifest pool = load_manifest(manifest_path, tsv);
      const TfidfIndex idx =
          index_path.empty() ? TfidfIndex::build(pool, jobs) : TfidfIndex::load(index_path);
      const Manifest queries = queries_path.empty() ? pool : load_manifest(queries_path, tsv);
      PromptOptions opts;
      opts.mode = mode == "sample" ? PromptMode::kSample : PromptMode::kTopK;
      opts.k = cfg.k;
      opts.p_geom = cfg.p_geom;
      opts.seed = cfg.seed;
      opts.separator = cfg.separator;
      opts.exclude_self = !include_self;
      opts.epochs = cfg.resample_epochs;
      opts.jobs = jobs;
      std::string lines;
      for (const ExemplarPrompt& p : build_prompts(idx, pool, queries, opts))
        lines += json_line(prompt_to_json(p));
      emit(out_path, lines, out);
      return kExitOk;
    }
  } catch (const Error& e) {
    log(e.what());
    return exit_code_for(e);
  } catch (const std::exception& e) {
    log(e.what());
    return kExitDataError;
  }
  return kExitUsage;
}

}  // namespace topkit::cli
