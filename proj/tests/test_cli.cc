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


#include <filesystem>
#include <sstream>
#include <string>
#include <vector>

#include "doctest.h"
#include "test_util.h"
#include "topkit/cli.h"

using namespace topkit;
using namespace topkit::testing;

namespace {

struct Run {
  int code;
  std::string out;
  std::string err;
};

Run run(std::vector<std::string> args) {
  args.insert(args.begin(), "topkit");
  std::ostringstream out, err;
  const int code = cli::run(args, out, err);
  return {code, out.str(), err.str()};
}

std::vector<std::string> lines_of(const std::string& text) {
  std::vector<std::string> out;
  std::istringstream in(text);
  for (std::string line; std::getline(in, line);) out.push_back(line);
  return out;
}

}  // namespace

TEST_SUITE("cli") {

TEST_CASE("version, help and usage errors") {
  const Run v = run({"--version"});
  CHECK(v.code == 0);
  CHECK(v.out.find("index format 1") != std::string::npos);
  CHECK(run({"--help"}).code == 0);
  CHECK(run({}).code == cli::kExitUsage);
  CHECK(run({"frobnicate"}).code == cli::kExitUsage);
  CHECK(run({"eval", "em", "--hyp", "x"}).code == cli::kExitUsage);
  CHECK(run({"--jobs", "0", "stats", "x.jsonl"}).code == cli::kExitUsage);
}

TEST_CASE("config files") {
  TempDir dir;
  const std::string bad = dir.write("bad.json", R"({"seed": 1, "colour": "red"})");
  const Run r = run({"--config", bad, "stats", "x.jsonl"});
  CHECK(r.code == cli::kExitUsage);
  CHECK(r.err.find("colour") != std::string::npos);
  CHECK(run({"--config", dir.write("t.json", R"({"k": "four"})"), "stats", "x"}).code ==
        cli::kExitUsage);
  CHECK(run({"--config", dir.write("p.json", R"({"p_geom": 1.5})"), "stats", "x"}).code ==
        cli::kExitUsage);

  const cli::PipelineConfig c =
      cli::config_from_json(nlohmann::json::parse(R"({"seed": 5, "k": 2, "strict": false})"));
  CHECK(c.seed == 5);
  CHECK(c.k == 2);
  CHECK_FALSE(c.strict);
  CHECK(c.upsample_factor == 20);

  // Flags override the config.
  save_jsonl(random_manifest(30, 3), dir.file("m.jsonl"));
  const std::string cfg = dir.write("c.json", R"({"upsample_factor": 2, "seed": 4})");
  const Run from_cfg = run({"--config", cfg, "mix", "--low", dir.file("m.jsonl")});
  CHECK(from_cfg.code == 0);
  CHECK(lines_of(from_cfg.out).size() == 60);
  const Run flag = run({"--config", cfg, "mix", "--low", dir.file("m.jsonl"), "--factor", "3"});
  CHECK(lines_of(flag.out).size() == 90);
}

TEST_CASE("validate and stats") {
  TempDir dir;
  const std::string good = dir.write(
      "g.tsv", "utterance\tsemantic_parse\tdomain\n"
               "how ' s the weather in sydney\t[in:get_weather [sl:location sydney ] ]\tweather\n");
  CHECK(run({"validate", good}).code == 0);
  const std::string bad = dir.write(
      "b.tsv", "utterance\tsemantic_parse\tdomain\n"
               "x\t[in:a x ]\tweather\n"
               "y\t[in:a y\tweather\n");
  const Run strict = run({"validate", bad});
  CHECK(strict.code == cli::kExitDataError);
  CHECK(strict.err.find("row 2") != std::string::npos);
  const Run lenient = run({"validate", bad, "--lenient"});
  CHECK(lenient.code == cli::kExitDataError);
  CHECK(lenient.out.find("\"samples\":1") != std::string::npos);

  const Run stats = run({"stats", good});
  CHECK(stats.code == 0);
  const auto j = nlohmann::json::parse(stats.out);
  CHECK(j["samples"] == 1);
  CHECK(j["slots"]["location"] == 1);
  CHECK(j["mean_tokens"] == 7.0);
  CHECK(run({"stats", dir.file("missing.jsonl")}).code == cli::kExitDataError);
}

TEST_CASE("eval em and wer") {
  TempDir dir;
  const std::string ref = dir.write("ref.txt", "[in:a x ]\n[in:b [sl:c y ] ]\n[in:d ]\n");
  const std::string hyp = dir.write("hyp.txt", "[IN:A x ]\n[in:b [sl:c z ] ]\n[in:d ]\n");
  const Run em = run({"eval", "em", "--hyp", hyp, "--ref", ref});
  CHECK(em.code == 0);
  CHECK(em.out == "{\"n_total\":3,\"n_exact\":2,\"accuracy\":0.6666666666666666}\n");

  const std::string short_hyp = dir.write("short.txt", "[in:a x ]\n");
  CHECK(run({"eval", "em", "--hyp", short_hyp, "--ref", ref}).code == cli::kExitDataError);

  const std::string wref = dir.write("wref.txt", "how ' s the weather in sydney\n");
  const std::string whyp = dir.write("whyp.txt", "how ' s the weather in london\n");
  const Run w = run({"eval", "wer", "--hyp", whyp, "--ref", wref, "--out", dir.file("w.json")});
  CHECK(w.code == 0);
  const auto j = nlohmann::json::parse(read_file(dir.file("w.json")));
  CHECK(j["sub"] == 1);
  CHECK(j["wer"].get<double>() == doctest::Approx(1.0 / 7.0));

  save_jsonl(toy_manifest(), dir.file("toy.jsonl"));
  const Run self = run({"eval", "em", "--hyp", dir.file("toy.jsonl"), "--ref", dir.file("toy.jsonl")});
  CHECK(self.out.find("\"accuracy\":1.0") != std::string::npos);
}

TEST_CASE("mix") {
  TempDir dir;
  save_jsonl(random_manifest(7, 1, Domain::kAlarm, "h"), dir.file("held.jsonl"));
  save_jsonl(random_manifest(5, 2, Domain::kWeather, "l"), dir.file("low.jsonl"));
  const Run r = run({"mix", "--held-in", dir.file("held.jsonl"), "--low", dir.file("low.jsonl"),
                     "--seed", "3", "--out", dir.file("mix.jsonl")});
  CHECK(r.code == 0);
  CHECK(r.out.empty());
  CHECK(load_jsonl(dir.file("mix.jsonl")).size() == 7 + 100);
  const Run filtered = run({"mix", "--low", dir.file("low.jsonl"), "--domains", "reminder"});
  CHECK(filtered.code == 0);
  CHECK(filtered.out.empty());
  CHECK(run({"mix", "--low", dir.file("low.jsonl"), "--domains", "cooking"}).code ==
        cli::kExitDataError);
}

TEST_CASE("augment with local proposer and oracle") {
  TempDir dir;
  save_jsonl(toy_manifest(), dir.file("toy.jsonl"));
  const std::string lex = dir.write("lex.json", R"({"_": ["zzz"], "today": ["tonight"]})");
  const Run r = run({"augment", "--manifest", dir.file("toy.jsonl"), "--proposer",
                     "lexicon:" + lex, "--oracle", "memorizing", "--factor", "2", "--seed", "1",
                     "--out", dir.file("aug.jsonl"), "--candidates", dir.file("cand.jsonl"),
                     "--report", dir.file("report.json")});
  CHECK(r.code == 0);
  const auto report = nlohmann::json::parse(r.out);
  CHECK(report["candidates"] == 40);
  CHECK(report["kept"] == 0);
  CHECK(read_file(dir.file("report.json")) == r.out);
  CHECK(lines_of(read_file(dir.file("cand.jsonl"))).size() == 40);

  // Feed the candidates back as memorized pairs: everything non-duplicate survives.
  std::string pairs;
  for (const auto& line : lines_of(read_file(dir.file("cand.jsonl")))) {
    const auto c = nlohmann::json::parse(line);
    pairs += c["utterance"].get<std::string>() + "\t" + c["parse"].get<std::string>() + "\n";
  }
  const std::string pairs_path = dir.write("pairs.txt", pairs);
  const Run again = run({"augment", "--manifest", dir.file("toy.jsonl"), "--proposer",
                         "lexicon:" + lex, "--oracle",
                         "memorizing:" + dir.file("toy.jsonl") + "," + pairs_path, "--factor",
                         "2", "--seed", "1"});
  CHECK(again.code == 0);
  const auto report2 = nlohmann::json::parse(lines_of(again.err).back());
  CHECK(report2["kept"].get<int>() + report2["dropped_duplicate"].get<int>() == 40);
  CHECK(lines_of(again.out).size() == report2["kept"].get<std::size_t>());

  CHECK(run({"augment", "--manifest", dir.file("toy.jsonl"), "--oracle", "memorizing"}).code ==
        cli::kExitUsage);
  CHECK(run({"augment", "--manifest", dir.file("toy.jsonl"), "--proposer", "magic",
             "--oracle", "memorizing"}).code == cli::kExitUsage);
}

TEST_CASE("augment with an unreachable bridge leaves no output") {
  TempDir dir;
  save_jsonl(toy_manifest(), dir.file("toy.jsonl"));
  const Run r = run({"augment", "--manifest", dir.file("toy.jsonl"), "--proposer",
                     "remote:http://127.0.0.1:1", "--oracle", "memorizing", "--timeout", "1",
                     "--retries", "0", "--out", dir.file("aug.jsonl")});
  CHECK(r.code == cli::kExitRemote);
  CHECK_FALSE(std::filesystem::exists(dir.file("aug.jsonl")));
  CHECK(r.err.find("ProposerUnavailable") != std::string::npos);
}

TEST_CASE("index build, query and prompt render") {
  TempDir dir;
  save_jsonl(random_manifest(10, 6), dir.file("m.jsonl"));
  CHECK(run({"index", "build", "--manifest", dir.file("m.jsonl"), "--out", dir.file("i.json")})
            .code == 0);
  const Run q = run({"index", "query", "--index", dir.file("i.json"), "--text", "rain today",
                     "--k", "3", "--exclude", "s000"});
  CHECK(q.code == 0);
  const auto hits = lines_of(q.out);
  CHECK(hits.size() == 3);
  CHECK(q.out.find("s000") == std::string::npos);
  CHECK(run({"index", "query", "--index", dir.file("m.jsonl"), "--text", "x"}).code ==
        cli::kExitDataError);

  for (const char* mode : {"topk", "sample"}) {
    const Run p = run({"prompt", "render", "--manifest", dir.file("m.jsonl"), "--index",
                       dir.file("i.json"), "--mode", mode, "--k", "4"});
    CHECK(p.code == 0);
    const auto prompts = lines_of(p.out);
    CHECK(prompts.size() == 10);
    for (const auto& line : prompts) {
      const auto j = nlohmann::json::parse(line);
      CHECK(j["exemplar_ids"].size() == 4);
      for (const auto& id : j["exemplar_ids"]) CHECK(id != j["id"]);
    }
  }
  CHECK(run({"prompt", "render", "--manifest", dir.file("m.jsonl"), "--mode", "beam"}).code ==
        cli::kExitUsage);
}

TEST_CASE("jobs do not change outputs") {
  TempDir dir;
  save_jsonl(toy_manifest(), dir.file("toy.jsonl"));
  const std::string lex = dir.write("lex.json", R"({"_": ["zzz", "yyy"]})");
  std::vector<std::string> outputs;
  for (const char* jobs : {"1", "8"}) {
    const std::string tag = jobs;
    CHECK(run({"--jobs", jobs, "augment", "--manifest", dir.file("toy.jsonl"), "--proposer",
               "lexicon:" + lex, "--oracle", "memorizing", "--factor", "3", "--seed", "5",
               "--proposals-per-mask", "2", "--out", dir.file("a" + tag),
               "--candidates", dir.file("c" + tag)})
              .code == 0);
    CHECK(run({"--jobs", jobs, "prompt", "render", "--manifest", dir.file("toy.jsonl"),
               "--mode", "sample", "--seed", "5", "--resample-epochs", "2", "--out",
               dir.file("p" + tag)})
              .code == 0);
    outputs.push_back(read_file(dir.file("a" + tag)) + read_file(dir.file("c" + tag)) +
                      read_file(dir.file("p" + tag)));
  }
  CHECK(outputs[0] == outputs[1]);
  CHECK(outputs[0].size() > 100);
}

}  // TEST_SUITE
