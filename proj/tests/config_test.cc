// Copyright 2026 The duetmath Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
// https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.


#include "duetmath/config.h"

#include <gtest/gtest.h>

#include "test_util.h"

namespace duetmath {
namespace {

using nlohmann::json;
using testing::error_code_of;
using testing::kFixtures;
using testing::TempDir;

// A directory holding an empty dataset and cassette dir, for configs that
// must pass path validation.
struct Workspace {
  TempDir dir;
  Workspace() {
    std::filesystem::create_directories(dir / "math");
    std::filesystem::create_directories(dir / "cassettes");
  }
  json out_override() const { return json{{"out", (dir / "out").string()}}; }
};

TEST(ConfigTest, MinimalFileFillsDefaults) {
  Workspace ws;
  const ExperimentConfig c = parse_config_text(
      "dataset = \"math\"\nmode = \"peer_to_peer\"\nbackend = \"replay\"\ncassette = \"cassettes\"\n",
      true, ws.dir.path(), ws.out_override());
  EXPECT_EQ(c.n_runs, 3);
  EXPECT_EQ(c.max_rounds, 6);
  EXPECT_EQ(c.parallelism, 1);
  EXPECT_EQ(c.level, 5);
  EXPECT_EQ(c.model, "gpt-4o");
  EXPECT_DOUBLE_EQ(c.temperature, 0.7);
  EXPECT_EQ(c.max_tokens, 1024);
  EXPECT_EQ(c.api_key_env, "OPENAI_API_KEY");
  EXPECT_EQ(c.modes, (std::vector<CommunicationMode>{CommunicationMode::kPeerToPeer}));
  EXPECT_EQ(c.backend, BackendKind::kReplay);
  EXPECT_EQ(c.dataset, ws.dir / "math");
  EXPECT_EQ(c.cassette, ws.dir / "cassettes");
}

TEST(ConfigTest, JsonFileAndAllModesByDefault) {
  Workspace ws;
  const ExperimentConfig c = parse_config_text(
      R"({"dataset": "math", "cassette": "cassettes", "n_runs": 2})", false, ws.dir.path(),
      ws.out_override());
  EXPECT_EQ(c.n_runs, 2);
  EXPECT_EQ(c.modes.size(), 5u);
}

TEST(ConfigTest, OverrideWinsOverFile) {
  Workspace ws;
  json o = ws.out_override();
  o["n_runs"] = 5;
  o["mode"] = "critical_debate";
  const ExperimentConfig c = parse_config_text(
      "dataset = \"math\"\ncassette = \"cassettes\"\nn_runs = 3\nmodes = [\"single_agent\"]\n",
      true, ws.dir.path(), o);
  EXPECT_EQ(c.n_runs, 5);
  EXPECT_EQ(c.modes, (std::vector<CommunicationMode>{CommunicationMode::kCriticalDebate}));
}

TEST(ConfigTest, ParallelismZeroIsValidationError) {
  Workspace ws;
  const auto code = error_code_of([&] {
    parse_config_text("dataset = \"math\"\ncassette = \"cassettes\"\nparallelism = 0\n", true,
                      ws.dir.path(), ws.out_override());
  });
  EXPECT_EQ(code, "validation_error");
}

TEST(ConfigTest, ValidationListsEveryProblem) {
  Workspace ws;
  try {
    parse_config_text("dataset = \"nowhere\"\nn_runs = 0\nparallelism = 0\nbogus = 1\n", true,
                      ws.dir.path(), json::object());
    FAIL() << "expected validation_error";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kValidationError);
    const std::string what = e.what();
    for (const char* needle : {"dataset", "n_runs", "parallelism", "unknown key 'bogus'",
                               "out is required", "cassette"}) {
      EXPECT_NE(what.find(needle), std::string::npos) << needle << "\n" << what;
    }
  }
}

TEST(ConfigTest, TomlSyntaxErrorReportsLine) {
  Workspace ws;
  try {
    parse_config_text("dataset = \"math\"\nn_runs = = 3\n", true, ws.dir.path());
    FAIL() << "expected parse_error";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kParseError);
    EXPECT_NE(std::string(e.what()).find("line 2"), std::string::npos) << e.what();
  }
  EXPECT_EQ(error_code_of([&] { parse_config_text("{\"n_runs\": }", false, ws.dir.path()); }),
            "parse_error");
}

TEST(ConfigTest, TypeErrorNamesField) {
  Workspace ws;
  try {
    parse_config_text("dataset = \"math\"\nn_runs = \"three\"\n", true, ws.dir.path());
    FAIL() << "expected parse_error";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kParseError);
    EXPECT_NE(std::string(e.what()).find("n_runs"), std::string::npos);
  }
  EXPECT_EQ(error_code_of([&] {
              parse_config_text("dataset = \"math\"\nmode = \"lecture\"\n", true, ws.dir.path());
            }),
            "parse_error");
}

TEST(ConfigTest, SecretsInFileAreRejected) {
  Workspace ws;
  for (const char* key : {"api_key", "openai_api_key", "token", "password"}) {
    const std::string text = "dataset = \"math\"\ncassette = \"cassettes\"\n" +
                             std::string(key) + " = \"sk-123\"\n";
    try {
      parse_config_text(text, true, ws.dir.path(), ws.out_override());
      ADD_FAILURE() << key << " accepted";
    } catch (const Error& e) {
      EXPECT_EQ(e.code(), ErrorCode::kValidationError);
      EXPECT_NE(std::string(e.what()).find("secret"), std::string::npos) << e.what();
    }
  }
  // Naming the variable is fine.
  EXPECT_NO_THROW(parse_config_text(
      "dataset = \"math\"\ncassette = \"cassettes\"\napi_key_env = \"MY_KEY\"\n", true,
      ws.dir.path(), ws.out_override()));
}

TEST(ConfigTest, ResolvedJsonHasNoSecretValue) {
  Workspace ws;
  const ExperimentConfig c =
      parse_config_text("dataset = \"math\"\ncassette = \"cassettes\"\n", true, ws.dir.path(),
                        ws.out_override());
  const auto j = to_json(c);
  EXPECT_EQ(j["api_key_env"], "OPENAI_API_KEY");
  EXPECT_EQ(j["n_runs"], 3);
  EXPECT_FALSE(j.contains("api_key"));
}

TEST(ConfigTest, BundledReplayConfig) {
  TempDir out;
  const ExperimentConfig c =
      parse_config(kFixtures / "replay/config.toml", json{{"out", out.path().string()}});
  EXPECT_EQ(c.n_runs, 1);
  EXPECT_EQ(c.backend, BackendKind::kReplay);
  EXPECT_EQ(c.dataset.lexically_normal(), (kFixtures / "math").lexically_normal());
  EXPECT_EQ(error_code_of([] { parse_config("/nonexistent/config.toml"); }), "config_error");
}

TEST(SessionCassettePathTest, Layout) {
  EXPECT_EQ(session_cassette_path("c", CommunicationMode::kPeerToPeer, "algebra/1", 0),
            std::filesystem::path("c/peer_to_peer/algebra/1__run0.jsonl"));
}

TEST(ReplyScriptTest, LookupOrder) {
  TempDir dir;
  testing::write_file(dir / "s.json", R"({"default": ["d"], "sessions": {
      "peer_to_peer/algebra/1#1": ["run one"], "peer_to_peer/algebra/1": ["any run"]}})");
  const ReplyScript s = load_reply_script(dir / "s.json");
  EXPECT_EQ(s.replies_for(CommunicationMode::kPeerToPeer, "algebra/1", 1),
            (std::vector<std::string>{"run one"}));
  EXPECT_EQ(s.replies_for(CommunicationMode::kPeerToPeer, "algebra/1", 0),
            (std::vector<std::string>{"any run"}));
  EXPECT_EQ(s.replies_for(CommunicationMode::kSingleAgent, "algebra/1", 0),
            (std::vector<std::string>{"d"}));
}

TEST(PrepareRunTest, ReplayNeverBuildsLiveBackend) {
  TempDir out;
  ::unsetenv("OPENAI_API_KEY");
  const ExperimentConfig c =
      parse_config(kFixtures / "replay/config.toml", json{{"out", out.path().string()}});
  const PreparedRun run = prepare_run(c);
  EXPECT_EQ(run.problems.size(), 10u);
  EXPECT_FALSE(run.options.measure_wall_time);
  EXPECT_EQ(run.options.specs.size(), 5u);
}

TEST(PrepareRunTest, LiveWithoutKeyIsAuthError) {
  TempDir out;
  ::unsetenv("DUETMATH_NO_SUCH_KEY");
  const ExperimentConfig c = parse_config(
      kFixtures / "replay/config.toml",
      json{{"out", out.path().string()}, {"backend", "live"}, {"api_key_env", "DUETMATH_NO_SUCH_KEY"}});
  EXPECT_EQ(error_code_of([&] { prepare_run(c); }), "auth_error");
}

}  // namespace
}  // namespace duetmath
