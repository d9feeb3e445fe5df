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

#include <algorithm>
#include <chrono>
#include <ctime>
#include <fstream>
#include <set>
#include <sstream>

#define TOML_EXCEPTIONS 1
#include <toml.hpp>

#include "duetmath/error.h"

namespace duetmath {

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

constexpr const char* kPathKeys[] = {"dataset", "templates", "out", "cassette", "script"};

const std::set<std::string>& known_keys() {
  static const std::set<std::string> keys = {
      "dataset",     "level",          "subjects",       "modes",        "mode",
      "n_runs",      "parallelism",    "max_rounds",     "role_swap_every", "quota",
      "templates",   "out",            "backend",        "cassette",     "replay_lenient",
      "script",      "model",          "temperature",    "max_tokens",   "base_url",
      "api_key_env", "max_attempts",   "backoff_base_ms", "requests_per_minute"};
  return keys;
}

bool looks_secret(const std::string& key) {
  std::string k = key;
  std::transform(k.begin(), k.end(), k.begin(), [](unsigned char c) { return std::tolower(c); });
  if (k == "api_key_env") return false;
  for (const char* word : {"api_key", "apikey", "secret", "token", "password"}) {
    if (k.find(word) != std::string::npos) return true;
  }
  return k == "key";
}

json toml_to_json(const toml::node& node) {
  if (const auto* table = node.as_table()) {
    json j = json::object();
    for (const auto& [key, value] : *table) j[std::string(key.str())] = toml_to_json(value);
    return j;
  }
  if (const auto* array = node.as_array()) {
    json j = json::array();
    for (const auto& value : *array) j.push_back(toml_to_json(value));
    return j;
  }
  if (const auto* s = node.as_string()) return s->get();
  if (const auto* i = node.as_integer()) return i->get();
  if (const auto* f = node.as_floating_point()) return f->get();
  if (const auto* b = node.as_boolean()) return b->get();
  std::ostringstream text;  // dates and times
  node.visit([&](const auto& v) { text << v; });
  return text.str();
}

json parse_document(std::string_view text, bool toml) {
  if (toml) {
    try {
      return toml_to_json(toml::parse(text));
    } catch (const toml::parse_error& e) {
      const auto& where = e.source().begin;
      throw Error(ErrorCode::kParseError, "line " + std::to_string(where.line) + ", column " +
                                              std::to_string(where.column) + ": " +
                                              std::string(e.description()));
    }
  }
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    throw Error(ErrorCode::kParseError, e.what());
  }
}

fs::path resolve(const fs::path& base, const std::string& value) {
  fs::path p(value);
  if (p.is_relative()) p = base / p;
  return p.lexically_normal();
}

// Typed accessors; a wrong type is a parse error naming the field.
class Fields {
 public:
  explicit Fields(const json& j) : j_(j) {}

  bool has(const char* key) const { return j_.contains(key) && !j_.at(key).is_null(); }

  std::string str(const char* key) const {
    const json& v = j_.at(key);
    if (!v.is_string()) fail(key, "a string");
    return v.get<std::string>();
  }
  long integer(const char* key) const {
    const json& v = j_.at(key);
    if (!v.is_number_integer()) fail(key, "an integer");
    return v.get<long>();
  }
  double real(const char* key) const {
    const json& v = j_.at(key);
    if (!v.is_number()) fail(key, "a number");
    return v.get<double>();
  }
  bool boolean(const char* key) const {
    const json& v = j_.at(key);
    if (!v.is_boolean()) fail(key, "true or false");
    return v.get<bool>();
  }
  // A list of strings, or one comma-separated string.
  std::vector<std::string> list(const char* key) const {
    const json& v = j_.at(key);
    std::vector<std::string> out;
    if (v.is_string()) {
      std::istringstream in(v.get<std::string>());
      std::string item;
      while (std::getline(in, item, ',')) {
        item.erase(0, item.find_first_not_of(' '));
        item.erase(item.find_last_not_of(' ') + 1);
        if (!item.empty()) out.push_back(item);
      }
      return out;
    }
    if (!v.is_array()) fail(key, "a list of strings");
    for (const auto& item : v) {
      if (!item.is_string()) fail(key, "a list of strings");
      out.push_back(item.get<std::string>());
    }
    return out;
  }

 private:
  [[noreturn]] static void fail(const char* key, const char* expected) {
    throw Error(ErrorCode::kParseError, std::string("field '") + key + "' must be " + expected);
  }
  const json& j_;
};

std::string utc_now() {
  const std::time_t t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

}  // namespace

std::string_view to_string(BackendKind kind) {
  switch (kind) {
    case BackendKind::kLive: return "live";
    case BackendKind::kReplay: return "replay";
    case BackendKind::kScripted: return "scripted";
  }
  return "replay";
}

BackendKind parse_backend_kind(std::string_view text) {
  for (auto kind : {BackendKind::kLive, BackendKind::kReplay, BackendKind::kScripted}) {
    if (text == to_string(kind)) return kind;
  }
  throw Error(ErrorCode::kParseError,
              "backend must be live, replay or scripted, got '" + std::string(text) + "'");
}

ExperimentConfig parse_config_text(std::string_view text, bool toml, const fs::path& base_dir,
                                   const json& overrides) {
  json doc = parse_document(text, toml);
  if (!doc.is_object()) throw Error(ErrorCode::kParseError, "config must be a table/object");

  std::vector<std::string> problems;
  for (const auto& [key, value] : doc.items()) {
    if (looks_secret(key)) {
      problems.push_back("'" + key +
                         "' looks like a secret; put it in the environment and name the "
                         "variable with api_key_env");
    } else if (!known_keys().count(key)) {
      problems.push_back("unknown key '" + key + "'");
    }
  }
  for (const char* key : kPathKeys) {
    if (doc.contains(key) && doc[key].is_string()) {
      doc[key] = resolve(base_dir, doc[key].get<std::string>()).string();
    }
  }
  for (const auto& [key, value] : overrides.items()) {
    if (key == "mode") doc.erase("modes");
    if (key == "modes") doc.erase("mode");
    doc[key] = value;
    if (std::find(std::begin(kPathKeys), std::end(kPathKeys), key) != std::end(kPathKeys) &&
        value.is_string()) {
      doc[key] = fs::absolute(value.get<std::string>()).lexically_normal().string();
    }
  }

  const Fields f(doc);
  ExperimentConfig c;
  try {
    if (f.has("dataset")) c.dataset = f.str("dataset");
    if (doc.contains("level")) {
      c.level = doc["level"].is_null() ? std::nullopt : std::optional<int>(f.integer("level"));
    }
    if (f.has("subjects")) {
      for (const auto& s : f.list("subjects")) c.subjects.push_back(parse_subject(s));
    }
    if (f.has("modes")) {
      for (const auto& m : f.list("modes")) c.modes.push_back(parse_mode(m));
    } else if (f.has("mode")) {
      c.modes.push_back(parse_mode(f.str("mode")));
    } else {
      c.modes.assign(kAllModes.begin(), kAllModes.end());
    }
    if (f.has("n_runs")) c.n_runs = static_cast<int>(f.integer("n_runs"));
    if (f.has("parallelism")) c.parallelism = static_cast<int>(f.integer("parallelism"));
    if (f.has("max_rounds")) c.max_rounds = static_cast<int>(f.integer("max_rounds"));
    if (f.has("role_swap_every")) {
      c.role_swap_every = static_cast<int>(f.integer("role_swap_every"));
    }
    if (f.has("quota")) c.quota = static_cast<int>(f.integer("quota"));
    c.templates = f.has("templates") ? fs::path(f.str("templates"))
                                     : fs::path(DUETMATH_DEFAULT_TEMPLATE_DIR);
    if (f.has("out")) c.out = f.str("out");
    if (f.has("backend")) c.backend = parse_backend_kind(f.str("backend"));
    if (f.has("cassette")) c.cassette = f.str("cassette");
    if (f.has("replay_lenient")) c.replay_lenient = f.boolean("replay_lenient");
    if (f.has("script")) c.script = f.str("script");
    if (f.has("model")) c.model = f.str("model");
    if (f.has("temperature")) c.temperature = f.real("temperature");
    if (f.has("max_tokens")) c.max_tokens = static_cast<int>(f.integer("max_tokens"));
    if (f.has("base_url")) c.base_url = f.str("base_url");
    if (f.has("api_key_env")) c.api_key_env = f.str("api_key_env");
    if (f.has("max_attempts")) c.max_attempts = static_cast<int>(f.integer("max_attempts"));
    if (f.has("backoff_base_ms")) {
      c.backoff_base_ms = static_cast<int>(f.integer("backoff_base_ms"));
    }
    if (f.has("requests_per_minute")) c.requests_per_minute = f.real("requests_per_minute");
  } catch (const Error& e) {
    if (e.code() == ErrorCode::kParseError) throw;
    throw Error(ErrorCode::kParseError, e.what());  // bad subject or mode name
  }

  for (auto& p : validation_errors(c)) problems.push_back(std::move(p));
  if (!problems.empty()) {
    std::string message = std::to_string(problems.size()) + " problem(s):";
    for (const auto& p : problems) message += "\n  - " + p;
    throw Error(ErrorCode::kValidationError, message);
  }
  return c;
}

ExperimentConfig parse_config(const fs::path& path, const json& overrides) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kConfigError, "cannot read config " + path.string());
  std::ostringstream text;
  text << in.rdbuf();
  const fs::path base = fs::absolute(path).parent_path();
  return parse_config_text(text.str(), path.extension() == ".toml", base, overrides);
}

std::vector<std::string> validation_errors(const ExperimentConfig& c) {
  std::vector<std::string> errors;
  auto need_dir = [&](const fs::path& p, const char* key) {
    if (p.empty()) {
      errors.push_back(std::string(key) + " is required");
    } else if (!fs::is_directory(p)) {
      errors.push_back(std::string(key) + " '" + p.string() + "' is not a directory");
    }
  };
  need_dir(c.dataset, "dataset");
  need_dir(c.templates, "templates");
  if (c.out.empty()) errors.push_back("out is required");
  if (c.level && (*c.level < 1 || *c.level > 5)) errors.push_back("level must be 1-5");
  if (c.modes.empty()) errors.push_back("modes must not be empty");
  if (c.n_runs < 1) errors.push_back("n_runs must be >= 1");
  if (c.parallelism < 1) errors.push_back("parallelism must be >= 1");
  if (c.max_rounds < 1) errors.push_back("max_rounds must be >= 1");
  if (c.role_swap_every < 1) errors.push_back("role_swap_every must be >= 1");
  if (c.quota && *c.quota < 1) errors.push_back("quota must be >= 1");
  if (c.temperature < 0.0 || c.temperature > 2.0) errors.push_back("temperature must be in [0, 2]");
  if (c.max_tokens < 1) errors.push_back("max_tokens must be >= 1");
  if (c.max_attempts < 1) errors.push_back("max_attempts must be >= 1");
  if (c.backoff_base_ms < 0) errors.push_back("backoff_base_ms must be >= 0");
  if (c.requests_per_minute < 0) errors.push_back("requests_per_minute must be >= 0");
  if (c.backend == BackendKind::kReplay) need_dir(c.cassette, "cassette");
  if (c.backend == BackendKind::kScripted) {
    if (c.script.empty()) {
      errors.push_back("script is required for the scripted backend");
    } else if (!fs::is_regular_file(c.script)) {
      errors.push_back("script '" + c.script.string() + "' does not exist");
    }
  }
  if (c.backend == BackendKind::kLive && c.api_key_env.empty()) {
    errors.push_back("api_key_env must name an environment variable");
  }
  return errors;
}

nlohmann::ordered_json to_json(const ExperimentConfig& c) {
  nlohmann::ordered_json j;
  j["dataset"] = c.dataset.string();
  j["level"] = c.level ? nlohmann::ordered_json(*c.level) : nlohmann::ordered_json(nullptr);
  j["subjects"] = nlohmann::ordered_json::array();
  for (auto s : c.subjects) j["subjects"].push_back(to_string(s));
  j["modes"] = nlohmann::ordered_json::array();
  for (auto m : c.modes) j["modes"].push_back(to_string(m));
  j["n_runs"] = c.n_runs;
  j["parallelism"] = c.parallelism;
  j["max_rounds"] = c.max_rounds;
  j["role_swap_every"] = c.role_swap_every;
  j["quota"] = c.quota ? nlohmann::ordered_json(*c.quota) : nlohmann::ordered_json(nullptr);
  j["templates"] = c.templates.string();
  j["out"] = c.out.string();
  j["backend"] = to_string(c.backend);
  j["cassette"] = c.cassette.string();
  j["replay_lenient"] = c.replay_lenient;
  j["script"] = c.script.string();
  j["model"] = c.model;
  j["temperature"] = c.temperature;
  j["max_tokens"] = c.max_tokens;
  j["base_url"] = c.base_url;
  j["api_key_env"] = c.api_key_env;
  j["max_attempts"] = c.max_attempts;
  j["backoff_base_ms"] = c.backoff_base_ms;
  j["requests_per_minute"] = c.requests_per_minute;
  return j;
}

fs::path session_cassette_path(const fs::path& dir, CommunicationMode mode,
                               const std::string& problem_id, int run_index) {
  return dir / std::string(to_string(mode)) /
         (problem_id + "__run" + std::to_string(run_index) + ".jsonl");
}

const std::vector<std::string>& ReplyScript::replies_for(CommunicationMode mode,
                                                         const std::string& problem_id,
                                                         int run_index) const {
  const std::string base = std::string(to_string(mode)) + "/" + problem_id;
  if (auto it = sessions.find(base + "#" + std::to_string(run_index)); it != sessions.end()) {
    return it->second;
  }
  if (auto it = sessions.find(base); it != sessions.end()) return it->second;
  return default_replies;
}

ReplyScript load_reply_script(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kConfigError, "cannot read script " + path.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw Error(ErrorCode::kParseError, path.string() + ": " + e.what());
  }
  ReplyScript script;
  try {
    if (j.contains("default")) script.default_replies = j["default"].get<std::vector<std::string>>();
    if (j.contains("sessions")) {
      script.sessions =
          j["sessions"].get<std::map<std::string, std::vector<std::string>>>();
    }
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kParseError, path.string() + ": " + e.what());
  }
  return script;
}

PreparedRun prepare_run(const ExperimentConfig& config,
                        const std::optional<fs::path>& record_to) {
  PreparedRun run;
  LoadOptions load_options;
  load_options.level_filter = config.level;
  load_options.subjects = config.subjects;
  load_options.per_subject_quota = config.quota;
  DatasetLoad load = load_dataset(config.dataset, load_options);
  run.problems = std::move(load.problems);
  run.manifest = std::move(load.manifest);

  SamplingParams sampling;
  sampling.model = config.model;
  sampling.temperature = config.temperature;
  sampling.max_tokens = config.max_tokens;
  auto& opts = run.options;
  opts.modes = config.modes;
  for (auto mode : config.modes) {
    opts.specs[mode] = load_mode_spec(mode, config.templates, sampling, config.max_rounds,
                                      config.role_swap_every);
  }
  opts.n_runs = config.n_runs;
  opts.parallelism = config.parallelism;
  opts.out_dir = config.out;
  opts.model_label = config.model;
  opts.measure_wall_time = config.backend == BackendKind::kLive;

  BackendFactory base;
  switch (config.backend) {
    case BackendKind::kLive: {
      LiveBackendOptions live;
      live.base_url = config.base_url;
      live.api_key_env = config.api_key_env;
      live.max_attempts = config.max_attempts;
      live.backoff_base = std::chrono::milliseconds(config.backoff_base_ms);
      live.requests_per_minute = config.requests_per_minute;
      auto shared = std::make_shared<LiveBackend>(std::move(live));
      base = [shared](const SessionKey&) -> std::shared_ptr<ChatBackend> { return shared; };
      break;
    }
    case BackendKind::kReplay: {
      const fs::path dir = config.cassette;
      const ReplayMode mode = config.replay_lenient ? ReplayMode::kLenient : ReplayMode::kStrict;
      base = [dir, mode](const SessionKey& key) -> std::shared_ptr<ChatBackend> {
        return std::make_shared<ReplayBackend>(
            load_cassette(session_cassette_path(dir, key.mode, key.problem->id, key.run_index)),
            mode);
      };
      break;
    }
    case BackendKind::kScripted: {
      auto script = std::make_shared<ReplyScript>(load_reply_script(config.script));
      base = [script](const SessionKey& key) -> std::shared_ptr<ChatBackend> {
        return std::make_shared<ScriptedBackend>(
            script->replies_for(key.mode, key.problem->id, key.run_index));
      };
      break;
    }
  }
  if (record_to) {
    const fs::path dir = *record_to;
    const std::string stamp = utc_now();
    run.backends = [base, dir, stamp](const SessionKey& key) -> std::shared_ptr<ChatBackend> {
      const fs::path path = session_cassette_path(dir, key.mode, key.problem->id, key.run_index);
      fs::create_directories(path.parent_path());
      return std::make_shared<RecordingBackend>(base(key), path, stamp);
    };
  } else {
    run.backends = std::move(base);
  }
  return run;
}

}  // namespace duetmath
