#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>
#include <unordered_set>

#include <json.hpp>

#include "cgr/error.hpp"
#include "cgr/harness.hpp"

namespace cgr {

using nlohmann::json;

std::vector<QuestionRecord> load_dataset(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DatasetError("cannot open dataset " + path.string(), 0);
  std::vector<QuestionRecord> out;
  std::unordered_set<std::string> ids;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    json j;
    try {
      j = json::parse(line);
    } catch (const json::parse_error& e) {
      throw DatasetError(std::string("invalid JSON: ") + e.what(), line_no);
    }
    if (!j.is_object() || !j.contains("id") || !j.contains("question") || !j.contains("answer")) {
      throw DatasetError("record needs 'id', 'question' and 'answer'", line_no);
    }
    QuestionRecord q;
    if (j.at("id").is_string()) {
      q.id = j.at("id").get<std::string>();
    } else if (j.at("id").is_number_integer()) {
      q.id = std::to_string(j.at("id").get<std::int64_t>());
    } else {
      throw DatasetError("'id' must be a string", line_no);
    }
    if (!j.at("question").is_string()) throw DatasetError("'question' must be a string", line_no);
    q.prompt_text = j.at("question").get<std::string>();
    if (!j.at("answer").is_number_integer()) throw DatasetError("'answer' must be an integer", line_no);
    const auto answer = j.at("answer").get<std::int64_t>();
    if (answer < 0 || answer > 999) {
      throw DatasetError("answer " + std::to_string(answer) + " outside [0, 999]", line_no);
    }
    q.truth = static_cast<int>(answer);
    if (!ids.insert(q.id).second) throw DatasetError("duplicate question id '" + q.id + "'", line_no);
    out.push_back(std::move(q));
  }
  return out;
}

std::vector<std::string> RunConfig::validate() const {
  std::vector<std::string> warnings;
  if (probe_interval < 1) throw ConfigError("interval must be at least 1");
  if (budgets.empty()) throw ConfigError("at least one budget is required");
  for (auto b : budgets) {
    if (b < probe_interval) {
      throw ConfigError("budget " + std::to_string(b) + " is smaller than the probe interval");
    }
  }
  if (thresholds.empty()) throw ConfigError("at least one threshold is required");
  for (double th : thresholds) {
    if (!(th >= 0.0 && th <= 1.0)) throw ConfigError("threshold must lie in [0, 1]");
    if (th < 0.90) {
      std::ostringstream s;
      s << "threshold " << th << " is below 0.90; low thresholds tend to certify wrong answers";
      warnings.push_back(s.str());
    }
  }
  if (seeds.empty()) throw ConfigError("at least one seed is required");
  for (double c : penalties) {
    if (!(c >= 0.0) || !std::isfinite(c)) throw ConfigError("penalties must be finite and >= 0");
  }
  if (abstain_threshold && !(*abstain_threshold >= 0.0 && *abstain_threshold <= 1.0)) {
    throw ConfigError("abstain-threshold must lie in [0, 1]");
  }
  if (top_k < 1) throw ConfigError("top-k must be at least 1");
  if (max_answer_tokens < 1) throw ConfigError("max-answer-tokens must be at least 1");
  if (backend.empty()) throw ConfigError("backend must be set");
  return warnings;
}

namespace {

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(b, e - b + 1));
}

std::vector<std::string> split_list(std::string_view text) {
  std::vector<std::string> out;
  std::string item;
  std::istringstream in{std::string(text)};
  while (std::getline(in, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

template <typename T>
T parse_number(std::string_view text, const std::string& what) {
  const std::string s = trim(text);
  T value{};
  const auto* end = s.data() + s.size();
  auto [ptr, ec] = std::from_chars(s.data(), end, value);
  if (ec != std::errc() || ptr != end || s.empty()) {
    throw ConfigError("bad value for " + what + ": '" + s + "'");
  }
  return value;
}

bool parse_bool(std::string_view text, const std::string& what) {
  const std::string s = trim(text);
  if (s == "true" || s == "1" || s == "yes" || s == "on") return true;
  if (s == "false" || s == "0" || s == "no" || s == "off") return false;
  throw ConfigError("bad boolean for " + what + ": '" + s + "'");
}

std::string unescape(std::string_view s) {
  std::string out;
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (s[i] != '\\' || i + 1 == s.size()) {
      out += s[i];
      continue;
    }
    switch (s[++i]) {
      case 'n': out += '\n'; break;
      case 't': out += '\t'; break;
      case '\\': out += '\\'; break;
      default: out += '\\'; out += s[i];
    }
  }
  return out;
}

}  // namespace

std::vector<std::uint64_t> parse_seed_list(std::string_view text) {
  std::vector<std::uint64_t> out;
  for (const auto& item : split_list(text)) {
    if (auto dots = item.find(".."); dots != std::string::npos) {
      const auto lo = parse_number<std::uint64_t>(item.substr(0, dots), "seeds");
      const auto hi = parse_number<std::uint64_t>(item.substr(dots + 2), "seeds");
      if (hi < lo) throw ConfigError("empty seed range '" + item + "'");
      if (hi - lo > 1'000'000) throw ConfigError("seed range too large '" + item + "'");
      for (auto s = lo; s <= hi; ++s) out.push_back(s);
    } else {
      out.push_back(parse_number<std::uint64_t>(item, "seeds"));
    }
  }
  if (out.empty()) throw ConfigError("empty seed list");
  return out;
}

std::vector<double> parse_real_list(std::string_view text) {
  std::vector<double> out;
  for (const auto& item : split_list(text)) out.push_back(parse_number<double>(item, "list"));
  return out;
}

std::vector<std::int64_t> parse_int_list(std::string_view text) {
  std::vector<std::int64_t> out;
  for (const auto& item : split_list(text)) out.push_back(parse_number<std::int64_t>(item, "list"));
  return out;
}

Settings read_config_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path.string());
  Settings out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto text = trim(line);
    if (text.empty() || text.front() == '#' || text.front() == ';' || text.front() == '[') continue;
    const auto eq = text.find('=');
    if (eq == std::string::npos) {
      throw ConfigError(path.string() + ":" + std::to_string(line_no) + ": expected key = value");
    }
    auto key = trim(text.substr(0, eq));
    auto value = trim(text.substr(eq + 1));
    if (value.size() >= 2 && value.front() == '"' && value.back() == '"') {
      value = value.substr(1, value.size() - 2);
    }
    std::replace(key.begin(), key.end(), '_', '-');
    out[key] = value;
  }
  return out;
}

RunConfig apply_settings(RunConfig c, const Settings& settings) {
  for (const auto& [raw_key, value] : settings) {
    std::string key = raw_key;
    std::replace(key.begin(), key.end(), '_', '-');
    if (key == "mode") {
      c.mode = parse_mode(trim(value));
    } else if (key == "budget") {
      c.budgets = {parse_number<std::int64_t>(value, key)};
    } else if (key == "budgets") {
      c.budgets = parse_int_list(value);
    } else if (key == "threshold") {
      c.thresholds = {parse_number<double>(value, key)};
    } else if (key == "thresholds") {
      c.thresholds = parse_real_list(value);
    } else if (key == "interval") {
      c.probe_interval = parse_number<std::int64_t>(value, key);
    } else if (key == "seeds") {
      c.seeds = parse_seed_list(value);
    } else if (key == "penalties") {
      c.penalties = parse_real_list(value);
    } else if (key == "backend") {
      c.backend = trim(value);
    } else if (key == "probe-backend") {
      const auto v = trim(value);
      c.probe_backend = v.empty() ? std::nullopt : std::optional<std::string>(v);
    } else if (key == "system-prompt") {
      c.system_prompt = unescape(value);
    } else if (key == "prompt-template") {
      c.prompt_template = unescape(value);
    } else if (key == "top-k") {
      c.top_k = parse_number<std::size_t>(value, key);
    } else if (key == "max-answer-tokens") {
      c.max_answer_tokens = parse_number<std::size_t>(value, key);
    } else if (key == "workers") {
      c.workers = parse_number<std::size_t>(value, key);
    } else if (key == "save-tokens") {
      c.save_tokens = parse_bool(value, key);
    } else if (key == "abstain-threshold") {
      c.abstain_threshold = parse_number<double>(value, key);
    } else if (key == "dataset" || key == "out") {
      // consumed by the command line front end
    } else {
      throw ConfigError("unknown setting '" + raw_key + "'");
    }
  }
  return c;
}

RunConfig resolve_config(const Settings& file_settings, const Settings& cli_settings,
                         std::optional<std::string> env_backend_url) {
  RunConfig c = apply_settings(RunConfig{}, file_settings);
  c = apply_settings(std::move(c), cli_settings);
  const bool named = file_settings.contains("backend") || cli_settings.contains("backend");
  if (!named && env_backend_url && !env_backend_url->empty()) c.backend = *env_backend_url;
  return c;
}

std::string to_json(const RunConfig& c) {
  json j = {{"mode", to_string(c.mode)},
            {"budgets", c.budgets},
            {"thresholds", c.thresholds},
            {"interval", c.probe_interval},
            {"seeds", c.seeds},
            {"penalties", c.penalties},
            {"backend", c.backend},
            {"probe_backend", c.probe_backend ? json(*c.probe_backend) : json(nullptr)},
            {"system_prompt", c.system_prompt},
            {"prompt_template", c.prompt_template},
            {"top_k", c.top_k},
            {"max_answer_tokens", c.max_answer_tokens},
            {"save_tokens", c.save_tokens},
            {"abstain_threshold", c.abstain_threshold ? json(*c.abstain_threshold) : json(nullptr)}};
  return j.dump();
}

RunConfig run_config_from_json(std::string_view text) {
  RunConfig c;
  try {
    const auto j = json::parse(text);
    c.mode = parse_mode(j.at("mode").get<std::string>());
    c.budgets = j.at("budgets").get<std::vector<std::int64_t>>();
    c.thresholds = j.at("thresholds").get<std::vector<double>>();
    c.probe_interval = j.at("interval").get<std::int64_t>();
    c.seeds = j.at("seeds").get<std::vector<std::uint64_t>>();
    c.penalties = j.at("penalties").get<std::vector<double>>();
    c.backend = j.at("backend").get<std::string>();
    if (!j.at("probe_backend").is_null()) c.probe_backend = j.at("probe_backend").get<std::string>();
    c.system_prompt = j.at("system_prompt").get<std::string>();
    c.prompt_template = j.at("prompt_template").get<std::string>();
    c.top_k = j.at("top_k").get<std::size_t>();
    c.max_answer_tokens = j.at("max_answer_tokens").get<std::size_t>();
    c.save_tokens = j.value("save_tokens", true);
    if (j.contains("abstain_threshold") && !j.at("abstain_threshold").is_null()) {
      c.abstain_threshold = j.at("abstain_threshold").get<double>();
    }
  } catch (const json::exception& e) {
    throw ConfigError(std::string("bad stored config: ") + e.what());
  }
  return c;
}

}  // namespace cgr
