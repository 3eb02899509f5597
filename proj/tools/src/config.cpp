#include "fvi_cli/config.hpp"

#include <cctype>
#include <charconv>
#include <limits>
#include <fstream>
#include <sstream>

#include "fvi/errors.hpp"

namespace fvi::cli {

namespace {

std::string_view trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

// Position of the first unquoted comment character, or npos.
std::size_t comment_start(std::string_view line) {
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    if (line[i] == '\\' && quoted) {
      ++i;
    } else if (line[i] == '"') {
      quoted = !quoted;
    } else if (!quoted && (line[i] == '#' || line[i] == ';')) {
      return i;
    }
  }
  return std::string_view::npos;
}

// Splits on top-level commas (outside quotes and brackets).
std::vector<std::string_view> split_items(std::string_view s) {
  std::vector<std::string_view> out;
  int depth = 0;
  bool quoted = false;
  std::size_t start = 0;
  for (std::size_t i = 0; i < s.size(); ++i) {
    const char c = s[i];
    if (quoted) {
      if (c == '\\') ++i;
      else if (c == '"') quoted = false;
    } else if (c == '"') {
      quoted = true;
    } else if (c == '[' || c == '{') {
      ++depth;
    } else if (c == ']' || c == '}') {
      if (--depth < 0) throw ConfigError("unbalanced '" + std::string(1, c) + "'");
    } else if (c == ',' && depth == 0) {
      out.push_back(trim(s.substr(start, i - start)));
      start = i + 1;
    }
  }
  if (quoted) throw ConfigError("unterminated string");
  if (depth != 0) throw ConfigError("unbalanced brackets");
  const auto last = trim(s.substr(start));
  if (!last.empty() || !out.empty()) out.push_back(last);
  return out;
}

std::string unquote(std::string_view s) {
  std::string out;
  for (std::size_t i = 1; i + 1 < s.size(); ++i) {
    if (s[i] == '\\' && i + 2 < s.size()) {
      const char n = s[++i];
      out += n == 'n' ? '\n' : n == 't' ? '\t' : n;
    } else {
      out += s[i];
    }
  }
  return out;
}

std::pair<std::string_view, std::string_view> split_assignment(std::string_view s) {
  bool quoted = false;
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (s[i] == '"') quoted = !quoted;
    if (!quoted && s[i] == '=') return {trim(s.substr(0, i)), trim(s.substr(i + 1))};
  }
  throw ConfigError("expected 'key = value', got '" + std::string(s) + "'");
}

void check_key(std::string_view key) {
  if (key.empty()) throw ConfigError("empty key");
  for (char c : key)
    if (!(std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '-' || c == '.'))
      throw ConfigError("invalid character in key '" + std::string(key) + "'");
}

}  // namespace

json parse_value(std::string_view text) {
  const auto s = trim(text);
  if (s.empty()) throw ConfigError("missing value");
  if (s.front() == '"') {
    if (s.size() < 2 || s.back() != '"') throw ConfigError("unterminated string");
    return unquote(s);
  }
  if (s.front() == '[') {
    if (s.back() != ']') throw ConfigError("array must end with ']'");
    json arr = json::array();
    for (auto item : split_items(s.substr(1, s.size() - 2))) {
      if (item.empty()) throw ConfigError("empty array element");
      arr.push_back(parse_value(item));
    }
    return arr;
  }
  if (s.front() == '{') {
    if (s.back() != '}') throw ConfigError("inline table must end with '}'");
    json obj = json::object();
    for (auto item : split_items(s.substr(1, s.size() - 2))) {
      if (item.empty()) throw ConfigError("empty inline table entry");
      const auto [k, v] = split_assignment(item);
      check_key(k);
      set_path(obj, k, parse_value(v));
    }
    return obj;
  }
  if (s == "true") return true;
  if (s == "false") return false;
  // Integers stay integral so seeds and counts survive a JSON round trip.
  {
    std::int64_t i = 0;
    const auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), i);
    if (ec == std::errc() && p == s.data() + s.size()) return i;
  }
  {
    std::uint64_t u = 0;
    const auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), u);
    if (ec == std::errc() && p == s.data() + s.size()) return u;
  }
  {
    double d = 0.0;
    const char* first = s.data();
    if (*first == '+') ++first;
    const auto [p, ec] = std::from_chars(first, s.data() + s.size(), d);
    if (ec == std::errc() && p == s.data() + s.size()) return d;
  }
  if (s == "inf" || s == "+inf") return std::numeric_limits<double>::infinity();
  return std::string(s);
}

void set_path(json& cfg, std::string_view path, json value) {
  json* node = &cfg;
  while (true) {
    const auto dot = path.find('.');
    const std::string head(path.substr(0, dot));
    if (head.empty()) throw ConfigError("empty component in key path");
    if (!node->is_object()) throw ConfigError("key '" + head + "' is nested under a non-table value");
    if (dot == std::string_view::npos) {
      (*node)[head] = std::move(value);
      return;
    }
    node = &(*node)[head];
    if (node->is_null()) *node = json::object();
    path = path.substr(dot + 1);
  }
}

void apply_override(json& cfg, std::string_view assignment) {
  const auto [k, v] = split_assignment(assignment);
  check_key(k);
  set_path(cfg, k, parse_value(v));
}

json parse_config_text(std::string_view text, const std::string& source) {
  json cfg = json::object();
  std::string section;
  std::size_t lineno = 0;
  std::istringstream in{std::string(text)};
  std::string raw;
  while (std::getline(in, raw)) {
    ++lineno;
    std::string_view line = raw;
    if (const auto c = comment_start(line); c != std::string_view::npos) line = line.substr(0, c);
    line = trim(line);
    if (line.empty()) continue;
    try {
      if (line.front() == '[' && line.find('=') == std::string_view::npos) {
        if (line.back() != ']') throw ConfigError("section header must end with ']'");
        section = std::string(trim(line.substr(1, line.size() - 2)));
        check_key(section);
        continue;
      }
      const auto [k, v] = split_assignment(line);
      check_key(k);
      const std::string path = section.empty() ? std::string(k) : section + "." + std::string(k);
      // Duplicate keys are almost always mistakes in hand-written configs.
      const json::json_pointer ptr("/" + [&] {
        std::string p(path);
        for (auto& ch : p)
          if (ch == '.') ch = '/';
        return p;
      }());
      if (cfg.contains(ptr)) throw ConfigError("duplicate key '" + path + "'");
      set_path(cfg, path, parse_value(v));
    } catch (const ConfigError& e) {
      throw ConfigError(source + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
  return cfg;
}

void expand_shorthand(json& cfg) {
  if (!cfg.is_object()) throw ConfigError("config must be a table");
  for (const char* k : {"model", "family", "divergence"})
    if (cfg.contains(k) && cfg[k].is_string()) cfg[k] = json{{"name", cfg[k]}};
  if (cfg.contains("divergence_params")) {
    json& d = cfg["divergence"];
    if (d.is_null()) d = json::object();
    if (!d.is_object()) throw ConfigError("config section 'divergence' must be a table");
    if (d.contains("params")) throw ConfigError("divergence parameters given twice");
    d["params"] = cfg["divergence_params"];
    cfg.erase("divergence_params");
  }
}

json load_config(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw ConfigError("cannot open config '" + path + "'");
  std::stringstream ss;
  ss << f.rdbuf();
  const std::string text = ss.str();
  const auto first = text.find_first_not_of(" \t\r\n");
  if (first != std::string::npos && text[first] == '{') {
    json j;
    try {
      j = json::parse(text);
    } catch (const json::parse_error& e) {
      throw ConfigError(path + ": invalid JSON: " + e.what());
    }
    if (j.contains("config") && j.contains("version")) j = j["config"];
    expand_shorthand(j);
    return j;
  }
  json cfg = parse_config_text(text, path);
  expand_shorthand(cfg);
  return cfg;
}

}  // namespace fvi::cli
