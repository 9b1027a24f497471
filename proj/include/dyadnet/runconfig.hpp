// Run configuration: long-option command lines, key=value config files, and
// the manifest echo. Flags override file values, file values override
// defaults, and the manifest records where each resolved value came from so
// a run can be reproduced from its manifest alone.
#pragma once

#include <cctype>
#include <cstdint>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "dyadnet/common.hpp"

namespace dyadnet {

struct OptionDef {
  std::string key;
  std::string def;
  std::string help;
};

struct RunConfig {
  std::string subcommand;
  std::map<std::string, std::string> values;      // fully resolved
  std::map<std::string, std::string> provenance;  // flag | file | default

  const std::string& get(const std::string& key) const {
    const auto it = values.find(key);
    if (it == values.end()) throw ValidationError("missing config key: " + key);
    return it->second;
  }
  int get_int(const std::string& key) const { return std::stoi(get(key)); }
  double get_double(const std::string& key) const { return std::stod(get(key)); }
  std::uint64_t get_u64(const std::string& key) const { return std::stoull(get(key)); }
  bool get_bool(const std::string& key) const {
    const auto& v = get(key);
    return v == "1" || v == "true" || v == "yes";
  }
  std::vector<std::string> get_list(const std::string& key) const {
    std::vector<std::string> out;
    std::stringstream ss(get(key));
    std::string item;
    while (std::getline(ss, item, ','))
      if (!item.empty()) out.push_back(item);
    return out;
  }

  bool operator==(const RunConfig& other) const {
    return subcommand == other.subcommand && values == other.values;
  }
};

namespace detail {

inline std::string trim_ws(const std::string& s) {
  std::size_t b = 0, e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return s.substr(b, e - b);
}

}  // namespace detail

// key=value file, one entry per line, # comments. A JSON manifest (from a
// previous run) is also accepted; its "config" block is extracted, which
// makes `--config manifest.json` reproduce a run.
inline std::map<std::string, std::string> load_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open config file " + path);
  std::string content((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  std::map<std::string, std::string> out;
  const std::string trimmed = detail::trim_ws(content);
  if (!trimmed.empty() && trimmed.front() == '{') {
    // minimal manifest reader: string values inside the "config" object
    const auto cfg_pos = trimmed.find("\"config\"");
    if (cfg_pos == std::string::npos)
      throw ValidationError("manifest has no config block: " + path);
    std::size_t i = trimmed.find('{', cfg_pos);
    if (i == std::string::npos) throw ValidationError("malformed manifest: " + path);
    ++i;
    while (i < trimmed.size() && trimmed[i] != '}') {
      auto read_string = [&](std::size_t& pos) {
        pos = trimmed.find('"', pos);
        if (pos == std::string::npos) throw ValidationError("malformed manifest: " + path);
        std::string s;
        for (++pos; pos < trimmed.size() && trimmed[pos] != '"'; ++pos) {
          if (trimmed[pos] == '\\' && pos + 1 < trimmed.size()) ++pos;
          s += trimmed[pos];
        }
        ++pos;
        return s;
      };
      const std::string key = read_string(i);
      i = trimmed.find(':', i) + 1;
      const std::string value = read_string(i);
      out[key] = value;
      const auto comma = trimmed.find_first_of(",}", i);
      if (comma == std::string::npos) break;
      i = trimmed[comma] == ',' ? comma + 1 : comma;
    }
    return out;
  }
  std::istringstream is(content);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(is, line)) {
    ++line_no;
    const std::string t = detail::trim_ws(line);
    if (t.empty() || t[0] == '#') continue;
    const auto eq = t.find('=');
    if (eq == std::string::npos)
      throw ValidationError("config line " + std::to_string(line_no) + " is not key=value: " + t);
    out[detail::trim_ws(t.substr(0, eq))] = detail::trim_ws(t.substr(eq + 1));
  }
  return out;
}

// Resolves defaults, an optional config file, and command-line tokens of the
// form --key value or --key=value. Unknown keys in either source fail.
inline RunConfig resolve_config(const std::string& subcommand,
                                const std::vector<OptionDef>& defs,
                                const std::vector<std::string>& args) {
  RunConfig cfg;
  cfg.subcommand = subcommand;
  for (const auto& d : defs) {
    cfg.values[d.key] = d.def;
    cfg.provenance[d.key] = "default";
  }
  auto known = [&](const std::string& key) {
    for (const auto& d : defs)
      if (d.key == key) return true;
    return false;
  };

  // first pass: pick up --config
  std::string config_path;
  for (std::size_t i = 0; i < args.size(); ++i) {
    if (args[i] == "--config" && i + 1 < args.size()) config_path = args[i + 1];
    else if (args[i].rfind("--config=", 0) == 0) config_path = args[i].substr(9);
  }
  if (!config_path.empty()) {
    for (const auto& [key, value] : load_config_file(config_path)) {
      if (!known(key))
        throw ValidationError("unknown key '" + key + "' in config file " + config_path);
      cfg.values[key] = value;
      cfg.provenance[key] = "file";
    }
  }

  for (std::size_t i = 0; i < args.size(); ++i) {
    std::string token = args[i];
    if (token.rfind("--", 0) != 0)
      throw ValidationError("unexpected argument '" + token + "'");
    token = token.substr(2);
    std::string key, value;
    const auto eq = token.find('=');
    if (eq != std::string::npos) {
      key = token.substr(0, eq);
      value = token.substr(eq + 1);
    } else {
      key = token;
      if (i + 1 >= args.size())
        throw ValidationError("flag --" + key + " needs a value");
      value = args[++i];
    }
    if (key == "config") continue;  // consumed above
    if (!known(key)) throw ValidationError("unknown flag --" + key);
    cfg.values[key] = value;
    cfg.provenance[key] = "flag";
  }
  return cfg;
}

}  // namespace dyadnet
