#ifndef MAGEC_CONFIG_HPP_
#define MAGEC_CONFIG_HPP_

#include <map>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace magec {

/// Plain `key = value` config files; '#' starts a comment.
inline std::map<std::string, std::string> parse_key_value_config(
    const std::string& text) {
  std::map<std::string, std::string> out;
  std::istringstream in(text);
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      // blank or comment-only lines are fine; anything else is not
      std::istringstream probe(line);
      std::string tok;
      if (probe >> tok)
        throw std::runtime_error("config line " + std::to_string(line_no) +
                                 " has no '='");
      continue;
    }
    auto trim = [](std::string s) {
      const auto b = s.find_first_not_of(" \t\r");
      const auto e = s.find_last_not_of(" \t\r");
      return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
    };
    const std::string key = trim(line.substr(0, eq));
    const std::string val = trim(line.substr(eq + 1));
    if (key.empty())
      throw std::runtime_error("config line " + std::to_string(line_no) +
                               " has an empty key");
    out[key] = val;
  }
  return out;
}

/// Attrition schedules are written `<step>:<agent>,<step>:<agent>`.
inline std::vector<std::pair<long, int>> parse_attrition(const std::string& s) {
  std::vector<std::pair<long, int>> events;
  if (s.empty()) return events;
  std::istringstream in(s);
  std::string item;
  while (std::getline(in, item, ',')) {
    const auto colon = item.find(':');
    if (colon == std::string::npos)
      throw std::runtime_error("bad attrition event '" + item +
                               "' (expected step:agent)");
    events.push_back({std::stol(item.substr(0, colon)),
                      std::stoi(item.substr(colon + 1))});
  }
  return events;
}

}  // namespace magec

#endif  // MAGEC_CONFIG_HPP_
