#ifndef CPLAB_TESTS_RESULT_BODY_HPP
#define CPLAB_TESTS_RESULT_BODY_HPP

// Result bodies with wall-clock fields removed, for determinism comparisons.

#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <json.hpp>

namespace cplab::testing {

inline std::string read_file(const std::filesystem::path& file) {
  std::ifstream in(file, std::ios::binary);
  std::stringstream s;
  s << in.rdbuf();
  return s.str();
}

/// CSV: drops the trailing `seconds` column when present. JSON: drops every
/// `seconds` member. Anything else is returned verbatim.
inline std::string result_body(const std::filesystem::path& file) {
  const std::string text = read_file(file);
  if (file.extension() == ".json") {
    auto doc = nlohmann::json::parse(text);
    auto strip = [](auto& self, nlohmann::json& j) -> void {
      if (j.is_object()) {
        j.erase("seconds");
        for (auto& [k, v] : j.items()) self(self, v);
      } else if (j.is_array()) {
        for (auto& v : j) self(self, v);
      }
    };
    strip(strip, doc);
    return doc.dump(2);
  }
  std::istringstream in(text);
  std::string line, out;
  bool timed = false;
  while (std::getline(in, line)) {
    if (line.rfind("#", 0) != 0 && line.ends_with(",seconds")) timed = true;
    if (timed && line.rfind("#", 0) != 0) line = line.substr(0, line.rfind(','));
    out += line + "\n";
  }
  return out;
}

}  // namespace cplab::testing

#endif  // CPLAB_TESTS_RESULT_BODY_HPP
