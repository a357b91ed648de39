#pragma once

#include <filesystem>
#include <string>
#include <string_view>

#include "json.hpp"

namespace al4rag {

inline constexpr std::string_view kToolName = "al4rag";
inline constexpr std::string_view kToolVersion = "0.1.0";
inline constexpr std::string_view kTokenizerDescription = "lowercase; split on non-alphanumeric ASCII runs";
inline constexpr std::string_view kTfidfDescription = "tf * (ln((1+N)/(1+df)) + 1), L2-normalized";

/// Everything that influences a command's outputs. Holds no output paths
/// or timestamps.
class RunManifest {
 public:
  explicit RunManifest(std::string_view command);

  nlohmann::ordered_json& operator[](const std::string& key) { return fields_[key]; }
  const nlohmann::ordered_json& fields() const noexcept { return fields_; }

  std::string dump() const;  // pretty, trailing newline
  std::string hash() const;  // sha256 of the compact dump

  void write(const std::filesystem::path& path) const;

 private:
  nlohmann::ordered_json fields_;
};

void write_text_file(const std::filesystem::path& path, std::string_view content);
std::string read_text_file(const std::filesystem::path& path);

}  // namespace al4rag
