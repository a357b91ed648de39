#include "al4rag/manifest.hpp"

#include <fstream>
#include <sstream>

#include "al4rag/error.hpp"
#include "al4rag/hashing.hpp"

namespace al4rag {

RunManifest::RunManifest(std::string_view command) {
  fields_["tool"] = std::string(kToolName);
  fields_["tool_version"] = std::string(kToolVersion);
  fields_["command"] = std::string(command);
}

std::string RunManifest::dump() const { return fields_.dump(2) + "\n"; }

std::string RunManifest::hash() const { return sha256_hex(fields_.dump()); }

void RunManifest::write(const std::filesystem::path& path) const {
  auto with_hash = fields_;
  with_hash["manifest_hash"] = hash();
  write_text_file(path, with_hash.dump(2) + "\n");
}

void write_text_file(const std::filesystem::path& path, std::string_view content) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::io_failure, "cannot write " + path.string());
  out.write(content.data(), static_cast<std::streamsize>(content.size()));
  if (!out) throw Error(ErrorCode::io_failure, "failed writing " + path.string());
}

std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::io_failure, "cannot open " + path.string());
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return buffer.str();
}

}  // namespace al4rag
