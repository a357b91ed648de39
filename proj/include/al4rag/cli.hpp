#pragma once

#include <cstddef>
#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

#include "al4rag/error.hpp"

namespace al4rag::cli {

enum ExitCode : int { kOk = 0, kUsage = 1, kDataError = 2, kIoError = 3 };

int exit_code_for(ErrorCode code);

// "40" -> 40; "25%" -> ceil(0.25 * pool_size). Throws Error(usage) for
// zero, negative, or unparsable budgets.
std::size_t resolve_budget(std::string_view spec, std::size_t pool_size);

// Subcommands: ingest-check, select, serve, build-prefs, report, embed-import.
// `args` excludes the program name. Flags fall back to AL4RAG_* environment
// variables (e.g. AL4RAG_SEED, AL4RAG_CORPUS).
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);
int run(int argc, const char* const* argv);

}  // namespace al4rag::cli
