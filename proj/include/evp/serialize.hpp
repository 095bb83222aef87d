#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "evp/codes.hpp"
#include "evp/search.hpp"

// Versioned JSON documents for the artifacts that cross the process
// boundary: function codes (as construction recipes), criticality
// certificates, and run manifests.  Every document carries {"schema":
// <name>, "version": 1}; rationals travel as {"num": "...", "den": "..."}
// strings so nothing is rounded.  Loading is strict: unknown schema names,
// versions, or construction ops are rejected with SchemaError.  Writes go
// through a temp file and rename so readers never observe partial output.

namespace evp {

inline constexpr int kSchemaVersion = 1;
inline constexpr const char* kToolVersion = "evp 1.0.0";

/// A document failed structural validation (wrong schema name, version,
/// missing field, unknown construction op, malformed value).
struct SchemaError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// ---------------------------------------------------------------------------
// Function-code documents ({"schema": "code"}).
//
// The payload is the code's construction recipe (its serial op tree);
// loading replays the recipe through the public factories, so a loaded
// code carries the same behaviour and the same recipe.

/// Throws SchemaError when the code was built in-process from
/// non-serializable parts (empty serial).
std::string code_document(const ContCode& f);
std::string code_document(const LscCode& f);

/// A code file holds either flavor; exactly one member is set.
struct LoadedCode {
  std::optional<ContCode> cont;
  std::optional<LscCode> lsc;

  bool is_cont() const { return cont.has_value(); }
  const Space& space() const { return is_cont() ? cont->space() : lsc->space(); }
  /// The lsc view (continuous codes are promoted via cont_to_lsc).
  LscCode as_lsc() const;
};

LoadedCode load_code_document(const std::string& text);

/// Rebuilds a code from a bare recipe (the "code" payload, no wrapper).
ContCode cont_code_from_recipe(const std::string& recipe);
LscCode lsc_code_from_recipe(const std::string& recipe);

// ---------------------------------------------------------------------------
// Region documents (net restrictions, embedded in params).

std::string region_to_text(const Region& r);
Region region_from_text(const std::string& text);

// ---------------------------------------------------------------------------
// Certificate documents ({"schema": "certificate"}).

std::string certificate_document(const CriticalityCertificate& cert);
CriticalityCertificate certificate_from_document(const std::string& text);

// ---------------------------------------------------------------------------
// Run manifests ({"schema": "manifest"}).

struct RunManifest {
  std::string command;             // subcommand name
  std::vector<std::string> argv;   // full argument vector for re-running
  std::string parameters;          // normalized parameter object, JSON text
  std::vector<std::pair<std::string, std::string>> inputs;  // path -> digest
  std::string tool_version = kToolVersion;
  std::string outcome;             // one-line summary
};

std::string manifest_document(const RunManifest& m);
RunManifest manifest_from_document(const std::string& text);

// ---------------------------------------------------------------------------
// File plumbing.

/// FNV-1a 64-bit digest, as 16 lowercase hex digits.
std::string content_digest(const std::string& content);

std::string read_file(const std::string& path);

/// Writes content to a sibling temp file, then renames over the target:
/// readers see the old bytes or the new bytes, never a prefix.
void write_file_atomic(const std::string& path, const std::string& content);

}  // namespace evp
