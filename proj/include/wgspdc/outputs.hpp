#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace wgspdc {

// SHA-256 of a byte buffer, lowercase hex.
std::string sha256_hex(const void* data, std::size_t n);
std::string sha256_hex(const std::string& s);

// Collects every file a pipeline emits and finishes with a manifest listing
// path, size and content hash. Deterministic: entries sorted by path, doubles
// rendered with shortest round-trip formatting.
class ArtifactWriter {
public:
  explicit ArtifactWriter(std::string directory);

  const std::string& directory() const { return dir_; }

  // raw bytes
  void write_bytes(const std::string& name, const std::string& bytes);
  // CSV with a single header line; each row formatted with %.17g
  void write_csv(const std::string& name, const std::string& header,
                 const std::vector<std::vector<double>>& rows);
  // binary 16-bit PGM (P5), values scaled to the data maximum, plus a JSON
  // sidecar carrying the axis scales and normalization
  void write_pgm16(const std::string& name, const std::vector<double>& values, int nx, int ny,
                   const std::string& sidecar_json);

  // writes <dir>/manifest.json and returns its path
  std::string finish_manifest();

  const std::vector<std::string>& files() const { return names_; }

private:
  std::string dir_;
  std::vector<std::string> names_;
  std::vector<std::string> hashes_;
  std::vector<std::size_t> sizes_;
};

std::string format_double(double v); // %.17g, used by every writer

} // namespace wgspdc
