#pragma once

#include <span>
#include <string>
#include <string_view>

namespace lkb {

/// Lower-case hex SHA-1 of raw bytes.
std::string sha1_hex(std::span<const unsigned char> bytes);

inline std::string sha1_hex(std::string_view text) {
  return sha1_hex(std::span<const unsigned char>(
      reinterpret_cast<const unsigned char*>(text.data()), text.size()));
}

/// Same digest `git hash-object` prints for a blob with this content.
std::string git_blob_hash(std::string_view content);

/// Incremental SHA-1 over a stream of doubles/ints, used for provenance
/// hashes of truth tables and round sequences.
class StreamHasher {
 public:
  StreamHasher();
  ~StreamHasher();
  StreamHasher(const StreamHasher&) = delete;
  StreamHasher& operator=(const StreamHasher&) = delete;

  void add(double v);
  void add(long long v);
  void add(std::string_view bytes);
  std::string hex();

 private:
  void* ctx_;
};

}  // namespace lkb
