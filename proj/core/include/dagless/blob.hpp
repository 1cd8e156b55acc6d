#pragma once

#include <cstddef>
#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace dagless {

// Immutable, cheaply copyable byte payload. Copies share the underlying
// buffer, so handing an object to the store, an executor cache and an
// inline invocation argument never duplicates the bytes.
class Blob {
 public:
  Blob() = default;
  explicit Blob(std::vector<std::byte> bytes);

  static Blob from_string(std::string_view text);
  static Blob from_i64(std::int64_t value);
  static Blob from_doubles(std::span<const double> values);

  std::span<const std::byte> bytes() const noexcept;
  std::size_t size() const noexcept { return data_ ? data_->size() : 0; }
  bool empty() const noexcept { return size() == 0; }

  std::int64_t as_i64() const;
  std::vector<double> as_doubles() const;
  std::uint64_t read_u64(std::size_t offset) const;
  std::string to_string() const;

  // Deep copy; used where a transfer must materialize a new buffer.
  Blob clone() const;

  friend bool operator==(const Blob& a, const Blob& b) noexcept;

 private:
  std::shared_ptr<const std::vector<std::byte>> data_;
};

// 64-bit FNV-1a over the payload; stable across runs and platforms.
std::uint64_t fingerprint(const Blob& blob) noexcept;
std::uint64_t fnv1a(std::string_view text) noexcept;

}  // namespace dagless
