#include "dagless/blob.hpp"

#include <algorithm>
#include <cstring>
#include <stdexcept>

#include "dagless/errors.hpp"

namespace dagless {

Blob::Blob(std::vector<std::byte> bytes)
    : data_(std::make_shared<const std::vector<std::byte>>(std::move(bytes))) {}

Blob Blob::from_string(std::string_view text) {
  std::vector<std::byte> bytes(text.size());
  std::memcpy(bytes.data(), text.data(), text.size());
  return Blob(std::move(bytes));
}

Blob Blob::from_i64(std::int64_t value) {
  std::vector<std::byte> bytes(sizeof(value));
  auto u = static_cast<std::uint64_t>(value);
  for (std::size_t i = 0; i < bytes.size(); ++i) {
    bytes[i] = static_cast<std::byte>((u >> (8 * i)) & 0xffu);
  }
  return Blob(std::move(bytes));
}

Blob Blob::from_doubles(std::span<const double> values) {
  std::vector<std::byte> bytes(values.size_bytes());
  std::memcpy(bytes.data(), values.data(), values.size_bytes());
  return Blob(std::move(bytes));
}

std::span<const std::byte> Blob::bytes() const noexcept {
  if (!data_) return {};
  return {data_->data(), data_->size()};
}

std::int64_t Blob::as_i64() const {
  return static_cast<std::int64_t>(read_u64(0));
}

std::uint64_t Blob::read_u64(std::size_t offset) const {
  if (offset + 8 > size()) throw Error("blob too small to hold a 64-bit value");
  std::uint64_t u = 0;
  auto b = bytes();
  for (std::size_t i = 0; i < 8; ++i) {
    u |= static_cast<std::uint64_t>(std::to_integer<unsigned>(b[offset + i])) << (8 * i);
  }
  return u;
}

std::vector<double> Blob::as_doubles() const {
  if (size() % sizeof(double) != 0) throw Error("blob size is not a multiple of sizeof(double)");
  std::vector<double> out(size() / sizeof(double));
  if (!out.empty()) std::memcpy(out.data(), bytes().data(), size());
  return out;
}

std::string Blob::to_string() const {
  auto b = bytes();
  return std::string(reinterpret_cast<const char*>(b.data()), b.size());
}

Blob Blob::clone() const {
  auto b = bytes();
  return Blob(std::vector<std::byte>(b.begin(), b.end()));
}

bool operator==(const Blob& a, const Blob& b) noexcept {
  if (a.data_ == b.data_) return true;
  auto x = a.bytes();
  auto y = b.bytes();
  return std::equal(x.begin(), x.end(), y.begin(), y.end());
}

std::uint64_t fnv1a(std::string_view text) noexcept {
  std::uint64_t h = 1469598103934665603ull;
  for (char c : text) {
    h ^= static_cast<unsigned char>(c);
    h *= 1099511628211ull;
  }
  return h;
}

std::uint64_t fingerprint(const Blob& blob) noexcept {
  std::uint64_t h = 1469598103934665603ull;
  for (std::byte c : blob.bytes()) {
    h ^= std::to_integer<unsigned>(c);
    h *= 1099511628211ull;
  }
  return h;
}

}  // namespace dagless
