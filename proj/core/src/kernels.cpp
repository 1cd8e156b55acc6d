#include "dagless/kernels.hpp"

#include <cstring>
#include <string>

#include "dagless/errors.hpp"

namespace dagless::kernels {
namespace {

std::int64_t param(std::span<const std::int64_t> params, std::size_t i, const char* kernel) {
  if (i >= params.size()) throw Error(std::string(kernel) + ": missing parameter " + std::to_string(i));
  return params[i];
}

Blob tagged_payload(std::uint64_t tag, std::int64_t payload_bytes) {
  if (payload_bytes < 8) throw BadSize("payload must hold at least the 8-byte checksum");
  std::vector<std::byte> bytes(static_cast<std::size_t>(payload_bytes));
  for (std::size_t i = 0; i < 8; ++i) bytes[i] = static_cast<std::byte>((tag >> (8 * i)) & 0xffu);
  // Filler is a cheap function of the tag so payloads stay deterministic.
  const auto fill = static_cast<std::byte>(tag & 0xffu);
  std::memset(bytes.data() + 8, std::to_integer<int>(fill), bytes.size() - 8);
  return Blob(std::move(bytes));
}

}  // namespace

std::uint64_t splitmix64(std::uint64_t x) noexcept {
  x += 0x9e3779b97f4a7c15ull;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
  return x ^ (x >> 31);
}

std::uint64_t mix(std::uint64_t a, std::uint64_t b) noexcept {
  return splitmix64(a * 0x100000001b3ull ^ splitmix64(b));
}

KernelSpec add(std::vector<std::int64_t> constants) {
  auto fn = [constants](std::span<const Blob> inputs) {
    std::int64_t sum = 0;
    for (auto c : constants) sum += c;
    for (const auto& in : inputs) sum += in.as_i64();
    return Blob::from_i64(sum);
  };
  return {"tr.add", std::move(constants), fn};
}

KernelSpec sleep_step(std::int64_t chain, std::int64_t position) {
  auto fn = [](std::span<const Blob> inputs) {
    std::int64_t v = 1;
    for (const auto& in : inputs) v += in.as_i64();
    return Blob::from_i64(v);
  };
  return {"sleep.step", {chain, position}, fn};
}

double gemm_element(std::uint64_t seed, int which, std::int64_t row, std::int64_t col, bool identity) noexcept {
  if (identity) return row == col ? 1.0 : 0.0;
  std::uint64_t h = splitmix64(seed ^ splitmix64(static_cast<std::uint64_t>(which) * 0x51ed27ull +
                                                 splitmix64(static_cast<std::uint64_t>(row) << 32 |
                                                            static_cast<std::uint64_t>(col))));
  // Uniform in [-1, 1) with 53 bits of mantissa.
  return static_cast<double>(h >> 11) * 0x1.0p-52 - 1.0;
}

std::vector<double> gemm_block(std::uint64_t seed, int which, std::int64_t block_row, std::int64_t block_col,
                               std::int64_t block, bool identity) {
  std::vector<double> out(static_cast<std::size_t>(block * block));
  for (std::int64_t r = 0; r < block; ++r) {
    for (std::int64_t c = 0; c < block; ++c) {
      out[static_cast<std::size_t>(r * block + c)] =
          gemm_element(seed, which, block_row * block + r, block_col * block + c, identity);
    }
  }
  return out;
}

KernelSpec gemm_product(std::int64_t block, std::uint64_t seed, std::int64_t i, std::int64_t k, std::int64_t j,
                        bool identity) {
  auto fn = [=](std::span<const Blob>) {
    auto x = gemm_block(seed, 0, i, k, block, identity);
    auto y = gemm_block(seed, 1, k, j, block, identity);
    std::vector<double> z(x.size(), 0.0);
    for (std::int64_t r = 0; r < block; ++r) {
      for (std::int64_t m = 0; m < block; ++m) {
        const double a = x[static_cast<std::size_t>(r * block + m)];
        for (std::int64_t c = 0; c < block; ++c) {
          z[static_cast<std::size_t>(r * block + c)] += a * y[static_cast<std::size_t>(m * block + c)];
        }
      }
    }
    return Blob::from_doubles(z);
  };
  return {"gemm.product",
          {block, static_cast<std::int64_t>(seed), i, k, j, identity ? 1 : 0},
          fn};
}

KernelSpec gemm_sum() {
  auto fn = [](std::span<const Blob> inputs) {
    std::vector<double> acc;
    for (const auto& in : inputs) {
      auto v = in.as_doubles();
      if (acc.empty()) {
        acc = std::move(v);
        continue;
      }
      if (v.size() != acc.size()) throw Error("gemm.sum: block size mismatch");
      for (std::size_t i = 0; i < v.size(); ++i) acc[i] += v[i];
    }
    return Blob::from_doubles(acc);
  };
  return {"gemm.sum", {}, fn};
}

std::uint64_t tsqr_leaf_tag(std::uint64_t seed, std::int64_t block) noexcept {
  return splitmix64(seed ^ splitmix64(static_cast<std::uint64_t>(block) + 0x7a5a11ull));
}

KernelSpec tsqr_factor(std::int64_t block, std::int64_t payload_bytes, std::uint64_t seed) {
  auto fn = [=](std::span<const Blob>) { return tagged_payload(tsqr_leaf_tag(seed, block), payload_bytes); };
  return {"tsqr.factor", {block, payload_bytes, static_cast<std::int64_t>(seed)}, fn};
}

KernelSpec tsqr_r() {
  auto fn = [](std::span<const Blob> inputs) {
    if (inputs.size() != 1) throw Error("tsqr.r expects one input");
    return Blob::from_i64(static_cast<std::int64_t>(inputs[0].read_u64(0)));
  };
  return {"tsqr.r", {}, fn};
}

KernelSpec tsqr_combine() {
  auto fn = [](std::span<const Blob> inputs) {
    if (inputs.size() != 2) throw Error("tsqr.combine expects two inputs");
    return Blob::from_i64(static_cast<std::int64_t>(mix(inputs[0].read_u64(0), inputs[1].read_u64(0))));
  };
  return {"tsqr.combine", {}, fn};
}

KernelSpec tsqr_apply() {
  auto fn = [](std::span<const Blob> inputs) {
    if (inputs.size() != 2) throw Error("tsqr.apply expects two inputs");
    return Blob::from_i64(static_cast<std::int64_t>(mix(inputs[0].read_u64(0), inputs[1].read_u64(0))));
  };
  return {"tsqr.apply", {}, fn};
}

KernelSpec tsqr_single(std::int64_t payload_bytes, std::uint64_t seed) {
  auto fn = [=](std::span<const Blob>) {
    return Blob::from_i64(static_cast<std::int64_t>(tsqr_leaf_tag(seed, 0)));
  };
  return {"tsqr.single", {payload_bytes, static_cast<std::int64_t>(seed)}, fn};
}

void register_builtin(KernelRegistry& registry) {
  registry.add("tr.add", [](std::span<const std::int64_t> p) {
    return add(std::vector<std::int64_t>(p.begin(), p.end())).fn;
  });
  registry.add("sleep.step", [](std::span<const std::int64_t> p) {
    return sleep_step(param(p, 0, "sleep.step"), param(p, 1, "sleep.step")).fn;
  });
  registry.add("gemm.product", [](std::span<const std::int64_t> p) {
    return gemm_product(param(p, 0, "gemm.product"), static_cast<std::uint64_t>(param(p, 1, "gemm.product")),
                        param(p, 2, "gemm.product"), param(p, 3, "gemm.product"), param(p, 4, "gemm.product"),
                        param(p, 5, "gemm.product") != 0)
        .fn;
  });
  registry.add("gemm.sum", [](std::span<const std::int64_t>) { return gemm_sum().fn; });
  registry.add("tsqr.factor", [](std::span<const std::int64_t> p) {
    return tsqr_factor(param(p, 0, "tsqr.factor"), param(p, 1, "tsqr.factor"),
                       static_cast<std::uint64_t>(param(p, 2, "tsqr.factor")))
        .fn;
  });
  registry.add("tsqr.r", [](std::span<const std::int64_t>) { return tsqr_r().fn; });
  registry.add("tsqr.combine", [](std::span<const std::int64_t>) { return tsqr_combine().fn; });
  registry.add("tsqr.apply", [](std::span<const std::int64_t>) { return tsqr_apply().fn; });
  registry.add("tsqr.single", [](std::span<const std::int64_t> p) {
    return tsqr_single(param(p, 0, "tsqr.single"), static_cast<std::uint64_t>(param(p, 1, "tsqr.single"))).fn;
  });
}

}  // namespace dagless::kernels
