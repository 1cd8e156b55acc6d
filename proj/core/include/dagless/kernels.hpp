#pragma once

#include <cstdint>
#include <vector>

#include "dagless/task_graph.hpp"

namespace dagless::kernels {

std::uint64_t splitmix64(std::uint64_t x) noexcept;
std::uint64_t mix(std::uint64_t a, std::uint64_t b) noexcept;

// Sum of the params followed by the 64-bit integer inputs.
KernelSpec add(std::vector<std::int64_t> constants = {});

// One step of a sleep chain: 1 + predecessor (or 1 for the chain head).
KernelSpec sleep_step(std::int64_t chain, std::int64_t position);

// Element (row, col) of GEMM operand `which` (0 = X, 1 = Y), regenerated
// from the seed so that a naive multiply can be used as an oracle.
double gemm_element(std::uint64_t seed, int which, std::int64_t row, std::int64_t col, bool identity) noexcept;
std::vector<double> gemm_block(std::uint64_t seed, int which, std::int64_t block_row, std::int64_t block_col,
                               std::int64_t block, bool identity);
KernelSpec gemm_product(std::int64_t block, std::uint64_t seed, std::int64_t i, std::int64_t k, std::int64_t j,
                        bool identity);
KernelSpec gemm_sum();

// TSQR-shaped dataflow over checksum-tagged synthetic payloads. The first
// eight bytes of every payload carry the checksum.
std::uint64_t tsqr_leaf_tag(std::uint64_t seed, std::int64_t block) noexcept;
KernelSpec tsqr_factor(std::int64_t block, std::int64_t payload_bytes, std::uint64_t seed);
KernelSpec tsqr_r();
KernelSpec tsqr_combine();
KernelSpec tsqr_apply();
KernelSpec tsqr_single(std::int64_t payload_bytes, std::uint64_t seed);

void register_builtin(KernelRegistry& registry);

}  // namespace dagless::kernels
