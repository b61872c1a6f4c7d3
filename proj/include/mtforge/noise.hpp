#pragma once

#include <cstdint>
#include <vector>

#include "mtforge/rng.hpp"

namespace mtforge::augment {

// Rates and window for unk/delete/swap corruption. Defaults follow common
// practice; the paper leaves them open.
struct NoiseSpec {
  double unk_rate = 0.1;
  double delete_rate = 0.1;
  double swap_rate = 0.1;
  int swap_window = 3;
  uint64_t seed = 0;

  void validate() const;
};

// Index-level noise plan shared by the token-string operations and by
// target denoising on id sequences. The result lists, in output order, the
// original position of each surviving token, or kUnkSlot for a position
// replaced by <unk>. Protected positions are never replaced, deleted, or
// moved. Stages run unk, then delete, then swap, drawing from `rng` in
// that fixed order.
inline constexpr int kUnkSlot = -1;

std::vector<int> noise_plan(size_t n, const std::vector<bool>& protected_mask,
                            const NoiseSpec& spec, Rng& rng);

std::vector<int> noise_unk_plan(size_t n, const std::vector<bool>& protected_mask, double rate,
                                Rng& rng);
std::vector<int> noise_delete_plan(size_t n, const std::vector<bool>& protected_mask, double rate,
                                   Rng& rng);
std::vector<int> noise_swap_plan(size_t n, const std::vector<bool>& protected_mask, double rate,
                                 int window, Rng& rng);

}  // namespace mtforge::augment
