#include "mtforge/noise.hpp"

#include <algorithm>

#include "mtforge/error.hpp"

namespace mtforge::augment {

void NoiseSpec::validate() const {
  auto in01 = [](double r) { return r >= 0.0 && r <= 1.0; };
  if (!in01(unk_rate) || !in01(delete_rate) || !in01(swap_rate))
    raise(Errc::invalid_arg, "noise rates must be in [0, 1]");
  if (swap_window < 1) raise(Errc::invalid_arg, "swap_window must be >= 1");
}

namespace {

struct Slot {
  int orig;   // original position, or kUnkSlot
  bool prot;  // protected: exempt from every stage
};

std::vector<Slot> identity_slots(size_t n, const std::vector<bool>& protected_mask) {
  std::vector<Slot> slots(n);
  for (size_t i = 0; i < n; ++i)
    slots[i] = {static_cast<int>(i), i < protected_mask.size() && protected_mask[i]};
  return slots;
}

// One uniform draw per non-protected position; protected positions consume
// no randomness.
void stage_unk(std::vector<Slot>& slots, double rate, Rng& rng) {
  for (auto& s : slots) {
    if (s.prot) continue;
    if (rng.uniform01() < rate) s.orig = kUnkSlot;
  }
}

void stage_delete(std::vector<Slot>& slots, double rate, Rng& rng) {
  if (slots.empty()) return;
  std::vector<Slot> kept;
  kept.reserve(slots.size());
  for (const auto& s : slots) {
    if (!s.prot && rng.uniform01() < rate) continue;
    kept.push_back(s);
  }
  if (kept.empty()) kept.push_back(slots[rng.bounded(slots.size())]);  // never empty
  slots = std::move(kept);
}

// Single left-to-right pass. Position i may swap with a uniformly chosen
// non-protected position in (i, i+window]; positions with no eligible
// partner consume no randomness.
void stage_swap(std::vector<Slot>& slots, double rate, int window, Rng& rng) {
  const size_t len = slots.size();
  if (len < 2) return;
  for (size_t i = 0; i + 1 < len; ++i) {
    if (slots[i].prot) continue;
    size_t hi = std::min(i + static_cast<size_t>(window), len - 1);
    std::vector<size_t> eligible;
    for (size_t j = i + 1; j <= hi; ++j)
      if (!slots[j].prot) eligible.push_back(j);
    if (eligible.empty()) continue;
    if (rng.uniform01() < rate) {
      size_t j = eligible[rng.bounded(eligible.size())];
      std::swap(slots[i], slots[j]);
    }
  }
}

std::vector<int> strip(const std::vector<Slot>& slots) {
  std::vector<int> out;
  out.reserve(slots.size());
  for (const auto& s : slots) out.push_back(s.orig);
  return out;
}

}  // namespace

std::vector<int> noise_unk_plan(size_t n, const std::vector<bool>& protected_mask, double rate,
                                Rng& rng) {
  auto slots = identity_slots(n, protected_mask);
  stage_unk(slots, rate, rng);
  return strip(slots);
}

std::vector<int> noise_delete_plan(size_t n, const std::vector<bool>& protected_mask, double rate,
                                   Rng& rng) {
  auto slots = identity_slots(n, protected_mask);
  stage_delete(slots, rate, rng);
  return strip(slots);
}

std::vector<int> noise_swap_plan(size_t n, const std::vector<bool>& protected_mask, double rate,
                                 int window, Rng& rng) {
  auto slots = identity_slots(n, protected_mask);
  stage_swap(slots, rate, window, rng);
  return strip(slots);
}

std::vector<int> noise_plan(size_t n, const std::vector<bool>& protected_mask,
                            const NoiseSpec& spec, Rng& rng) {
  spec.validate();
  auto slots = identity_slots(n, protected_mask);
  stage_unk(slots, spec.unk_rate, rng);
  stage_delete(slots, spec.delete_rate, rng);
  stage_swap(slots, spec.swap_rate, spec.swap_window, rng);
  return strip(slots);
}

}  // namespace mtforge::augment
