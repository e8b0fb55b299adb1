#pragma once

#include <cstdint>
#include <stdexcept>

namespace lnmc {

// Exploration is deterministic; there is no RNG and hence no seed.
struct ModelConfig {
  unsigned max_htlcs = 10;        // 1..483
  unsigned buffer_capacity = 1;   // state space grows exponentially with this
  unsigned csv_delay = 1081;      // blocks; >= 144
  unsigned cltv_expiry = 40;      // blocks
  std::uint64_t state_cap = 0;    // 0 = unlimited

  // Test fixture: turn the FAIL_CHANNEL self-loop into a real step and drop
  // its end-state status, planting a non-progress cycle for the detector
  // self-test. Never set outside tests.
  bool fail_channel_selfloop_fixture = false;

  void validate() const {
    if (max_htlcs < 1 || max_htlcs > 483)
      throw std::invalid_argument("max_htlcs must be in 1..483");
    if (buffer_capacity < 1)
      throw std::invalid_argument("buffer_capacity must be >= 1");
    if (csv_delay < 144)
      throw std::invalid_argument("csv_delay must be >= 144");
    if (cltv_expiry < 1)
      throw std::invalid_argument("cltv_expiry must be >= 1");
  }
};

}  // namespace lnmc
