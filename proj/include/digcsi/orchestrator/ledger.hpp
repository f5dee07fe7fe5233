#pragma once

#include <cstdint>
#include <numeric>
#include <vector>

#include "digcsi/channel/dataset_io.hpp"
#include "digcsi/swae/architecture.hpp"

namespace digcsi::orchestrator {

/// Equivalent upload cost of one arm: bytes each UE sends to the server.
struct OverheadLedger {
  struct Row {
    std::uint32_t ue_id = 0;
    std::uint64_t upload_bytes = 0;
  };
  std::vector<Row> rows;
  std::uint64_t cl_all_bytes = 0;  // reference: every participant uploads its whole train split

  std::uint64_t total_bytes() const {
    return std::accumulate(rows.begin(), rows.end(), std::uint64_t{0},
                           [](std::uint64_t acc, const Row& r) { return acc + r.upload_bytes; });
  }

  /// total / cl_all; 0 when there is no reference.
  double proportion() const {
    return cl_all_bytes == 0 ? 0.0
                             : static_cast<double>(total_bytes()) / static_cast<double>(cl_all_bytes);
  }
};

/// Bytes of one single-precision generator upload.
inline std::uint64_t generator_upload_bytes(const swae::SwaeArchitecture& arch) {
  return swae::decoder_parameter_count(arch) * sizeof(float);
}

/// Bytes of uploading `samples` single-precision CSI samples of the given extents.
inline std::uint64_t dataset_upload_bytes(std::uint64_t samples, std::uint64_t subcarriers = 32,
                                          std::uint64_t antennas = 32) {
  return channel::dataset_payload_bytes(samples, subcarriers, antennas);
}

}  // namespace digcsi::orchestrator
