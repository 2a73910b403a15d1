#pragma once

#include <optional>
#include <string>
#include <vector>

#include "satlens/error.hpp"
#include "satlens/nn/spec.hpp"

namespace satlens::nn {

struct ReceptiveFieldEntry {
  std::size_t layer_index = 0;
  std::string name;
  std::size_t rf = 1;    // receptive field side after this layer
  std::size_t jump = 1;  // input stride of one output step
};

struct ReceptiveFieldReport {
  std::size_t input_side = 0;
  std::vector<ReceptiveFieldEntry> layers;
  /// Index (into `layers`) of the first layer whose receptive field exceeds
  /// the input side, if any.
  std::optional<std::size_t> first_exceeding;
};

/// Receptive-field recurrence over a sequential architecture:
/// r <- r + (kernel - 1) * jump, jump <- jump * stride for conv/maxpool;
/// every other layer inherits the current values. Resolution-dependent heads
/// (adaptive/global pooling, flatten, dense) do not advance the recurrence.
inline ReceptiveFieldReport receptive_field(const Architecture& arch, std::size_t input_side) {
  require(arch.topology == "sequential", ErrorKind::UnsupportedTopology,
          "receptive field is only defined here for sequential (single-path) architectures");
  require(input_side >= 1, ErrorKind::DomainError, "input side must be at least 1");

  ReceptiveFieldReport report;
  report.input_side = input_side;
  std::size_t rf = 1;
  std::size_t jump = 1;
  for (std::size_t i = 0; i < arch.layers.size(); ++i) {
    const LayerSpec& spec = arch.layers[i];
    if (spec.kind == LayerKind::conv2d || spec.kind == LayerKind::maxpool) {
      rf += (spec.kernel - 1) * jump;
      jump *= spec.stride;
    }
    ReceptiveFieldEntry entry;
    entry.layer_index = i;
    entry.name = std::string(to_string(spec.kind)) + "_" + std::to_string(i);
    entry.rf = rf;
    entry.jump = jump;
    if (!report.first_exceeding && rf > input_side) report.first_exceeding = i;
    report.layers.push_back(std::move(entry));
  }
  return report;
}

}  // namespace satlens::nn
