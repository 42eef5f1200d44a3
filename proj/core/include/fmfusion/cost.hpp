#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "fmfusion/fusion_net.hpp"

namespace fmf {

struct LayerCost {
  std::string name;
  std::uint64_t params = 0;
  std::uint64_t macs = 0;
};

/// Parameter and multiply-accumulate totals for one forward pass of a single
/// sample. Shared filters contribute their parameters once and their MACs once
/// per branch execution.
struct CostReport {
  Variant variant = Variant::Baseline;
  std::size_t input_h = 0;
  std::size_t input_w = 0;
  std::uint64_t total_params = 0;
  std::uint64_t total_macs = 0;
  std::vector<LayerCost> per_layer;

  std::string to_json() const;
  /// Aligned plain-text table, one row per layer plus a totals row.
  void write_table(std::ostream& os) const;
};

/// Counts from the layer formulas alone, independent of any built network.
///   conv: params K*K*Cin*Cout + Cout, MACs K*K*Cin*Cout*Hout*Wout
///   fc:   params Din*Dout + Dout,     MACs Din*Dout
CostReport count_cost(const ArchitectureSpec& spec, std::size_t input_h, std::size_t input_w);

std::uint64_t conv_params(std::size_t k, std::size_t cin, std::size_t cout);
std::uint64_t conv_macs(std::size_t k, std::size_t cin, std::size_t cout, std::size_t hout,
                        std::size_t wout);
std::uint64_t fc_params(std::size_t din, std::size_t dout);
std::uint64_t fc_macs(std::size_t din, std::size_t dout);

}  // namespace fmf
