#include "fmfusion/cost.hpp"

#include <algorithm>
#include <iomanip>
#include <ostream>

#include <json.hpp>

namespace fmf {

std::uint64_t conv_params(std::size_t k, std::size_t cin, std::size_t cout) {
  return std::uint64_t{k} * k * cin * cout + cout;
}

std::uint64_t conv_macs(std::size_t k, std::size_t cin, std::size_t cout, std::size_t hout,
                        std::size_t wout) {
  return std::uint64_t{k} * k * cin * cout * hout * wout;
}

std::uint64_t fc_params(std::size_t din, std::size_t dout) {
  return std::uint64_t{din} * dout + dout;
}

std::uint64_t fc_macs(std::size_t din, std::size_t dout) { return std::uint64_t{din} * dout; }

CostReport count_cost(const ArchitectureSpec& spec, std::size_t input_h, std::size_t input_w) {
  spec.validate();
  const std::size_t stages = spec.stage_count();
  const std::size_t factor = std::size_t{1} << stages;
  if (input_h == 0 || input_w == 0 || input_h % factor != 0 || input_w % factor != 0) {
    throw SpecError("input " + std::to_string(input_h) + "x" + std::to_string(input_w) +
                    " is not divisible by " + std::to_string(factor));
  }

  CostReport r;
  r.variant = spec.variant;
  r.input_h = input_h;
  r.input_w = input_w;
  auto add = [&r](std::string name, std::uint64_t params, std::uint64_t macs) {
    r.per_layer.push_back(LayerCost{std::move(name), params, macs});
  };

  for (std::size_t i = 0; i < stages; ++i) {
    const std::size_t c = spec.stage_channels[i];
    const std::size_t h = input_h >> i, w = input_w >> i;
    const std::string idx = std::to_string(i);
    add("enc.rgb." + idx, conv_params(3, spec.rgb_in_channels(i), c),
        conv_macs(3, spec.rgb_in_channels(i), c, h, w));
    if (spec.is_shared(i)) {
      add("enc.depth." + idx + " (shared)", 0, conv_macs(3, spec.depth_in_channels(i), c, h, w));
    } else {
      add("enc.depth." + idx, conv_params(3, spec.depth_in_channels(i), c),
          conv_macs(3, spec.depth_in_channels(i), c, h, w));
    }
    if (spec.uses_fusion_filters()) {
      add("fusion." + idx + ".depth_to_rgb", conv_params(1, c, c), conv_macs(1, c, c, h, w));
      if (spec.variant == Variant::AllFilterB) {
        add("fusion." + idx + ".rgb_to_depth", conv_params(1, c, c), conv_macs(1, c, c, h, w));
      }
    }
    if (spec.uses_awn() && spec.is_shared(i)) {
      const std::size_t hidden = std::max<std::size_t>(1, c / 2);
      add("awn." + idx + ".probe", conv_params(3, c, c), 2 * conv_macs(3, c, c, h, w));
      add("awn." + idx + ".fc1", fc_params(c, hidden), fc_macs(c, hidden));
      add("awn." + idx + ".fc2", fc_params(hidden, 1), fc_macs(hidden, 1));
    }
  }
  for (std::size_t k = stages; k-- > 0;) {
    const std::size_t cin = spec.decoder_in_channels(k);
    const std::size_t c = spec.stage_channels[k];
    add("dec." + std::to_string(k), conv_params(3, cin, c),
        conv_macs(3, cin, c, input_h >> k, input_w >> k));
  }
  add("head", conv_params(1, spec.stage_channels.front(), spec.num_classes),
      conv_macs(1, spec.stage_channels.front(), spec.num_classes, input_h, input_w));

  for (const auto& l : r.per_layer) {
    r.total_params += l.params;
    r.total_macs += l.macs;
  }
  return r;
}

std::string CostReport::to_json() const {
  nlohmann::ordered_json j;
  j["variant"] = std::string(variant_name(variant));
  j["input"] = {{"height", input_h}, {"width", input_w}};
  j["total_params"] = total_params;
  j["total_macs"] = total_macs;
  auto layers = nlohmann::ordered_json::array();
  for (const auto& l : per_layer) {
    layers.push_back({{"name", l.name}, {"params", l.params}, {"macs", l.macs}});
  }
  j["per_layer"] = std::move(layers);
  return j.dump(2);
}

void CostReport::write_table(std::ostream& os) const {
  std::size_t name_w = 5;
  for (const auto& l : per_layer) name_w = std::max(name_w, l.name.size());
  const auto row = [&](const std::string& name, const std::string& p, const std::string& m) {
    os << std::left << std::setw(static_cast<int>(name_w)) << name << "  " << std::right
       << std::setw(12) << p << "  " << std::setw(14) << m << '\n';
  };
  os << variant_name(variant) << " @ " << input_h << "x" << input_w << '\n';
  row("layer", "params", "macs");
  os << std::string(name_w + 30, '-') << '\n';
  for (const auto& l : per_layer) row(l.name, std::to_string(l.params), std::to_string(l.macs));
  os << std::string(name_w + 30, '-') << '\n';
  row("total", std::to_string(total_params), std::to_string(total_macs));
}

}  // namespace fmf
