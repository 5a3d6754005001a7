#include "itercomm/transport/endpoint.hpp"

#include <algorithm>

namespace itercomm::transport {

std::string_view tag_name(Tag t) noexcept {
  switch (t) {
    case Tag::data: return "data";
    case Tag::snapshot_data: return "snapshot-data";
    case Tag::local_conv: return "local-conv";
    case Tag::norm_up: return "norm-up";
    case Tag::norm_down: return "norm-down";
    case Tag::control: return "control";
    case Tag::terminate: return "terminate";
  }
  return "?";
}

bool Endpoint::has_out(Rank peer) const noexcept {
  const auto& l = out_peers();
  return std::find(l.begin(), l.end(), peer) != l.end();
}

bool Endpoint::has_in(Rank peer) const noexcept {
  const auto& l = in_peers();
  return std::find(l.begin(), l.end(), peer) != l.end();
}

}  // namespace itercomm::transport
