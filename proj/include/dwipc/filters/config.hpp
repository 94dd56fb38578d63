#pragma once

#include <array>
#include <cstddef>
#include <string>
#include <variant>

#include "dwipc/volcore/error.hpp"

namespace dwipc::filters {

struct TvConfig {
  double lambda = 2.0;
  int iters = 10;
};

struct CfConfig {
  int iters = 10;
};

struct MppcaConfig {
  std::array<std::size_t, 3> block{5, 5, 5};
  std::size_t stride = 1;
};

using FilterConfig = std::variant<TvConfig, CfConfig, MppcaConfig>;

inline std::string name_of(const FilterConfig& cfg) {
  struct {
    std::string operator()(const TvConfig&) const { return "TV"; }
    std::string operator()(const CfConfig&) const { return "CF"; }
    std::string operator()(const MppcaConfig&) const { return "MPPCA"; }
  } visitor;
  return std::visit(visitor, cfg);
}

inline void validate(const TvConfig& c) {
  if (!(c.lambda > 0.0)) throw Error(ErrorKind::InvalidArgument, "TV lambda must be > 0");
  if (c.iters < 1) throw Error(ErrorKind::InvalidArgument, "TV iters must be >= 1");
}

inline void validate(const CfConfig& c) {
  if (c.iters < 1) throw Error(ErrorKind::InvalidArgument, "CF iters must be >= 1");
}

inline void validate(const MppcaConfig& c) {
  for (auto b : c.block)
    if (b < 3 || b % 2 == 0) throw Error(ErrorKind::InvalidArgument, "MPPCA block dims must be odd and >= 3");
  if (c.stride < 1) throw Error(ErrorKind::InvalidArgument, "MPPCA stride must be >= 1");
}

inline void validate(const FilterConfig& cfg) {
  std::visit([](const auto& c) { validate(c); }, cfg);
}

}  // namespace dwipc::filters
