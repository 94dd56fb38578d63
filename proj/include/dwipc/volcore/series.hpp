#pragma once

#include <string>
#include <vector>

#include "dwipc/volcore/gradients.hpp"
#include "dwipc/volcore/volume.hpp"

namespace dwipc {

/// Ordered DW volumes sharing one grid, paired with their gradient table.
template <class V>
struct Series {
  std::vector<V> volumes;
  GradientTable gradients;

  std::size_t size() const noexcept { return volumes.size(); }
  const Dims& dims() const { return volumes.front().dims(); }

  void validate() const {
    if (volumes.size() != gradients.size())
      throw Error(ErrorKind::CountMismatch, std::to_string(volumes.size()) + " volumes but " +
                                                std::to_string(gradients.size()) + " gradient entries");
    for (const auto& v : volumes)
      if (v.dims() != volumes.front().dims())
        throw Error(ErrorKind::DimsMismatch, "series volumes do not share dims");
  }
};

using ComplexSeries = Series<ComplexVolume3>;
using MagnitudeSeries = Series<Volume3>;

inline MagnitudeSeries magnitude_of(const ComplexSeries& s) {
  MagnitudeSeries out;
  out.gradients = s.gradients;
  out.volumes.reserve(s.size());
  for (const auto& v : s.volumes) out.volumes.push_back(v.magnitude());
  return out;
}

}  // namespace dwipc
